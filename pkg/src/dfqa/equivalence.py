"""Judging executed results against ground truth.

The comparison pipeline is: normalize both sides (trim/lowercase strings,
retype numeric strings, unwrap single-element containers), try strict
equality with numeric tolerance, then fall back to the relaxed containment
criterion where a container answer counts as correct if it includes every
ground-truth value. Containers that merely overlap the ground truth are
routed to needs_review instead of being silently marked wrong.

Strict comparison is shape-aware but order-insensitive by default:
value lists and table rows compare as multisets, and a series compares by
its values (the index is informative, not load-bearing, because ground
truth produced from reference queries reproduces it anyway).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

from .model import (
    CanonResult,
    ErrorKind,
    ExecError,
    Scalar,
    ScalarKind,
    Series,
    Table,
    ValueList,
    Verdict,
    is_error,
)

_RANK = {
    ScalarKind.NULL: 0,
    ScalarKind.BOOL: 1,
    ScalarKind.NUMBER: 2,
    ScalarKind.STRING: 3,
    ScalarKind.DATETIME: 4,
}


@dataclass(frozen=True)
class JudgeConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    list_order_sensitive: bool = False
    string_trim: bool = True
    lowercase_compare: bool = False
    count_needs_review_as_correct: bool = False
    containment: str = "cells"  # "cells" | "rows"

    def __post_init__(self) -> None:
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be >= 0")
        if self.containment not in ("cells", "rows"):
            raise ValueError(f"unknown containment mode {self.containment!r}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "JudgeConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def merged(self, overrides: dict[str, Any]) -> "JudgeConfig":
        known = {f for f in self.__dataclass_fields__}
        return replace(self, **{k: v for k, v in overrides.items() if k in known and v is not None})


def _normalize_scalar(s: Scalar, cfg: JudgeConfig) -> Scalar:
    if s.dtype is ScalarKind.STRING:
        text = s.value
        if cfg.string_trim:
            text = text.strip()
        # numeric strings that parse exactly are retyped as numbers
        try:
            num = float(text)
        except ValueError:
            num = None
        if num is not None and math.isfinite(num):
            return Scalar(ScalarKind.NUMBER, num)
        if cfg.lowercase_compare:
            text = text.lower()
        return Scalar(ScalarKind.STRING, text)
    return s


def normalize(r: CanonResult, cfg: JudgeConfig) -> CanonResult:
    """Idempotent canonicalization applied to both sides before comparison."""
    if is_error(r):
        raise ValueError("normalize is undefined for error results")
    if isinstance(r, Scalar):
        return _normalize_scalar(r, cfg)
    if isinstance(r, ValueList):
        values = tuple(_normalize_scalar(s, cfg) for s in r.values)
        if len(values) == 1:
            return values[0]
        return ValueList(values)
    if isinstance(r, Series):
        values = tuple(_normalize_scalar(s, cfg) for s in r.values)
        if len(values) == 1:
            return values[0]
        index = tuple(_normalize_scalar(s, cfg) for s in r.index)
        return Series(values=values, index=index, name=r.name)
    if isinstance(r, Table):
        rows = tuple(tuple(_normalize_scalar(s, cfg) for s in row) for row in r.rows)
        if len(rows) == 1 and len(r.columns) == 1:
            return rows[0][0]
        return Table(columns=r.columns, rows=rows)
    raise TypeError(f"unexpected result type {type(r).__name__}")


def _numbers_equal(a: float, b: float, cfg: JudgeConfig) -> bool:
    if a == b:
        return True
    return abs(a - b) <= max(cfg.abs_tol, cfg.rel_tol * max(abs(a), abs(b)))


def scalar_equal(a: Scalar, b: Scalar, cfg: JudgeConfig) -> bool:
    if a.dtype is not b.dtype:
        return False
    if a.dtype is ScalarKind.NUMBER:
        return _numbers_equal(float(a.value), float(b.value), cfg)
    return a.value == b.value


def _sort_key(s: Scalar) -> tuple:
    rank = _RANK[s.dtype]
    if s.dtype is ScalarKind.NULL:
        return (rank, 0)
    if s.dtype is ScalarKind.NUMBER:
        return (rank, float(s.value))
    if s.dtype is ScalarKind.BOOL:
        return (rank, int(s.value))
    if s.dtype is ScalarKind.DATETIME:
        return (rank, s.value.isoformat())
    return (rank, s.value)


def sort_scalars(values: tuple[Scalar, ...]) -> list[Scalar]:
    return sorted(values, key=_sort_key)


def _sequences_equal(a: tuple[Scalar, ...], b: tuple[Scalar, ...], cfg: JudgeConfig) -> bool:
    if len(a) != len(b):
        return False
    return all(scalar_equal(x, y, cfg) for x, y in zip(a, b))


def _multisets_equal(a: tuple[Scalar, ...], b: tuple[Scalar, ...], cfg: JudgeConfig) -> bool:
    if len(a) != len(b):
        return False
    return _sequences_equal(tuple(sort_scalars(a)), tuple(sort_scalars(b)), cfg)


def strict_equal(a: CanonResult, b: CanonResult, cfg: JudgeConfig) -> bool:
    """Shape-aware equality on normalized results.

    Numbers compare within max(abs_tol, rel_tol * magnitude); value lists and
    table rows compare as multisets unless list_order_sensitive is set; a
    series compares by its value multiset with the index ignored.
    """
    if isinstance(a, Scalar) and isinstance(b, Scalar):
        return scalar_equal(a, b, cfg)
    if isinstance(a, ValueList) and isinstance(b, ValueList):
        if cfg.list_order_sensitive:
            return _sequences_equal(a.values, b.values, cfg)
        return _multisets_equal(a.values, b.values, cfg)
    if isinstance(a, Series) and isinstance(b, Series):
        if cfg.list_order_sensitive:
            return _sequences_equal(a.values, b.values, cfg)
        return _multisets_equal(a.values, b.values, cfg)
    if isinstance(a, Table) and isinstance(b, Table):
        if len(a.rows) != len(b.rows) or len(a.columns) != len(b.columns):
            return False
        def row_key(row: tuple[Scalar, ...]) -> tuple:
            return tuple(_sort_key(s) for s in row)
        rows_a = a.rows if cfg.list_order_sensitive else tuple(sorted(a.rows, key=row_key))
        rows_b = b.rows if cfg.list_order_sensitive else tuple(sorted(b.rows, key=row_key))
        return all(_sequences_equal(ra, rb, cfg) for ra, rb in zip(rows_a, rows_b))
    return False


def flatten(r: CanonResult) -> list[Scalar]:
    """Every cell value of any shape as a flat multiset; series contribute values only."""
    if is_error(r):
        raise ValueError("flatten is undefined for error results")
    if isinstance(r, Scalar):
        return [r]
    if isinstance(r, ValueList):
        return list(r.values)
    if isinstance(r, Series):
        return list(r.values)
    if isinstance(r, Table):
        return [s for row in r.rows for s in row]
    raise TypeError(f"unexpected result type {type(r).__name__}")


def _greedy_contains(pred: list[Scalar], truth: list[Scalar], cfg: JudgeConfig) -> tuple[int, bool]:
    """Match each ground-truth scalar to a distinct predicted scalar.

    Returns (matched count, all matched). Both sides are pre-sorted so the
    greedy pairing is deterministic.
    """
    pool = sort_scalars(tuple(pred))
    used = [False] * len(pool)
    matched = 0
    for t in sort_scalars(tuple(truth)):
        for i, p in enumerate(pool):
            if not used[i] and scalar_equal(t, p, cfg):
                used[i] = True
                matched += 1
                break
    return matched, matched == len(truth)


def _row_contains(pred: Table, truth: CanonResult, cfg: JudgeConfig) -> bool:
    """Row-level containment: the ground-truth values must co-occur within a
    single predicted row (or, for a table truth, each truth row must embed in
    some predicted row)."""
    truth_rows: list[list[Scalar]]
    if isinstance(truth, Table):
        truth_rows = [list(row) for row in truth.rows]
    else:
        truth_rows = [flatten(truth)]
    for trow in truth_rows:
        if not any(_greedy_contains(list(prow), trow, cfg)[1] for prow in pred.rows):
            return False
    return True


_ERROR_VERDICTS = {
    ErrorKind.REJECTED_UNSAFE: Verdict.REJECTED_UNSAFE,
    ErrorKind.TIMEOUT: Verdict.TIMEOUT,
    ErrorKind.RUNTIME_ERROR: Verdict.EXEC_ERROR,
    ErrorKind.NO_RESULT: Verdict.EXEC_ERROR,
    ErrorKind.RESOURCE_LIMIT: Verdict.EXEC_ERROR,
    ErrorKind.RESULT_TOO_LARGE: Verdict.EXEC_ERROR,
}


def judge(a_pred: CanonResult, a_true: CanonResult, cfg: JudgeConfig) -> Verdict:
    """Full verdict for one prediction against one ground truth.

    Ground truth must not be an error result; the caller decides how to
    handle un-executable references.
    """
    if is_error(a_true):
        raise ValueError("ground truth must not be an error result")
    if isinstance(a_pred, ExecError):
        return _ERROR_VERDICTS[a_pred.kind]

    pred = normalize(a_pred, cfg)
    truth = normalize(a_true, cfg)
    if strict_equal(pred, truth, cfg):
        return Verdict.CORRECT_STRICT

    if isinstance(pred, (ValueList, Series, Table)):
        if cfg.containment == "rows" and isinstance(pred, Table):
            if _row_contains(pred, truth, cfg):
                return Verdict.CORRECT_RELAXED
            matched, _ = _greedy_contains(flatten(pred), flatten(truth), cfg)
            return Verdict.NEEDS_REVIEW if matched > 0 else Verdict.INCORRECT
        matched, complete = _greedy_contains(flatten(pred), flatten(truth), cfg)
        if complete:
            return Verdict.CORRECT_RELAXED
        if matched > 0:
            return Verdict.NEEDS_REVIEW
    return Verdict.INCORRECT
