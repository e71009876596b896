"""UCI-style dataset construction: role-conditioned generation prompts,
parsing of generated pairs, automatic curation through the sandbox, and
ground-truth computation.

Curation never fully accepts a pair on its own. Pairs that fail to execute
are rejected with a machine reason (exec_error, disallowed_import,
empty_result); survivors are parked as needs_manual_review until a human
flips the review bit, which mirrors how the bundled `uci-sample` dataset was
assembled. The per-pair audit is written to ``curation.jsonl`` next to the
emitted bundle.
"""

from __future__ import annotations

import csv
import json
import re
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable

from .bundle import Bundle
from .model import (
    CanonResult,
    CoercionError,
    ColumnSpec,
    DataTable,
    Dtype,
    ExecError,
    QType,
    QueryText,
    Question,
    Role,
    Scalar,
    ScalarKind,
    Series,
    SupplementarySpec,
    Table,
    TableSchema,
    TaskInstance,
    ValueList,
    coerce_cell,
    is_error,
    result_to_dict,
)
from .prompts import lint_query
from .sandbox import ExecRequest, Limits, WorkerPool

# re-exported: generation prompts live with the other prompt builders
from .prompts import build_generation_prompt  # noqa: F401


class RejectionReason:
    EXEC_ERROR = "exec_error"
    DISALLOWED_IMPORT = "disallowed_import"
    EMPTY_RESULT = "empty_result"
    NEEDS_MANUAL_REVIEW = "needs_manual_review"


@dataclass(frozen=True)
class GeneratedPair:
    question: str
    query: QueryText
    role: Role
    keep: bool = True
    rejection_reason: str | None = None
    ground_truth: CanonResult | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        if self.keep == (self.rejection_reason is not None):
            raise ValueError("keep must be false exactly when a rejection reason is set")


_PAIR_RE = re.compile(
    r"^\s*\d+[.)]\s*(?:Question:)?\s*(?P<question>[^\n]+?)\s*\n"
    r"```[ \t]*\w*[ \t]*\n(?P<query>.*?)```",
    re.MULTILINE | re.DOTALL,
)


def parse_generated_pairs(llm_text: str, role: Role | str) -> tuple[list[GeneratedPair], int]:
    """Extract numbered question/query pairs from a generation completion.

    Returns (pairs, dropped) where dropped counts numbered blocks that did not
    parse. Never raises on malformed model output.
    """
    role = Role(role)
    pairs: list[GeneratedPair] = []
    numbered_blocks = len(re.findall(r"^\s*\d+[.)]\s", llm_text, re.MULTILINE))
    for match in _PAIR_RE.finditer(llm_text):
        question = match.group("question").strip()
        source = match.group("query").strip()
        if not question or not source:
            continue
        pairs.append(
            GeneratedPair(
                question=question,
                query=QueryText(source=source, lint=lint_query(source)),
                role=role,
            )
        )
    dropped = max(0, numbered_blocks - len(pairs))
    return pairs, dropped


def _result_is_empty(result: CanonResult) -> bool:
    if isinstance(result, Scalar):
        return result.dtype is ScalarKind.NULL
    if isinstance(result, ValueList):
        return len(result.values) == 0
    if isinstance(result, Series):
        return len(result.values) == 0
    if isinstance(result, Table):
        return len(result.rows) == 0
    return False


def compute_ground_truth(pair: GeneratedPair, table: DataTable, sandbox: WorkerPool,
                         limits: Limits = Limits()) -> CanonResult:
    """Execute the pair's reference query in the sandbox and return the
    canonical result (the ground-truth side of the comparison)."""
    response = sandbox.execute(
        ExecRequest(
            request_id=f"gt-{uuid.uuid4().hex[:12]}",
            table=table,
            query=pair.query,
            limits=limits,
        )
    )
    return response.result


def curate(pairs: Iterable[GeneratedPair], table: DataTable, sandbox: WorkerPool,
           limits: Limits = Limits()) -> list[GeneratedPair]:
    """Run automatic filters over generated pairs.

    Queries that fail safety vetting for imports are rejected as
    disallowed_import, other execution failures as exec_error, and pairs whose
    reference answer is empty as empty_result. Everything else survives with
    its ground truth attached, flagged needs_manual_review for a human pass.
    """
    curated: list[GeneratedPair] = []
    for pair in pairs:
        result = compute_ground_truth(pair, table, sandbox, limits)
        if is_error(result):
            assert isinstance(result, ExecError)
            if result.kind.value == "rejected_unsafe" and "import" in result.message.lower():
                reason = RejectionReason.DISALLOWED_IMPORT
            else:
                reason = RejectionReason.EXEC_ERROR
            curated.append(replace(pair, keep=False, rejection_reason=reason, ground_truth=result))
        elif _result_is_empty(result):
            curated.append(
                replace(pair, keep=False, rejection_reason=RejectionReason.EMPTY_RESULT, ground_truth=result)
            )
        else:
            curated.append(
                replace(
                    pair,
                    keep=False,
                    rejection_reason=RejectionReason.NEEDS_MANUAL_REVIEW,
                    ground_truth=result,
                )
            )
    return curated


def approve(pair: GeneratedPair) -> GeneratedPair:
    """Flip the review bit on a pair that survived automatic curation."""
    if pair.rejection_reason != RejectionReason.NEEDS_MANUAL_REVIEW:
        raise ValueError(f"only needs_manual_review pairs can be approved, got {pair.rejection_reason!r}")
    return replace(pair, keep=True, rejection_reason=None)


_AGG_CALL_RE = re.compile(
    r"\.(sum|mean|count|min|max|median|nunique|size|std|var)\s*\(\s*\)"
)
_ANALYSIS_HINTS = ("groupby", "corr", "sort_values", "nlargest", "nsmallest",
                   "value_counts", "agg", "pivot", "apply", "cut", "rolling")


def classify_pair_qtype(query: QueryText) -> QType:
    """Heuristic complexity label for a generated pair, overridable per pair:
    multi-step or grouped queries are data_analysis, a single aggregation call
    is aggregation, plain filter/projection is retrieval."""
    source = query.source
    statements = [s for s in re.split(r"[;\n]", source) if s.strip()]
    if len(statements) > 1 or any(h in source for h in _ANALYSIS_HINTS):
        return QType.DATA_ANALYSIS
    if _AGG_CALL_RE.search(source):
        return QType.AGGREGATION
    return QType.RETRIEVAL


def role_distribution(tasks: Iterable[TaskInstance]) -> dict[str, dict[str, int]]:
    """Counts of retrieval/aggregation vs data_analysis per role."""
    out: dict[str, dict[str, int]] = {}
    for task in tasks:
        role = task.question.role.value if task.question.role else "unspecified"
        bucket = out.setdefault(role, {"retrieval_aggregation": 0, "data_analysis": 0})
        if task.question.qtype is QType.DATA_ANALYSIS:
            bucket["data_analysis"] += 1
        else:
            bucket["retrieval_aggregation"] += 1
    return out


def import_csv(
    path: str | Path,
    table_id: str | None = None,
    dtype_overrides: dict[str, str] | None = None,
) -> DataTable:
    """Import a user CSV as a DataTable: header row plus inferred dtypes.

    Inference tries int, then float, then bool per column and falls back to
    string; empty cells are null. The override map forces a column's dtype
    (values from the dtype enum), which is also the only way to get datetime
    columns.
    """
    src = Path(path)
    overrides = {k: Dtype(v) for k, v in (dtype_overrides or {}).items()}
    with open(src, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{src} is empty")
    header, data = rows[0], rows[1:]

    def infer(col: int) -> Dtype:
        name = header[col]
        if name in overrides:
            return overrides[name]
        values = [r[col] for r in data if col < len(r) and r[col].strip()]
        if not values:
            return Dtype.STRING
        for dtype in (Dtype.INT, Dtype.FLOAT, Dtype.BOOL):
            try:
                for v in values:
                    coerce_cell(v, dtype)
                return dtype
            except CoercionError:
                continue
        return Dtype.STRING

    dtypes = [infer(i) for i in range(len(header))]
    schema = TableSchema(
        table_id=table_id or src.stem,
        columns=tuple(ColumnSpec(name=n, dtype=d) for n, d in zip(header, dtypes)),
    )
    out_rows = []
    for r in data:
        padded = list(r) + [""] * (len(header) - len(r))
        out_rows.append(tuple(coerce_cell(v, d) for v, d in zip(padded, dtypes)))
    return DataTable(schema=schema, rows=tuple(out_rows))


def pair_to_audit(pair: GeneratedPair) -> dict[str, Any]:
    return {
        "question": pair.question,
        "query": pair.query.source,
        "lint": [f.value for f in pair.query.lint],
        "role": pair.role.value,
        "keep": pair.keep,
        "rejection_reason": pair.rejection_reason,
        "ground_truth": result_to_dict(pair.ground_truth) if pair.ground_truth is not None else None,
    }


def write_curation_audit(pairs: Iterable[GeneratedPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(pair_to_audit(pair), ensure_ascii=False, sort_keys=True) + "\n")


def pairs_to_bundle(
    pairs_by_table: dict[str, tuple[DataTable, list[GeneratedPair]]],
    name: str,
    supplementary: SupplementarySpec,
    judge_config: dict[str, Any] | None = None,
    qid_prefix: str | None = None,
) -> Bundle:
    """Assemble approved pairs into a task bundle with precomputed answers."""
    prefix = qid_prefix or name
    tables: dict[str, DataTable] = {}
    tasks: list[TaskInstance] = []
    i = 0
    for table_id, (table, pairs) in pairs_by_table.items():
        kept = [p for p in pairs if p.keep]
        if not kept:
            continue
        tables[table_id] = table
        for pair in kept:
            i += 1
            if pair.ground_truth is None or is_error(pair.ground_truth):
                raise ValueError(f"pair {pair.question!r} has no usable ground truth")
            tasks.append(
                TaskInstance(
                    question=Question(
                        qid=f"{prefix}-{i:03d}",
                        text=pair.question,
                        role=pair.role,
                        qtype=classify_pair_qtype(pair.query),
                    ),
                    table_id=table_id,
                    answer=pair.ground_truth,
                )
            )
    return Bundle(
        name=name,
        version="1",
        supplementary=supplementary,
        tables=tables,
        tasks=tasks,
        judge_config=judge_config or {},
    )
