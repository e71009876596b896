"""WikiSQL release ingestion and the SQL logical-form oracle.

The public release encodes each question's SQL as a logical form: a selected
column, an aggregation code, and a conjunction of comparison conditions.
Executing that logical form against the ingested table produces the ground
truth answer for the corresponding task, so the evaluator here is the
reference semantics:

    agg codes   0 none, 1 max, 2 min, 3 count, 4 sum, 5 avg
    cond ops    0 eq, 1 gt, 2 lt

Ingestion turns release tables into DataTables: 'real' columns become float
(a column with any unparseable cell is demoted whole to string), 'text'
columns become string, and every string cell is lowercased and trimmed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .bundle import Bundle
from .model import (
    Cell,
    CoercionError,
    ColumnSpec,
    DataTable,
    Dtype,
    MitigationFlag,
    QType,
    Question,
    Scalar,
    SupplementarySpec,
    TableSchema,
    TaskInstance,
    ValueList,
    CanonResult,
    coerce_cell,
)


class IngestError(ValueError):
    pass


class OracleError(ValueError):
    pass


class Agg(str, Enum):
    NONE = "none"
    MAX = "max"
    MIN = "min"
    COUNT = "count"
    SUM = "sum"
    AVG = "avg"


class CondOp(str, Enum):
    EQ = "eq"
    GT = "gt"
    LT = "lt"


_AGG_CODES = {0: Agg.NONE, 1: Agg.MAX, 2: Agg.MIN, 3: Agg.COUNT, 4: Agg.SUM, 5: Agg.AVG}
_OP_CODES = {0: CondOp.EQ, 1: CondOp.GT, 2: CondOp.LT}


@dataclass(frozen=True)
class Condition:
    column: int
    op: CondOp
    value: Any


@dataclass(frozen=True)
class LogicalForm:
    sel: int
    agg: Agg = Agg.NONE
    conds: tuple[Condition, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "conds", tuple(self.conds))

    @classmethod
    def from_release(cls, sql: dict[str, Any]) -> "LogicalForm":
        conds = tuple(
            Condition(column=int(c[0]), op=_OP_CODES[int(c[1])], value=c[2])
            for c in sql.get("conds", [])
        )
        return cls(sel=int(sql["sel"]), agg=_AGG_CODES[int(sql["agg"])], conds=conds)

    def validate_against(self, schema: TableSchema) -> None:
        arity = len(schema.columns)
        if not 0 <= self.sel < arity:
            raise OracleError(f"sel index {self.sel} out of range for {arity} columns")
        for c in self.conds:
            if not 0 <= c.column < arity:
                raise OracleError(f"cond column {c.column} out of range for {arity} columns")


def lower_question(text: str) -> str:
    """Lowercase a question; idempotent by construction."""
    return text.lower()


def _dedupe_headers(headers: list[str]) -> list[str]:
    """Release tables occasionally repeat or blank a header; make names usable
    and pairwise distinct without touching column order."""
    seen: set[str] = set()
    out: list[str] = []
    for i, raw in enumerate(headers):
        name = str(raw).strip() or f"col_{i}"
        candidate = name
        suffix = 2
        while candidate in seen:
            candidate = f"{name}_{suffix}"
            suffix += 1
        seen.add(candidate)
        out.append(candidate)
    return out


def ingest_table(raw: dict[str, Any]) -> DataTable:
    """Transform one release table record into a DataTable.

    'real' columns parse to float; if any non-empty cell refuses to parse the
    whole column is demoted to string so column-typed comparisons stay
    coherent. All string cells come back lowercased and trimmed.
    """
    if "header" not in raw or not raw["header"]:
        raise IngestError("record has no header")
    headers = _dedupe_headers(list(raw["header"]))
    types = list(raw.get("types", ["text"] * len(headers)))
    if len(types) != len(headers):
        raise IngestError(f"{len(types)} type tags for {len(headers)} columns")
    rows = [list(r) for r in raw.get("rows", [])]
    for i, row in enumerate(rows):
        if len(row) != len(headers):
            raise IngestError(f"row {i}: arity {len(row)} != {len(headers)}")

    dtypes: list[Dtype] = []
    for c, tag in enumerate(types):
        if tag == "real":
            demoted = False
            for row in rows:
                cell = row[c]
                if cell is None:
                    continue
                if isinstance(cell, bool):
                    demoted = True
                    break
                if isinstance(cell, (int, float)):
                    continue
                try:
                    coerce_cell(str(cell), Dtype.FLOAT)
                except CoercionError:
                    demoted = True
                    break
            dtypes.append(Dtype.STRING if demoted else Dtype.FLOAT)
        else:
            dtypes.append(Dtype.STRING)

    out_rows: list[tuple[Cell, ...]] = []
    for row in rows:
        cells: list[Cell] = []
        for c, cell in enumerate(row):
            if cell is None:
                cells.append(None)
            elif dtypes[c] is Dtype.FLOAT:
                if isinstance(cell, (int, float)) and not isinstance(cell, bool):
                    cells.append(float(cell))
                else:
                    cells.append(coerce_cell(str(cell), Dtype.FLOAT))
            else:
                cells.append(coerce_cell(str(cell).lower(), Dtype.STRING))
        out_rows.append(tuple(cells))

    schema = TableSchema(
        table_id=str(raw.get("id", "table")),
        columns=tuple(ColumnSpec(name=n, dtype=d) for n, d in zip(headers, dtypes)),
    )
    return DataTable(schema=schema, rows=tuple(out_rows))


def _as_number(value: Any) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.replace(",", ""))
        except ValueError:
            return None
    return None


def _as_text(value: Any) -> str:
    return str(value).strip().lower()


def _cond_holds(cell: Cell, cond: Condition, notes: dict[str, int] | None = None) -> bool:
    if cell is None:
        return False
    if cond.op is CondOp.EQ:
        a, b = _as_number(cell), _as_number(cond.value)
        if a is not None and b is not None:
            return a == b
        return _as_text(cell) == _as_text(cond.value)
    a, b = _as_number(cell), _as_number(cond.value)
    if a is not None and b is not None:
        lhs, rhs = a, b
    else:
        if notes is not None:
            notes["lexicographic_comparisons"] = notes.get("lexicographic_comparisons", 0) + 1
        lhs, rhs = _as_text(cell), _as_text(cond.value)
    return lhs > rhs if cond.op is CondOp.GT else lhs < rhs


def eval_logical_form(lf: LogicalForm, table: DataTable,
                      notes: dict[str, int] | None = None) -> CanonResult:
    """Execute a logical form against a table, producing the ground truth.

    Follows SQL semantics on projected values: nulls drop out of aggregates,
    COUNT counts non-null values, and an aggregate over zero rows is null.
    max/min fall back to lexicographic order when any projected value is
    non-numeric; sum/avg over rows with no numeric operand raise OracleError.
    A notes dict, when supplied, accumulates how often comparisons fell back
    to lexicographic order (surfaced in bundle manifests).
    """
    lf.validate_against(table.schema)
    projected = [
        row[lf.sel]
        for row in table.rows
        if all(_cond_holds(row[c.column], c, notes) for c in lf.conds)
    ]

    if lf.agg is Agg.NONE:
        return ValueList(tuple(Scalar.of(v) for v in projected))
    if lf.agg is Agg.COUNT:
        return Scalar.of(sum(1 for v in projected if v is not None))

    operands = [v for v in projected if v is not None]
    if not operands:
        return Scalar.of(None)

    numbers = [_as_number(v) for v in operands]
    if lf.agg in (Agg.MAX, Agg.MIN):
        if all(n is not None for n in numbers):
            value = max(numbers) if lf.agg is Agg.MAX else min(numbers)  # type: ignore[type-var]
        else:
            if notes is not None:
                notes["lexicographic_comparisons"] = notes.get("lexicographic_comparisons", 0) + 1
            texts = [_as_text(v) for v in operands]
            value = max(texts) if lf.agg is Agg.MAX else min(texts)
        return Scalar.of(value)

    numeric = [n for n in numbers if n is not None]
    if not numeric:
        raise OracleError(f"{lf.agg.value} over non-numeric column {lf.sel}")
    total = 0.0
    for n in numeric:
        total += n
    if lf.agg is Agg.SUM:
        return Scalar.of(total)
    return Scalar.of(total / len(numeric))


def classify_qtype(lf: LogicalForm) -> QType:
    """Retrieval iff the logical form has no aggregation, else aggregation."""
    return QType.RETRIEVAL if lf.agg is Agg.NONE else QType.AGGREGATION


def read_jsonl(path: str | Path) -> Iterable[dict[str, Any]]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


DEFAULT_SUPPLEMENTARY = SupplementarySpec.from_flags(
    flags=(MitigationFlag.LOWERCASE_DIRECTIVE, MitigationFlag.NO_IMPORT_DIRECTIVE),
)


def build_bundle(
    raw_tables: Iterable[dict[str, Any]],
    raw_questions: Iterable[dict[str, Any]],
    limit: int | None = None,
    seed: int = 0,
    exclude_qids: set[str] | None = None,
    name: str = "wikisql",
) -> Bundle:
    """Assemble a task bundle from release-format records.

    Questions are lowercased, tables ingested, and ground truth precomputed by
    the logical-form oracle. When a limit is set, the subsample is drawn
    deterministically from the seed. Per-item failures never abort the build;
    they are recorded in the manifest with a reason.
    """
    exclude_qids = exclude_qids or set()
    tables: dict[str, DataTable] = {}
    skipped: list[dict[str, str]] = []
    table_errors: dict[str, str] = {}
    for raw in raw_tables:
        tid = str(raw.get("id", ""))
        try:
            tables[tid] = ingest_table(raw)
        except (IngestError, CoercionError) as e:
            table_errors[tid] = str(e)

    questions = list(raw_questions)
    indices = list(range(len(questions)))
    if limit is not None and limit < len(indices):
        rng = random.Random(seed)
        indices = sorted(rng.sample(indices, limit))

    tasks: list[TaskInstance] = []
    used_tables: dict[str, DataTable] = {}
    oracle_notes: dict[str, int] = {}
    for i in indices:
        record = questions[i]
        qid = str(record.get("qid", f"{name}-{i}"))
        if qid in exclude_qids:
            skipped.append({"qid": qid, "reason": "excluded by bad-item list"})
            continue
        tid = str(record.get("table_id", ""))
        table = tables.get(tid)
        if table is None:
            reason = table_errors.get(tid, f"unknown table {tid!r}")
            skipped.append({"qid": qid, "reason": f"table unavailable: {reason}"})
            continue
        try:
            lf = LogicalForm.from_release(record["sql"])
            answer = eval_logical_form(lf, table, notes=oracle_notes)
        except (OracleError, KeyError, ValueError) as e:
            skipped.append({"qid": qid, "reason": f"oracle failure: {e}"})
            continue
        question = Question(
            qid=qid,
            text=lower_question(str(record["question"])),
            qtype=classify_qtype(lf),
        )
        tasks.append(TaskInstance(question=question, table_id=tid, answer=answer))
        used_tables[tid] = table

    manifest = {
        "source": name,
        "selected": len(indices),
        "built": len(tasks),
        "skipped": skipped,
        "limit": limit,
        "seed": seed if limit is not None else None,
        "excluded_qids": sorted(exclude_qids),
        "oracle_notes": oracle_notes,
    }
    return Bundle(
        name=name,
        version="1",
        supplementary=DEFAULT_SUPPLEMENTARY,
        tables=used_tables,
        tasks=tasks,
        judge_config={"lowercase_compare": True},
        manifest=manifest,
    )
