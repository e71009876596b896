"""Shared data model: schemas, tables, questions, queries, canonical results, verdicts.

Everything here is an immutable value object. Tables are plain row-major cell
stores; they support storage, validation, and serialization only (no compute).
The JSON encodings defined at the bottom of this module are the contract for
both the on-disk task bundle format and the executor wire protocol, so field
names and cell encodings must not drift.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Union


class Dtype(str, Enum):
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    BOOL = "bool"
    DATETIME = "datetime"


Cell = Union[int, float, str, bool, datetime, None]


class ModelError(ValueError):
    """Base class for invariant violations raised at construction time."""


class CoercionError(ModelError):
    """Raised when a non-empty raw string cannot be parsed as the target dtype."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    dtype: Dtype
    description: str | None = None
    format_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.name or not self.name.strip():
            raise ModelError("column name must be non-empty")
        object.__setattr__(self, "dtype", Dtype(self.dtype))


@dataclass(frozen=True)
class TableSchema:
    table_id: str
    columns: tuple[ColumnSpec, ...]
    notes: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(self.columns) == 0:
            raise ModelError("schema must have at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ModelError(f"duplicate column names: {dupes}")

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


def _cell_matches(value: Cell, dtype: Dtype) -> bool:
    if value is None:
        return True
    if dtype is Dtype.BOOL:
        return isinstance(value, bool)
    if dtype is Dtype.INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if dtype is Dtype.FLOAT:
        return isinstance(value, float)
    if dtype is Dtype.STRING:
        return isinstance(value, str)
    if dtype is Dtype.DATETIME:
        return isinstance(value, datetime)
    return False


@dataclass(frozen=True)
class DataTable:
    schema: TableSchema
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    @property
    def table_id(self) -> str:
        return self.schema.table_id

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.schema.columns):
            if col.name == name:
                return i
        raise KeyError(name)


def validate_table(t: DataTable) -> list[str]:
    """Check every DataTable invariant; returns one description per violation.

    Total function: never raises. An empty list means the table is well formed.
    """
    violations: list[str] = []
    arity = len(t.schema.columns)
    for r, row in enumerate(t.rows):
        if len(row) != arity:
            violations.append(f"row {r}: arity {len(row)} != {arity}")
            continue
        for c, (cell, col) in enumerate(zip(row, t.schema.columns)):
            if not _cell_matches(cell, col.dtype):
                violations.append(
                    f"row {r}, column '{col.name}': {type(cell).__name__} value "
                    f"{cell!r} does not match dtype {col.dtype.value}"
                )
    return violations


_THOUSANDS_RE = re.compile(r",")

_TRUE_WORDS = {"true", "t", "1", "yes", "y"}
_FALSE_WORDS = {"false", "f", "0", "no", "n"}


def coerce_cell(raw: str, dtype: Dtype) -> Cell:
    """Parse one raw text cell into a typed scalar.

    Empty or whitespace-only input maps to null for every dtype. Numeric
    parsing strips thousands separators ("1,234" -> 1234.0). Strings come
    back trimmed. Non-finite float parses (inf, nan) map to null so every
    cell survives JSON serialization.
    """
    dtype = Dtype(dtype)
    text = raw.strip()
    if not text:
        return None
    if dtype is Dtype.STRING:
        return text
    if dtype is Dtype.INT:
        cleaned = _THOUSANDS_RE.sub("", text)
        try:
            return int(cleaned)
        except ValueError:
            raise CoercionError(f"cannot parse {raw!r} as int") from None
    if dtype is Dtype.FLOAT:
        cleaned = _THOUSANDS_RE.sub("", text)
        try:
            value = float(cleaned)
        except ValueError:
            raise CoercionError(f"cannot parse {raw!r} as float") from None
        return value if math.isfinite(value) else None
    if dtype is Dtype.BOOL:
        lowered = text.lower()
        if lowered in _TRUE_WORDS:
            return True
        if lowered in _FALSE_WORDS:
            return False
        raise CoercionError(f"cannot parse {raw!r} as bool")
    if dtype is Dtype.DATETIME:
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        try:
            return datetime.fromisoformat(iso)
        except ValueError:
            raise CoercionError(f"cannot parse {raw!r} as datetime") from None
    raise CoercionError(f"unknown dtype {dtype!r}")


class MitigationFlag(str, Enum):
    QUOTE_VALUES = "quote_values"
    COLUMN_DESCRIPTIONS = "column_descriptions"
    DATE_FORMAT_HINTS = "date_format_hints"
    NO_IMPORT_DIRECTIVE = "no_import_directive"
    LOWERCASE_DIRECTIVE = "lowercase_directive"


LOWERCASE_ASSUMPTION = "all strings in the dataframe are lowercase"
NO_IMPORT_CONSTRAINT = "do not import any libraries; pandas is pre-imported as `pd`"
RESULT_CONSTRAINT = "assign the final answer to a variable named `result`"


@dataclass(frozen=True)
class SupplementarySpec:
    assumptions: tuple[str, ...] = ()
    constraints: tuple[str, ...] = ()
    mitigation_flags: frozenset[MitigationFlag] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(
            self,
            "mitigation_flags",
            frozenset(MitigationFlag(f) for f in self.mitigation_flags),
        )

    @classmethod
    def from_flags(
        cls,
        flags: Iterable[MitigationFlag | str] = (),
        extra_assumptions: Iterable[str] = (),
        extra_constraints: Iterable[str] = (),
    ) -> "SupplementarySpec":
        """Build a spec whose assumption/constraint lines derive deterministically
        from the flag set. The `result` assignment convention is always present."""
        flagset = frozenset(MitigationFlag(f) for f in flags)
        assumptions = list(extra_assumptions)
        constraints = [RESULT_CONSTRAINT] + list(extra_constraints)
        if MitigationFlag.LOWERCASE_DIRECTIVE in flagset:
            assumptions.insert(0, LOWERCASE_ASSUMPTION)
        if MitigationFlag.NO_IMPORT_DIRECTIVE in flagset:
            constraints.insert(0, NO_IMPORT_CONSTRAINT)
        return cls(tuple(assumptions), tuple(constraints), flagset)


class Role(str, Enum):
    DATA_SCIENTIST = "data_scientist"
    GENERAL_USER = "general_user"
    DATA_OWNER = "data_owner"


class QType(str, Enum):
    RETRIEVAL = "retrieval"
    AGGREGATION = "aggregation"
    DATA_ANALYSIS = "data_analysis"


@dataclass(frozen=True)
class Question:
    qid: str
    text: str
    role: Role | None = None
    qtype: QType | None = None

    def __post_init__(self) -> None:
        if self.role is not None:
            object.__setattr__(self, "role", Role(self.role))
        if self.qtype is not None:
            object.__setattr__(self, "qtype", QType(self.qtype))


class LintFinding(str, Enum):
    HAS_IMPORT = "has_import"
    HAS_COMMENTS = "has_comments"
    MISSING_RESULT_ASSIGNMENT = "missing_result_assignment"


@dataclass(frozen=True)
class QueryText:
    source: str
    lint: tuple[LintFinding, ...] = ()

    def __post_init__(self) -> None:
        if not self.source:
            raise ModelError("query source must be non-empty")
        object.__setattr__(self, "lint", tuple(LintFinding(f) for f in self.lint))


# --- canonical result taxonomy -------------------------------------------------

class ScalarKind(str, Enum):
    NUMBER = "number"
    STRING = "string"
    BOOL = "bool"
    NULL = "null"
    DATETIME = "datetime"


class ErrorKind(str, Enum):
    REJECTED_UNSAFE = "rejected_unsafe"
    RUNTIME_ERROR = "runtime_error"
    NO_RESULT = "no_result"
    TIMEOUT = "timeout"
    RESOURCE_LIMIT = "resource_limit"
    RESULT_TOO_LARGE = "result_too_large"


@dataclass(frozen=True)
class Scalar:
    dtype: ScalarKind
    value: Any = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dtype", ScalarKind(self.dtype))
        v = self.value
        k = self.dtype
        if k is ScalarKind.NULL:
            if v is not None:
                raise ModelError("null scalar must carry value None")
        elif k is ScalarKind.NUMBER:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelError(f"number scalar got {type(v).__name__}")
            if isinstance(v, float) and not math.isfinite(v):
                raise ModelError("number scalar must be finite")
        elif k is ScalarKind.STRING:
            if not isinstance(v, str):
                raise ModelError(f"string scalar got {type(v).__name__}")
        elif k is ScalarKind.BOOL:
            if not isinstance(v, bool):
                raise ModelError(f"bool scalar got {type(v).__name__}")
        elif k is ScalarKind.DATETIME:
            if not isinstance(v, datetime):
                raise ModelError(f"datetime scalar got {type(v).__name__}")

    @classmethod
    def of(cls, value: Cell) -> "Scalar":
        """Wrap a plain cell, deriving the scalar kind; non-finite numbers become null."""
        if value is None:
            return cls(ScalarKind.NULL, None)
        if isinstance(value, bool):
            return cls(ScalarKind.BOOL, value)
        if isinstance(value, (int, float)):
            if isinstance(value, float) and not math.isfinite(value):
                return cls(ScalarKind.NULL, None)
            return cls(ScalarKind.NUMBER, value)
        if isinstance(value, str):
            return cls(ScalarKind.STRING, value)
        if isinstance(value, datetime):
            return cls(ScalarKind.DATETIME, value)
        raise ModelError(f"unsupported scalar value {type(value).__name__}")


@dataclass(frozen=True)
class ValueList:
    values: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class Series:
    values: tuple[Scalar, ...]
    index: tuple[Scalar, ...]
    name: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "index", tuple(self.index))
        if len(self.values) != len(self.index):
            raise ModelError(
                f"series index length {len(self.index)} != values length {len(self.values)}"
            )


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[Scalar, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        arity = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != arity:
                raise ModelError(f"table row {i} has arity {len(row)} != {arity}")


@dataclass(frozen=True)
class ExecError:
    kind: ErrorKind
    message: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ErrorKind(self.kind))


CanonResult = Union[Scalar, ValueList, Series, Table, ExecError]


def is_error(r: CanonResult) -> bool:
    return isinstance(r, ExecError)


class Verdict(str, Enum):
    CORRECT_STRICT = "correct_strict"
    CORRECT_RELAXED = "correct_relaxed"
    INCORRECT = "incorrect"
    NEEDS_REVIEW = "needs_review"
    EXEC_ERROR = "exec_error"
    REJECTED_UNSAFE = "rejected_unsafe"
    TIMEOUT = "timeout"


CORRECT_VERDICTS = frozenset({Verdict.CORRECT_STRICT, Verdict.CORRECT_RELAXED})


@dataclass(frozen=True)
class TaskInstance:
    question: Question
    table_id: str
    reference_query: QueryText | None = None
    answer: CanonResult | None = None

    def __post_init__(self) -> None:
        if (self.reference_query is None) == (self.answer is None):
            raise ModelError(
                "ground truth must be exactly one of reference_query or answer"
            )


# --- JSON encoding -------------------------------------------------------------
#
# Cells encode as JSON scalars; datetimes are ISO-8601 strings tagged
# {"$dt": "..."} so they stay distinguishable from plain strings.

def encode_cell(value: Cell) -> Any:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, datetime):
        return {"$dt": value.isoformat()}
    raise ModelError(f"cannot encode cell of type {type(value).__name__}")


def decode_cell(obj: Any, dtype: Dtype | None = None) -> Cell:
    """Decode one JSON cell; when a column dtype is given, numeric cells are
    coerced to it so int/float round-trips stay stable."""
    if obj is None:
        return None
    if isinstance(obj, dict):
        if set(obj.keys()) == {"$dt"}:
            return datetime.fromisoformat(obj["$dt"])
        raise ModelError(f"unrecognized cell object {obj!r}")
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (int, float)):
        if dtype is Dtype.FLOAT:
            return float(obj)
        if dtype is Dtype.INT:
            return int(obj)
        return obj
    if isinstance(obj, str):
        return obj
    raise ModelError(f"unrecognized cell {obj!r}")


def column_to_dict(col: ColumnSpec) -> dict[str, Any]:
    d: dict[str, Any] = {"name": col.name, "dtype": col.dtype.value}
    if col.description is not None:
        d["description"] = col.description
    if col.format_hint is not None:
        d["format_hint"] = col.format_hint
    return d


def column_from_dict(d: dict[str, Any]) -> ColumnSpec:
    return ColumnSpec(
        name=d["name"],
        dtype=Dtype(d["dtype"]),
        description=d.get("description"),
        format_hint=d.get("format_hint"),
    )


def schema_to_dict(schema: TableSchema) -> dict[str, Any]:
    d: dict[str, Any] = {
        "table_id": schema.table_id,
        "columns": [column_to_dict(c) for c in schema.columns],
    }
    if schema.notes is not None:
        d["notes"] = schema.notes
    return d


def schema_from_dict(d: dict[str, Any]) -> TableSchema:
    return TableSchema(
        table_id=d["table_id"],
        columns=tuple(column_from_dict(c) for c in d["columns"]),
        notes=d.get("notes"),
    )


def table_to_dict(t: DataTable) -> dict[str, Any]:
    return {
        "schema": schema_to_dict(t.schema),
        "rows": [[encode_cell(c) for c in row] for row in t.rows],
    }


def table_from_dict(d: dict[str, Any]) -> DataTable:
    schema = schema_from_dict(d["schema"])
    dtypes = [c.dtype for c in schema.columns]
    rows = tuple(
        tuple(decode_cell(cell, dt) for cell, dt in zip(row, dtypes))
        for row in d["rows"]
    )
    return DataTable(schema=schema, rows=rows)


def table_to_wire(t: DataTable) -> dict[str, Any]:
    """Wire-protocol table payload: column names and dtypes only, plus rows."""
    return {
        "columns": [{"name": c.name, "dtype": c.dtype.value} for c in t.schema.columns],
        "rows": [[encode_cell(c) for c in row] for row in t.rows],
    }


def scalar_to_obj(s: Scalar) -> Any:
    return encode_cell(s.value)


def scalar_from_obj(obj: Any) -> Scalar:
    return Scalar.of(decode_cell(obj))


def result_to_dict(r: CanonResult) -> dict[str, Any]:
    if isinstance(r, Scalar):
        return {"kind": "scalar", "value": scalar_to_obj(r)}
    if isinstance(r, ValueList):
        return {"kind": "list", "values": [scalar_to_obj(s) for s in r.values]}
    if isinstance(r, Series):
        return {
            "kind": "series",
            "name": r.name,
            "index": [scalar_to_obj(s) for s in r.index],
            "values": [scalar_to_obj(s) for s in r.values],
        }
    if isinstance(r, Table):
        return {
            "kind": "table",
            "columns": list(r.columns),
            "rows": [[scalar_to_obj(s) for s in row] for row in r.rows],
        }
    if isinstance(r, ExecError):
        return {"kind": "error", "error_kind": r.kind.value, "message": r.message}
    raise ModelError(f"cannot encode result of type {type(r).__name__}")


def result_from_dict(d: dict[str, Any]) -> CanonResult:
    kind = d.get("kind")
    if kind == "scalar":
        return scalar_from_obj(d["value"])
    if kind == "list":
        return ValueList(tuple(scalar_from_obj(v) for v in d["values"]))
    if kind == "series":
        return Series(
            values=tuple(scalar_from_obj(v) for v in d["values"]),
            index=tuple(scalar_from_obj(v) for v in d["index"]),
            name=d.get("name"),
        )
    if kind == "table":
        return Table(
            columns=tuple(d["columns"]),
            rows=tuple(tuple(scalar_from_obj(v) for v in row) for row in d["rows"]),
        )
    if kind == "error":
        return ExecError(ErrorKind(d["error_kind"]), d.get("message", ""))
    raise ModelError(f"unrecognized result kind {kind!r}")


def query_to_dict(q: QueryText) -> dict[str, Any]:
    return {"source": q.source, "lint": [f.value for f in q.lint]}


def query_from_dict(d: dict[str, Any]) -> QueryText:
    return QueryText(source=d["source"], lint=tuple(LintFinding(f) for f in d.get("lint", [])))


def question_to_dict(q: Question) -> dict[str, Any]:
    d: dict[str, Any] = {"qid": q.qid, "text": q.text}
    if q.role is not None:
        d["role"] = q.role.value
    if q.qtype is not None:
        d["qtype"] = q.qtype.value
    return d


def question_from_dict(d: dict[str, Any]) -> Question:
    return Question(
        qid=d["qid"],
        text=d["text"],
        role=Role(d["role"]) if d.get("role") else None,
        qtype=QType(d["qtype"]) if d.get("qtype") else None,
    )


def task_to_dict(t: TaskInstance) -> dict[str, Any]:
    gt: dict[str, Any]
    if t.reference_query is not None:
        gt = {"reference_query": query_to_dict(t.reference_query)}
    else:
        gt = {"answer": result_to_dict(t.answer)}  # type: ignore[arg-type]
    return {
        "question": question_to_dict(t.question),
        "table_id": t.table_id,
        "ground_truth": gt,
    }


def task_from_dict(d: dict[str, Any]) -> TaskInstance:
    gt = d["ground_truth"]
    return TaskInstance(
        question=question_from_dict(d["question"]),
        table_id=d["table_id"],
        reference_query=query_from_dict(gt["reference_query"]) if "reference_query" in gt else None,
        answer=result_from_dict(gt["answer"]) if "answer" in gt else None,
    )


def supplementary_to_dict(s: SupplementarySpec) -> dict[str, Any]:
    return {
        "assumptions": list(s.assumptions),
        "constraints": list(s.constraints),
        "mitigation_flags": sorted(f.value for f in s.mitigation_flags),
    }


def supplementary_from_dict(d: dict[str, Any]) -> SupplementarySpec:
    return SupplementarySpec(
        assumptions=tuple(d.get("assumptions", [])),
        constraints=tuple(d.get("constraints", [])),
        mitigation_flags=frozenset(
            MitigationFlag(f) for f in d.get("mitigation_flags", [])
        ),
    )


def dumps(obj: dict[str, Any]) -> str:
    """Canonical single-line JSON used for every jsonl artifact this package writes."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
