"""Schema-only DataFrame QA: prompt construction, sandboxed query execution,
and execution-based evaluation over tabular question answering tasks."""

from .model import (
    CanonResult,
    ColumnSpec,
    DataTable,
    Dtype,
    ExecError,
    MitigationFlag,
    QType,
    QueryText,
    Question,
    Role,
    Scalar,
    Series,
    SupplementarySpec,
    Table,
    TableSchema,
    TaskInstance,
    ValueList,
    Verdict,
    coerce_cell,
    validate_table,
)

__version__ = "0.1.0"

__all__ = [
    "CanonResult",
    "ColumnSpec",
    "DataTable",
    "Dtype",
    "ExecError",
    "MitigationFlag",
    "QType",
    "QueryText",
    "Question",
    "Role",
    "Scalar",
    "Series",
    "SupplementarySpec",
    "Table",
    "TableSchema",
    "TaskInstance",
    "ValueList",
    "Verdict",
    "coerce_cell",
    "validate_table",
    "__version__",
]
