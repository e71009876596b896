"""Sandboxed query execution.

The worker pool launches restricted executor processes (the dfqa-worker
package) and talks to them over newline-delimited JSON. Queries only see the
dataframe, pd/np/math, and a curated builtin subset; imports outside the
whitelist, dunder access, and OS surfaces are rejected before execution, and
the host kills anything that overruns the wall clock.
"""

from dfqa.model import (
    ColumnSpec,
    DataTable,
    Dtype,
    QueryText,
    TableSchema,
    result_to_dict,
)
from dfqa.sandbox import ExecRequest, Limits, WorkerPool

table = DataTable(
    TableSchema(
        "abalone",
        (
            ColumnSpec("Sex", Dtype.STRING),
            ColumnSpec("Shell_weight", Dtype.FLOAT),
            ColumnSpec("Rings", Dtype.INT),
        ),
    ),
    (("m", 0.25, 8), ("f", 0.375, 8), ("i", 0.125, 9), ("m", 0.5, 10)),
)

pool = WorkerPool(2)
try:
    for name, source, limits in [
        ("groupby mean", "result = df.groupby('Rings')['Shell_weight'].mean()", Limits()),
        ("trailing expression", "df['Shell_weight'].max()", Limits()),
        ("unsafe import", "import os\nresult = os.getcwd()", Limits()),
        ("dunder escape", "result = ().__class__.__mro__", Limits()),
        ("missing result", "x = 5", Limits()),
        ("infinite loop", "while True:\n    pass", Limits(wall_seconds=2)),
    ]:
        response = pool.execute(ExecRequest(f"demo-{name}", table, QueryText(source), limits))
        print(f"{name:20s} -> {result_to_dict(response.result)}")
finally:
    print("shutdown counters:", pool.shutdown())
