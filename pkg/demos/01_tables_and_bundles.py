"""Tables, schemas, and task bundles.

A DataTable is a typed row-major cell store: it validates and serializes but
never computes. A task bundle is a directory of tables, tasks, and metadata;
the `uci-sample` mini-dataset ships with the package.
"""

from dfqa.datasets import load_uci_sample
from dfqa.model import (
    ColumnSpec,
    DataTable,
    Dtype,
    TableSchema,
    coerce_cell,
    table_to_dict,
    validate_table,
)

schema = TableSchema(
    "harbours",
    (
        ColumnSpec("name", Dtype.STRING),
        ColumnSpec("depth_m", Dtype.FLOAT, description="dredged depth"),
        ColumnSpec("berths", Dtype.INT),
    ),
)
table = DataTable(schema, (("waitemata", 12.5, 18), ("otago", 8.0, 9)))
print("violations on a well-formed table:", validate_table(table))

broken = DataTable(schema, (("lyttelton", "deep", 7),))
print("violations on a broken table:", validate_table(broken))

print("coerce '1,234' as float ->", coerce_cell("1,234", Dtype.FLOAT))
print("coerce '' as int        ->", coerce_cell("", Dtype.INT))

print("\nserialized table:")
print(table_to_dict(table))

bundle = load_uci_sample()
print(f"\nbundled dataset '{bundle.name}': {len(bundle.tasks)} tasks over {len(bundle.tables)} tables")
first = bundle.tasks[0]
print("first task:", first.question.qid, "->", first.question.text)
print("reference query:", first.reference_query.source)
