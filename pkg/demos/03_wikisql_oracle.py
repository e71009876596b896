"""WikiSQL ingestion and the logical-form oracle.

Release tables become typed DataTables (string cells lowercased, 'real'
columns parsed to float, unparseable columns demoted whole). Each question's
logical form executes against the table to produce the ground-truth answer.
"""

from dfqa.model import result_to_dict
from dfqa.wikisql import (
    Agg,
    CondOp,
    Condition,
    LogicalForm,
    build_bundle,
    classify_qtype,
    eval_logical_form,
    ingest_table,
)

raw_table = {
    "id": "demo-wrestlers",
    "header": ["Wrestler", "Reigns", "Combined days"],
    "types": ["text", "real", "real"],
    "rows": [
        ["Go Shiozaki", "3", "599"],
        ["Kenta Kobashi", "2", "735"],
        ["Mitsuharu Misawa", "4", "1,215"],
    ],
}
table = ingest_table(raw_table)
print("ingested rows:", table.rows)

lookup = LogicalForm(sel=2, conds=(Condition(0, CondOp.EQ, "go shiozaki"),))
print("combined days for go shiozaki:", result_to_dict(eval_logical_form(lookup, table)))

total = LogicalForm(sel=2, agg=Agg.SUM)
print("total combined days:", result_to_dict(eval_logical_form(total, table)))
print("qtype of the lookup:", classify_qtype(lookup).value)
print("qtype of the sum:", classify_qtype(total).value)

questions = [
    {"table_id": "demo-wrestlers", "question": "Who Held The Title Longest?",
     "sql": {"sel": 0, "agg": 0, "conds": [[2, 1, "700"]]}},
    {"table_id": "demo-wrestlers", "question": "How Many Wrestlers Are Listed?",
     "sql": {"sel": 0, "agg": 3, "conds": []}},
]
bundle = build_bundle([raw_table], questions, name="demo")
print(f"\nbundle: {len(bundle.tasks)} tasks; questions lowercased:")
for task in bundle.tasks:
    print(" ", task.question.qid, "->", task.question.text,
          "| ground truth:", result_to_dict(task.answer))
print("manifest:", bundle.manifest)
