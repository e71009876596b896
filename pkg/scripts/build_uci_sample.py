#!/usr/bin/env python3
"""Regenerate the bundled `uci-sample` mini-dataset.

Defines the fixture tables and question/query pairs, executes every reference
query through the real sandbox worker to verify it runs and returns a
non-empty answer, then writes the bundle (tasks keep reference-query ground
truth so evaluation exercises the live executor path) plus the curation audit
with the computed answers.

Usage: python scripts/build_uci_sample.py [out_dir]
"""

from __future__ import annotations

import sys
import uuid

from dfqa.bundle import Bundle, write_bundle
from dfqa.model import (
    ColumnSpec,
    DataTable,
    Dtype,
    MitigationFlag,
    Question,
    QueryText,
    Role,
    SupplementarySpec,
    TableSchema,
    TaskInstance,
    is_error,
)
from dfqa.prompts import lint_query
from dfqa.sandbox import ExecRequest, WorkerPool
from dfqa.uci import GeneratedPair, RejectionReason, classify_pair_qtype, write_curation_audit
from dataclasses import replace

S, F, I = Dtype.STRING, Dtype.FLOAT, Dtype.INT


def table(table_id: str, cols: list[tuple[str, Dtype]], rows: list[tuple]) -> DataTable:
    schema = TableSchema(table_id, tuple(ColumnSpec(n, d) for n, d in cols))
    typed = []
    for row in rows:
        typed.append(tuple(
            float(v) if d is F and v is not None else v
            for v, (_, d) in zip(row, cols)
        ))
    return DataTable(schema, tuple(typed))


TABLES = [
    table("nz_electorates",
          [("Electorate", S), ("Province", S), ("Formed", F)],
          [("bay of islands", "auckland", 1853),
           ("grey and bell", "taranaki", 1871),
           ("christchurch", "canterbury", 1853),
           ("dunedin", "otago", 1853),
           ("wellington", "wellington", 1853),
           ("nelson", "nelson", 1853),
           ("invercargill", "southland", 1866),
           ("mount herbert", "canterbury", 1871)]),
    table("wrestlers",
          [("Wrestler", S), ("Reigns", I), ("Combined days", F)],
          [("go shiozaki", 3, 599),
           ("kenta kobashi", 2, 735),
           ("mitsuharu misawa", 4, 1215),
           ("takeshi morishima", 2, 355),
           ("jun akiyama", 3, 512),
           ("naomichi marufuji", 2, 430)]),
    table("abalone",
          [("Sex", S), ("Length", F), ("Diameter", F), ("Height", F),
           ("Shell_weight", F), ("Rings", I)],
          [("m", 0.5, 0.375, 0.125, 0.25, 8),
           ("f", 0.625, 0.5, 0.125, 0.375, 8),
           ("i", 0.25, 0.1875, 0.0625, 0.125, 9),
           ("m", 0.75, 0.5, 0.25, 0.5, 10),
           ("f", 0.5, 0.375, 0.1875, 0.375, 10),
           ("i", 0.375, 0.25, 0.125, 0.1875, 9)]),
    table("auto_mpg",
          [("car_name", S), ("mpg", F), ("cylinders", I), ("weight", F), ("model_year", I)],
          [("chevrolet chevelle malibu", 18.0, 8, 3504, 70),
           ("buick skylark 320", 15.0, 8, 3693, 70),
           ("plymouth satellite", 18.0, 6, 3436, 70),
           ("toyota corona", 24.0, 4, 2372, 71),
           ("ford pinto", 25.0, 4, 2046, 71),
           ("datsun 510", 27.0, 4, 2288, 72),
           ("vw beetle", 26.0, 4, 1835, 72),
           ("amc matador", 15.5, 8, 3892, 72)]),
    table("breast_cancer",
          [("Class", S), ("age", S), ("tumor-size", S)],
          [("recurrence-events", "40-49", "25-29"),
           ("no-recurrence-events", "50-59", "20-24"),
           ("recurrence-events", "50-59", "30-34"),
           ("no-recurrence-events", "40-49", "20-24"),
           ("recurrence-events", "60-69", "25-29"),
           ("no-recurrence-events", "50-59", "25-29"),
           ("no-recurrence-events", "30-39", "15-19"),
           ("recurrence-events", "50-59", "25-29")]),
]

GU, DS, DO = Role.GENERAL_USER, Role.DATA_SCIENTIST, Role.DATA_OWNER

# (table_id, role, question, reference query)
PAIRS: list[tuple[str, Role, str, str]] = [
    # published sample pairs
    ("nz_electorates", GU, "which province is bay of islands in?",
     "result = df.loc[df['Electorate']=='bay of islands', 'Province'].iloc[0]"),
    ("wrestlers", GU, "how many combined days did go shiozaki have?",
     "result = df.loc[df['Wrestler']=='go shiozaki', 'Combined days'].values[0]"),
    ("abalone", DS, "how does the average shell weight vary across different numbers of rings?",
     "result = df.groupby('Rings')['Shell_weight'].mean()"),
    ("abalone", DS, "can you create a new column 'volume' as a product of length, diameter, and height, then find the average volume for each sex?",
     "df['Volume'] = df['Length'] * df['Diameter'] * df['Height']\nresult = df.groupby('Sex')['Volume'].mean()"),
    ("auto_mpg", DS, "how has the average weight of cars changed over the model years?",
     "result = df.groupby('model_year')['weight'].mean()"),
    ("breast_cancer", DS, "what is the distribution of tumor size for cases with recurrence events?",
     "result = df[df['Class'] == 'recurrence-events']['tumor-size'].value_counts()"),
    ("auto_mpg", GU, "which cars have more than 6 cylinders?",
     "result = df[df['cylinders'] > 6]"),
    ("breast_cancer", GU, "what is the most common tumor size observed in the data?",
     "result = df['tumor-size'].mode()[0]"),
    ("auto_mpg", DO, "what are the names of the cars with the top 3 highest fuel efficiencies in our dataset?",
     "result = df.nlargest(3, 'mpg')['car_name']"),
    ("breast_cancer", DO, "what is the frequency of tumor sizes in the age group 50-59?",
     "result = df[df['age'] == '50-59']['tumor-size'].value_counts()"),
    # same-style variants over the same tables
    ("nz_electorates", GU, "which electorate is in the province of taranaki?",
     "result = df.loc[df['Province']=='taranaki', 'Electorate'].iloc[0]"),
    ("nz_electorates", DO, "how many electorates were formed in 1853?",
     "result = (df['Formed'] == 1853).sum()"),
    ("nz_electorates", GU, "which provinces appear in the data?",
     "result = df['Province'].unique()"),
    ("nz_electorates", GU, "what is the earliest formation year?",
     "result = df['Formed'].min()"),
    ("nz_electorates", DO, "how many electorates does each province have?",
     "result = df.groupby('Province')['Electorate'].count()"),
    ("wrestlers", GU, "which wrestler had the most combined days?",
     "result = df.loc[df['Combined days'].idxmax(), 'Wrestler']"),
    ("wrestlers", DO, "what is the total number of reigns across all wrestlers?",
     "result = df['Reigns'].sum()"),
    ("wrestlers", DS, "what is the average number of combined days for each reign count?",
     "result = df.groupby('Reigns')['Combined days'].mean()"),
    ("wrestlers", DO, "how many wrestlers had more than 2 reigns?",
     "result = (df['Reigns'] > 2).sum()"),
    ("wrestlers", GU, "which wrestlers held the title for more than 500 combined days?",
     "result = df[df['Combined days'] > 500]['Wrestler']"),
    ("abalone", DS, "what is the average shell weight for each sex?",
     "result = df.groupby('Sex')['Shell_weight'].mean()"),
    ("abalone", GU, "how many abalone have more than 8 rings?",
     "result = (df['Rings'] > 8).sum()"),
    ("abalone", GU, "what is the maximum length observed?",
     "result = df['Length'].max()"),
    ("abalone", DS, "what is the correlation between length and shell weight?",
     "result = df['Length'].corr(df['Shell_weight'])"),
    ("abalone", DO, "which sex has the highest average height?",
     "result = df.groupby('Sex')['Height'].mean().idxmax()"),
    ("auto_mpg", GU, "what is the average mpg of cars with 4 cylinders?",
     "result = df[df['cylinders'] == 4]['mpg'].mean()"),
    ("auto_mpg", DO, "how many cars are there for each model year?",
     "result = df.groupby('model_year')['car_name'].count()"),
    ("auto_mpg", GU, "which car has the lowest weight?",
     "result = df.loc[df['weight'].idxmin(), 'car_name']"),
    ("auto_mpg", DS, "what is the median weight of all cars?",
     "result = df['weight'].median()"),
    ("auto_mpg", GU, "which cars have 8 cylinders?",
     "result = df[df['cylinders'] == 8]['car_name']"),
    ("breast_cancer", DO, "how many cases are recurrence events?",
     "result = (df['Class'] == 'recurrence-events').sum()"),
    ("breast_cancer", GU, "what are the distinct age groups in the data?",
     "result = df['age'].unique()"),
    ("breast_cancer", DO, "which age group has the most cases?",
     "result = df['age'].value_counts().idxmax()"),
    ("breast_cancer", DS, "what is the distribution of classes across age groups?",
     "result = df.groupby('age')['Class'].value_counts()"),
]


def main(out_dir: str) -> int:
    tables = {t.table_id: t for t in TABLES}
    pool = WorkerPool(2)
    tasks = []
    audit = []
    failures = 0
    try:
        for i, (table_id, role, question, source) in enumerate(PAIRS, start=1):
            query = QueryText(source=source, lint=lint_query(source))
            response = pool.execute(
                ExecRequest(f"build-{uuid.uuid4().hex[:8]}", tables[table_id], query)
            )
            pair = GeneratedPair(question=question, query=query, role=role,
                                 keep=True, ground_truth=response.result)
            if is_error(response.result):
                print(f"FAIL {table_id}: {question!r} -> {response.result}")
                failures += 1
                pair = replace(pair, keep=False, rejection_reason=RejectionReason.EXEC_ERROR)
                audit.append(pair)
                continue
            audit.append(pair)
            tasks.append(TaskInstance(
                question=Question(
                    qid=f"uci-sample-{i:03d}",
                    text=question,
                    role=role,
                    qtype=classify_pair_qtype(query),
                ),
                table_id=table_id,
                reference_query=query,
            ))
    finally:
        pool.shutdown()
    if failures:
        print(f"{failures} reference queries failed; bundle not written")
        return 1

    bundle = Bundle(
        name="uci-sample",
        version="1",
        supplementary=SupplementarySpec.from_flags(
            flags=(MitigationFlag.LOWERCASE_DIRECTIVE, MitigationFlag.NO_IMPORT_DIRECTIVE),
        ),
        tables=tables,
        tasks=tasks,
        judge_config={"lowercase_compare": True},
    )
    out = write_bundle(bundle, out_dir)
    write_curation_audit(audit, out / "curation.jsonl")
    print(f"wrote {len(tasks)} tasks over {len(tables)} tables -> {out}")
    return 0


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "src/dfqa/data/uci_sample"
    sys.exit(main(target))
