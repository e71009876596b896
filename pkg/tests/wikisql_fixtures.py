"""Synthetic WikiSQL-release-format fixtures and an independent brute-force
logical-form evaluator.

The generator emits raw records in the public release shape (header/types/rows
tables, question records carrying sel/agg/conds), with the aggregation mix
matching the published test-set distribution. The brute-force evaluator is a
deliberately separate code path from the adapter: it works on the RAW records
with naive nested loops and its own parsing, so agreement with the adapter's
oracle is a meaningful check.
"""

from __future__ import annotations

import random
from typing import Any

WORDS = (
    "alpha Beta GAMMA delta Epsilon zeta Êta theta iota kappa",
    "North South East WEST Centre",
    "Gold silver Bronze",
    "Mon Tue Wed Thu Fri",
)
WORD_POOL = [w for group in WORDS for w in group.split()]

# agg codes follow the release: 0 none, 1 max, 2 min, 3 count, 4 sum, 5 avg.
# Weights mirror the published test-set mix: 71% retrieval, 12% min/max,
# 9% count, 8% sum/avg.
AGG_WEIGHTS = [(0, 71), (1, 6), (2, 6), (3, 9), (4, 4), (5, 4)]


def generate_table(rng: random.Random, table_id: str, max_rows: int = 30) -> dict[str, Any]:
    n_cols = rng.randint(2, 5)
    n_rows = rng.randint(1, max_rows)
    types = [rng.choice(["text", "real", "real"]) for _ in range(n_cols)]
    header = [f"Col {i} {rng.choice(WORD_POOL)}" for i in range(n_cols)]
    rows = []
    for _ in range(n_rows):
        row: list[Any] = []
        for t in types:
            if t == "real":
                pick = rng.random()
                if pick < 0.6:
                    row.append(round(rng.uniform(-500, 5000), 2))
                elif pick < 0.85:
                    row.append(f"{rng.randint(1, 999)},{rng.randint(100, 999)}")
                elif pick < 0.95:
                    row.append(str(rng.randint(0, 99)))
                else:
                    row.append("n/a")  # forces whole-column demotion
            else:
                row.append(" ".join(rng.choice(WORD_POOL) for _ in range(rng.randint(1, 3))))
        rows.append(row)
    return {"id": table_id, "header": header, "types": types, "rows": rows}


def generate_question(rng: random.Random, table: dict[str, Any]) -> dict[str, Any]:
    n_cols = len(table["header"])
    sel = rng.randrange(n_cols)
    agg = rng.choices([a for a, _ in AGG_WEIGHTS], weights=[w for _, w in AGG_WEIGHTS])[0]
    if agg in (4, 5):  # sum/avg want a mostly-numeric column
        numeric_cols = [i for i, t in enumerate(table["types"]) if t == "real"]
        if numeric_cols:
            sel = rng.choice(numeric_cols)
    conds = []
    for _ in range(rng.randint(0, 2)):
        col = rng.randrange(n_cols)
        op = rng.choice([0, 0, 1, 2])
        if table["rows"] and rng.random() < 0.8:
            value = rng.choice(table["rows"])[col]
        else:
            value = rng.choice(WORD_POOL) if table["types"][col] == "text" else rng.randint(0, 100)
        conds.append([col, op, value])
    return {
        "table_id": table["id"],
        "question": f"What Is {table['header'][sel]} When Filtered?",
        "sql": {"sel": sel, "agg": agg, "conds": conds},
    }


def generate_release(seed: int, n_tables: int, questions_per_table: int,
                     max_rows: int = 30) -> tuple[list[dict], list[dict]]:
    rng = random.Random(seed)
    tables = [generate_table(rng, f"synth-{i}", max_rows) for i in range(n_tables)]
    questions = []
    for table in tables:
        for _ in range(questions_per_table):
            questions.append(generate_question(rng, table))
    return tables, questions


# --- independent brute-force evaluator over RAW records -------------------------

def _bf_number(value: Any) -> float | None:
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


def _bf_text(value: Any) -> str:
    return str(value).strip().lower()


def brute_force_eval(raw_table: dict[str, Any], sql: dict[str, Any]):
    """Evaluate a release logical form with naive loops on the raw record.

    Mirrors the documented semantics (null-skipping aggregates, COUNT over
    non-null, lexicographic fallback) without sharing any adapter code.
    Returns ("list", values) / ("scalar", value) / ("error", reason).
    """
    types = raw_table["types"]
    sel = sql["sel"]

    # replicate column demotion: a real column with any unparseable non-empty
    # cell is treated as text
    demoted = set()
    for c, t in enumerate(types):
        if t != "real":
            continue
        for row in raw_table["rows"]:
            cell = row[c]
            if cell is None or (isinstance(cell, str) and not cell.strip()):
                continue
            if _bf_number(cell) is None:
                demoted.add(c)
                break

    def cell_value(row: list[Any], c: int):
        cell = row[c]
        if cell is None or (isinstance(cell, str) and not cell.strip()):
            return None
        if types[c] == "real" and c not in demoted:
            return _bf_number(cell)
        return _bf_text(cell)

    def holds(row: list[Any], cond: list[Any]) -> bool:
        col, op, target = cond
        cell = cell_value(row, col)
        if cell is None:
            return False
        if op == 0:
            a, b = _bf_number(cell), _bf_number(target)
            if a is not None and b is not None:
                return a == b
            return _bf_text(cell) == _bf_text(target)
        a, b = _bf_number(cell), _bf_number(target)
        if a is not None and b is not None:
            return a > b if op == 1 else a < b
        sa, sb = _bf_text(cell), _bf_text(target)
        return sa > sb if op == 1 else sa < sb

    picked = []
    for row in raw_table["rows"]:
        keep = True
        for cond in sql.get("conds", []):
            if not holds(row, cond):
                keep = False
                break
        if keep:
            picked.append(cell_value(row, sel))

    agg = sql["agg"]
    if agg == 0:
        return ("list", picked)
    if agg == 3:
        return ("scalar", sum(1 for v in picked if v is not None))
    present = [v for v in picked if v is not None]
    if not present:
        return ("scalar", None)
    if agg in (1, 2):
        nums = [_bf_number(v) for v in present]
        if all(n is not None for n in nums):
            return ("scalar", max(nums) if agg == 1 else min(nums))
        texts = [_bf_text(v) for v in present]
        return ("scalar", max(texts) if agg == 1 else min(texts))
    nums = [n for n in (_bf_number(v) for v in present) if n is not None]
    if not nums:
        return ("error", "no numeric operand")
    total = 0.0
    for n in nums:
        total += n
    return ("scalar", total if agg == 4 else total / len(nums))
