"""Shared fixtures: deterministic table builders and randomized canonical
result generators used across the suite."""

from __future__ import annotations

import random
import string
from datetime import datetime, timedelta

import pytest

from dfqa.model import (
    ColumnSpec,
    DataTable,
    Dtype,
    Scalar,
    Series,
    Table,
    TableSchema,
    ValueList,
)


def make_schema(table_id="t", **columns):
    return TableSchema(table_id, tuple(ColumnSpec(n, d) for n, d in columns.items()))


@pytest.fixture
def two_col_table():
    schema = make_schema("demo", name=Dtype.STRING, score=Dtype.FLOAT)
    return DataTable(schema, (("ada", 1.0), ("grace", 2.5), ("edsger", 3.0)))


class CanonGen:
    """Seeded generator of random canonical results (never errors)."""

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def scalar_value(self):
        r = self.rng
        pick = r.randrange(5)
        if pick == 0:
            return None
        if pick == 1:
            return r.choice([True, False])
        if pick == 2:
            return r.choice([r.randint(-1000, 1000), round(r.uniform(-100, 100), 6)])
        if pick == 3:
            return "".join(r.choice(string.ascii_lowercase + " ") for _ in range(r.randint(1, 10)))
        return datetime(2020, 1, 1) + timedelta(seconds=r.randint(0, 10**7))

    def scalar(self):
        return Scalar.of(self.scalar_value())

    def scalars(self, n):
        return tuple(self.scalar() for _ in range(n))

    def result(self, max_len: int = 6):
        r = self.rng
        pick = r.randrange(4)
        if pick == 0:
            return self.scalar()
        if pick == 1:
            return ValueList(self.scalars(r.randint(0, max_len)))
        if pick == 2:
            n = r.randint(0, max_len)
            return Series(values=self.scalars(n), index=self.scalars(n),
                          name=r.choice([None, "col"]))
        cols = r.randint(1, 4)
        rows = r.randint(0, max_len)
        return Table(
            columns=tuple(f"c{i}" for i in range(cols)),
            rows=tuple(self.scalars(cols) for _ in range(rows)),
        )


@pytest.fixture
def canon_gen():
    return CanonGen(seed=1234)
