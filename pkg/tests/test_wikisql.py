import pytest

from dfqa.bundle import read_bundle, write_bundle
from dfqa.model import Dtype, QType, Scalar, ScalarKind, ValueList
from dfqa.wikisql import (
    Agg,
    Condition,
    CondOp,
    IngestError,
    LogicalForm,
    OracleError,
    build_bundle,
    classify_qtype,
    eval_logical_form,
    ingest_table,
    lower_question,
)
from tests.wikisql_fixtures import brute_force_eval, generate_release


def canon_to_plain(result):
    if isinstance(result, ValueList):
        return ("list", [s.value for s in result.values])
    assert isinstance(result, Scalar)
    return ("scalar", result.value)


class TestIngest:
    def test_lowercase_and_parse(self):
        raw = {"id": "t", "header": ["a", "b"], "types": ["text", "real"],
               "rows": [["X", "1"], ["Y", "2"]]}
        table = ingest_table(raw)
        assert [c.dtype for c in table.schema.columns] == [Dtype.STRING, Dtype.FLOAT]
        assert table.rows == (("x", 1.0), ("y", 2.0))

    def test_unparseable_cell_demotes_whole_column(self):
        raw = {"id": "t", "header": ["v"], "types": ["real"],
               "rows": [["1"], ["n/a"], ["3.5"]]}
        table = ingest_table(raw)
        # brute-force demotion: any cell failing float() after comma-stripping
        def parses(x):
            try:
                float(str(x).replace(",", ""))
                return True
            except ValueError:
                return False
        assert not all(parses(r[0]) for r in raw["rows"])
        assert table.schema.columns[0].dtype is Dtype.STRING
        assert table.rows == (("1",), ("n/a",), ("3.5",))

    def test_empty_rows_is_a_valid_table(self):
        table = ingest_table({"id": "t", "header": ["a"], "types": ["text"], "rows": []})
        assert table.rows == ()

    def test_malformed_records_raise(self):
        with pytest.raises(IngestError):
            ingest_table({"id": "t", "rows": []})
        with pytest.raises(IngestError):
            ingest_table({"id": "t", "header": ["a", "b"], "types": ["text", "text"],
                          "rows": [["only one"]]})

    def test_duplicate_headers_are_deduplicated(self):
        raw = {"id": "t", "header": ["a", "a", ""], "types": ["text"] * 3,
               "rows": [["x", "y", "z"]]}
        table = ingest_table(raw)
        assert table.schema.column_names == ["a", "a_2", "col_2"]

    def test_thousands_separated_reals(self):
        raw = {"id": "t", "header": ["n"], "types": ["real"], "rows": [["1,234"]]}
        assert ingest_table(raw).rows == ((1234.0,),)


class TestLowerQuestion:
    # expected forms hand-checked against the Unicode case mappings
    @pytest.mark.parametrize("text,expected", [
        ("Which Province?", "which province?"),
        ("already lowercase", "already lowercase"),
        ("École", "école"),
        ("ÅNGSTRÖM UNIT", "ångström unit"),
        ("ΣΙΓΜΑ", "σιγμα"),
        ("MIXED Case 123", "mixed case 123"),
    ])
    def test_reference_pairs(self, text, expected):
        assert lower_question(text) == expected

    def test_idempotent(self):
        assert lower_question(lower_question("AbC")) == lower_question("AbC")


FIXTURE = ingest_table({
    "id": "wrestlers",
    "header": ["Wrestler", "Reigns", "Combined days"],
    "types": ["text", "real", "real"],
    "rows": [
        ["Go Shiozaki", "3", "599"],
        ["Kenta Kobashi", "2", "735"],
        ["Mitsuharu Misawa", "4", "1,215"],
        ["Takeshi Morishima", "2", "355"],
        ["Jun Akiyama", "3", "512"],
    ],
})


class TestOracle:
    def test_identity_projection(self):
        lf = LogicalForm(sel=0)
        result = eval_logical_form(lf, FIXTURE)
        assert canon_to_plain(result) == ("list", [
            "go shiozaki", "kenta kobashi", "mitsuharu misawa",
            "takeshi morishima", "jun akiyama",
        ])

    def test_combined_days_lookup(self):
        # single-condition retrieval in the row-scan style: filter on the
        # wrestler name, project the combined-days column
        lf = LogicalForm(sel=2, conds=(Condition(0, CondOp.EQ, "go shiozaki"),))
        expected = None
        for row in FIXTURE.rows:  # brute-force row scan
            if row[0] == "go shiozaki":
                expected = row[2]
        assert expected == 599.0
        assert canon_to_plain(eval_logical_form(lf, FIXTURE)) == ("list", [599.0])

    def test_count_matches_brute_force_filter(self):
        lf = LogicalForm(sel=0, agg=Agg.COUNT, conds=(Condition(1, CondOp.EQ, "3"),))
        matching = [r for r in FIXTURE.rows if r[1] == 3.0]
        assert len(matching) == 2
        assert canon_to_plain(eval_logical_form(lf, FIXTURE)) == ("scalar", 2)

    def test_numeric_aggregates(self):
        days = [r[2] for r in FIXTURE.rows]
        assert eval_logical_form(LogicalForm(2, Agg.MAX), FIXTURE).value == max(days)
        assert eval_logical_form(LogicalForm(2, Agg.MIN), FIXTURE).value == min(days)
        assert eval_logical_form(LogicalForm(2, Agg.SUM), FIXTURE).value == sum(days)
        assert eval_logical_form(LogicalForm(2, Agg.AVG), FIXTURE).value == sum(days) / len(days)

    def test_gt_lt_numeric_and_lexicographic(self):
        gt = LogicalForm(sel=0, conds=(Condition(2, CondOp.GT, 600),))
        assert canon_to_plain(eval_logical_form(gt, FIXTURE)) == (
            "list", ["kenta kobashi", "mitsuharu misawa"])
        lex = LogicalForm(sel=0, conds=(Condition(0, CondOp.LT, "jun akiyama"),))
        assert canon_to_plain(eval_logical_form(lex, FIXTURE)) == ("list", ["go shiozaki"])

    def test_sum_over_text_raises(self):
        with pytest.raises(OracleError):
            eval_logical_form(LogicalForm(sel=0, agg=Agg.SUM), FIXTURE)

    def test_aggregate_over_no_rows_is_null(self):
        lf = LogicalForm(sel=2, agg=Agg.SUM, conds=(Condition(0, CondOp.EQ, "nobody"),))
        assert eval_logical_form(lf, FIXTURE) == Scalar(ScalarKind.NULL, None)

    def test_invalid_indices_rejected(self):
        with pytest.raises(OracleError):
            eval_logical_form(LogicalForm(sel=9), FIXTURE)
        with pytest.raises(OracleError):
            eval_logical_form(LogicalForm(sel=0, conds=(Condition(9, CondOp.EQ, "x"),)), FIXTURE)

    def test_null_cells_fail_conditions_and_skip_aggregates(self):
        table = ingest_table({
            "id": "t", "header": ["k", "v"], "types": ["text", "real"],
            "rows": [["a", "1"], ["b", ""], ["c", "3"]],
        })
        assert table.rows[1][1] is None
        count = eval_logical_form(LogicalForm(sel=1, agg=Agg.COUNT), table)
        assert count.value == 2
        gt = eval_logical_form(LogicalForm(sel=0, conds=(Condition(1, CondOp.GT, 0),)), table)
        assert canon_to_plain(gt) == ("list", ["a", "c"])


class TestOracleAgreement:
    def test_agrees_with_brute_force_on_random_fixtures(self):
        tables, questions = generate_release(seed=11, n_tables=40, questions_per_table=5, max_rows=20)
        by_id = {t["id"]: t for t in tables}
        checked = 0
        for q in questions:
            raw = by_id[q["table_id"]]
            table = ingest_table(raw)
            lf = LogicalForm.from_release(q["sql"])
            expected = brute_force_eval(raw, q["sql"])
            try:
                actual = canon_to_plain(eval_logical_form(lf, table))
            except OracleError:
                assert expected[0] == "error"
                checked += 1
                continue
            assert expected[0] != "error"
            assert actual == expected, f"disagreement on {q['sql']} over {raw['id']}"
            checked += 1
        assert checked == 200

    def test_filtering_monotonicity(self):
        tables, questions = generate_release(seed=13, n_tables=20, questions_per_table=4, max_rows=15)
        by_id = {t["id"]: t for t in tables}
        import random
        rng = random.Random(5)
        for q in questions:
            raw = by_id[q["table_id"]]
            table = ingest_table(raw)
            sql = dict(q["sql"], agg=0)
            base = eval_logical_form(LogicalForm.from_release(sql), table)
            col = rng.randrange(len(raw["header"]))
            extra_value = rng.choice(raw["rows"])[col] if raw["rows"] else "x"
            tightened = dict(sql, conds=list(sql["conds"]) + [[col, 0, extra_value]])
            narrowed = eval_logical_form(LogicalForm.from_release(tightened), table)
            assert len(narrowed.values) <= len(base.values)

    def test_count_equals_projection_length(self):
        tables, questions = generate_release(seed=17, n_tables=15, questions_per_table=4, max_rows=15)
        by_id = {t["id"]: t for t in tables}
        for q in questions:
            table = ingest_table(by_id[q["table_id"]])
            lf_list = LogicalForm.from_release(dict(q["sql"], agg=0))
            lf_count = LogicalForm.from_release(dict(q["sql"], agg=3))
            projected = eval_logical_form(lf_list, table)
            counted = eval_logical_form(lf_count, table)
            non_null = sum(1 for s in projected.values if s.value is not None)
            assert counted.value == non_null


class TestClassifyQtype:
    def test_definitions(self):
        assert classify_qtype(LogicalForm(0)) is QType.RETRIEVAL
        assert classify_qtype(LogicalForm(0, Agg.COUNT)) is QType.AGGREGATION
        assert classify_qtype(LogicalForm(0, Agg.AVG)) is QType.AGGREGATION


class TestBuildBundle:
    def test_deterministic_subsampling(self, tmp_path):
        tables, questions = generate_release(seed=23, n_tables=10, questions_per_table=4)
        b1 = build_bundle(tables, questions, limit=12, seed=99)
        b2 = build_bundle(tables, questions, limit=12, seed=99)
        assert [t.question.qid for t in b1.tasks] == [t.question.qid for t in b2.tasks]
        b3 = build_bundle(tables, questions, limit=12, seed=100)
        assert [t.question.qid for t in b3.tasks] != [t.question.qid for t in b1.tasks]

    def test_missing_table_skipped_with_reason(self):
        tables, questions = generate_release(seed=29, n_tables=2, questions_per_table=2)
        questions.append({"table_id": "missing", "question": "?", "sql": {"sel": 0, "agg": 0, "conds": []}})
        bundle = build_bundle(tables, questions)
        assert len(bundle.tasks) == 4
        skipped = bundle.manifest["skipped"]
        assert len(skipped) == 1 and "missing" in skipped[0]["reason"]

    def test_bundle_is_fully_lowercase(self, tmp_path):
        tables, questions = generate_release(seed=31, n_tables=10, questions_per_table=3)
        bundle = build_bundle(tables, questions)
        for task in bundle.tasks:
            assert task.question.text == task.question.text.lower()
        for table in bundle.tables.values():
            for row in table.rows:
                for cell in row:
                    if isinstance(cell, str):
                        assert cell == cell.lower()

    def test_round_trips_through_disk(self, tmp_path):
        tables, questions = generate_release(seed=37, n_tables=4, questions_per_table=2)
        bundle = build_bundle(tables, questions)
        write_bundle(bundle, tmp_path / "b")
        loaded = read_bundle(tmp_path / "b")
        assert loaded.tables == bundle.tables
        assert loaded.tasks == bundle.tasks
        assert loaded.supplementary == bundle.supplementary

    def test_exclusion_list(self):
        tables, questions = generate_release(seed=41, n_tables=2, questions_per_table=2)
        full = build_bundle(tables, questions)
        drop = full.tasks[0].question.qid
        pruned = build_bundle(tables, questions, exclude_qids={drop})
        assert drop not in [t.question.qid for t in pruned.tasks]
        assert any(s["qid"] == drop for s in pruned.manifest["skipped"])

    def test_lexicographic_fallbacks_recorded_in_manifest(self):
        tables = [{"id": "w", "header": ["name", "rank"], "types": ["text", "text"],
                   "rows": [["alpha", "b"], ["beta", "d"]]}]
        questions = [{"table_id": "w", "question": "Who ranks above c?",
                      "sql": {"sel": 0, "agg": 0, "conds": [[1, 1, "c"]]}}]
        bundle = build_bundle(tables, questions)
        assert bundle.manifest["oracle_notes"]["lexicographic_comparisons"] >= 1
