import random
from collections import Counter

import pytest
from hypothesis import given, settings

from dfqa.equivalence import (
    JudgeConfig,
    flatten,
    judge,
    normalize,
    strict_equal,
)
from dfqa.model import (
    ErrorKind,
    ExecError,
    Scalar,
    ScalarKind,
    Series,
    Table,
    ValueList,
    Verdict,
)
from tests.conftest import CanonGen
from tests.test_model import canon_strategy

CFG = JudgeConfig()


def multiset_key(s: Scalar):
    """Independent canonical key for the oracle: exact values, no tolerance."""
    if s.dtype is ScalarKind.NUMBER:
        return ("num", float(s.value))
    if s.dtype is ScalarKind.DATETIME:
        return ("dt", s.value.isoformat())
    return (s.dtype.value, s.value)


def oracle_table_equal(a: Table, b: Table) -> bool:
    """Brute-force multiset comparison over rows, written independently of the
    sorted-pairing implementation: exact Counter equality over row keys."""
    if len(a.columns) != len(b.columns):
        return False
    rows_a = Counter(tuple(multiset_key(s) for s in row) for row in a.rows)
    rows_b = Counter(tuple(multiset_key(s) for s in row) for row in b.rows)
    return rows_a == rows_b


class TestNormalize:
    def test_single_element_list_unwraps_and_retypes(self):
        assert normalize(ValueList((Scalar.of("5"),)), CFG) == Scalar.of(5.0)

    def test_string_trim_and_lowercase(self):
        cfg = JudgeConfig(lowercase_compare=True)
        assert normalize(Scalar.of(" Gold "), cfg) == Scalar.of("gold")

    def test_one_by_one_table_unwraps(self):
        t = Table(columns=("v",), rows=((Scalar.of(3.0),),))
        assert normalize(t, CFG) == Scalar.of(3.0)

    def test_numeric_string_retyped_inside_containers(self):
        v = ValueList((Scalar.of("2"), Scalar.of("x")))
        out = normalize(v, CFG)
        assert out.values[0] == Scalar.of(2.0)
        assert out.values[1] == Scalar.of("x")

    def test_non_finite_strings_stay_strings(self):
        assert normalize(Scalar.of("inf"), CFG) == Scalar.of("inf")
        assert normalize(Scalar.of("nan"), CFG) == Scalar.of("nan")

    def test_error_rejected(self):
        with pytest.raises(ValueError):
            normalize(ExecError(ErrorKind.TIMEOUT), CFG)

    @settings(max_examples=300, deadline=None)
    @given(canon_strategy())
    def test_idempotent(self, result):
        if isinstance(result, ExecError):
            return
        once = normalize(result, CFG)
        assert normalize(once, CFG) == once


class TestStrictEqual:
    def test_numbers_within_relative_tolerance(self):
        assert strict_equal(Scalar.of(1.0000001), Scalar.of(1.0), CFG)
        assert not strict_equal(Scalar.of(1.001), Scalar.of(1.0), CFG)

    def test_list_multiset_by_default(self):
        a = ValueList((Scalar.of(1), Scalar.of(2)))
        b = ValueList((Scalar.of(2), Scalar.of(1)))
        assert strict_equal(a, b, CFG)
        assert not strict_equal(a, b, JudgeConfig(list_order_sensitive=True))

    def test_series_compares_values_not_index(self):
        a = Series(values=(Scalar.of(1), Scalar.of(2)), index=(Scalar.of("x"), Scalar.of("y")))
        b = Series(values=(Scalar.of(2), Scalar.of(1)), index=(Scalar.of(9), Scalar.of(8)))
        assert strict_equal(a, b, CFG)

    def test_cross_shape_is_not_strict(self):
        a = ValueList((Scalar.of(1),))
        b = Series(values=(Scalar.of(1),), index=(Scalar.of(0),))
        assert not strict_equal(a, b, CFG)  # pre-normalization shapes differ

    def test_bool_never_equals_number(self):
        assert not strict_equal(Scalar.of(True), Scalar.of(1), CFG)

    def test_table_row_permutation_matches_oracle(self):
        rng = random.Random(99)
        gen = CanonGen(seed=5)
        for _ in range(300):
            rows = tuple(gen.scalars(3) for _ in range(4))
            a = Table(columns=("a", "b", "c"), rows=rows)
            permuted = list(rows)
            rng.shuffle(permuted)
            b = Table(columns=("a", "b", "c"), rows=tuple(permuted))
            assert strict_equal(a, b, CFG) == oracle_table_equal(a, b)
            assert strict_equal(a, b, CFG)

    def test_table_mismatch_matches_oracle(self):
        gen = CanonGen(seed=6)
        agree = 0
        for _ in range(300):
            a = Table(columns=("a", "b"), rows=tuple(gen.scalars(2) for _ in range(3)))
            b = Table(columns=("a", "b"), rows=tuple(gen.scalars(2) for _ in range(3)))
            assert strict_equal(a, b, CFG) == oracle_table_equal(a, b)
            agree += 1
        assert agree == 300


class TestFlatten:
    def test_scalar(self):
        assert flatten(Scalar.of(5)) == [Scalar.of(5)]

    def test_table_yields_all_cells(self):
        t = Table(columns=("a", "b"), rows=((Scalar.of(1), Scalar.of(2)),
                                            (Scalar.of(3), Scalar.of(4))))
        assert len(flatten(t)) == 4

    def test_series_keeps_multiplicity_and_skips_index(self):
        s = Series(values=(Scalar.of(1), Scalar.of(1), Scalar.of(2)),
                   index=(Scalar.of("a"), Scalar.of("b"), Scalar.of("c")))
        counted = Counter(multiset_key(x) for x in flatten(s))
        assert counted == Counter({("num", 1.0): 2, ("num", 2.0): 1})


class TestJudge:
    def test_error_verdict_mapping(self):
        truth = Scalar.of(1)
        cases = {
            ErrorKind.REJECTED_UNSAFE: Verdict.REJECTED_UNSAFE,
            ErrorKind.TIMEOUT: Verdict.TIMEOUT,
            ErrorKind.RUNTIME_ERROR: Verdict.EXEC_ERROR,
            ErrorKind.NO_RESULT: Verdict.EXEC_ERROR,
            ErrorKind.RESOURCE_LIMIT: Verdict.EXEC_ERROR,
            ErrorKind.RESULT_TOO_LARGE: Verdict.EXEC_ERROR,
        }
        for kind, verdict in cases.items():
            assert judge(ExecError(kind), truth, CFG) is verdict

    def test_identical_scalars_are_strict(self):
        assert judge(Scalar.of("auckland"), Scalar.of("auckland"), CFG) is Verdict.CORRECT_STRICT

    def test_series_containing_answer_is_relaxed(self):
        pred = Series(
            values=(Scalar.of("wellington"), Scalar.of("auckland"), Scalar.of("otago")),
            index=(Scalar.of(0), Scalar.of(1), Scalar.of(2)),
        )
        assert judge(pred, Scalar.of("auckland"), CFG) is Verdict.CORRECT_RELAXED

    def test_partial_overlap_needs_review(self):
        pred = Table(columns=("x",), rows=((Scalar.of(1),), (Scalar.of(99),)))
        truth = ValueList((Scalar.of(1), Scalar.of(2), Scalar.of(3)))
        assert judge(pred, truth, CFG) is Verdict.NEEDS_REVIEW

    def test_disjoint_container_is_incorrect(self):
        pred = ValueList((Scalar.of(7), Scalar.of(8)))
        assert judge(pred, Scalar.of(1), CFG) is Verdict.INCORRECT

    def test_scalar_mismatch_is_incorrect(self):
        assert judge(Scalar.of(2), Scalar.of(1), CFG) is Verdict.INCORRECT

    def test_multiplicity_respected_by_containment(self):
        truth = ValueList((Scalar.of(1), Scalar.of(1)))
        pred_short = ValueList((Scalar.of(1), Scalar.of(2)))
        pred_full = ValueList((Scalar.of(1), Scalar.of(1), Scalar.of(2)))
        assert judge(pred_short, truth, CFG) is Verdict.NEEDS_REVIEW
        assert judge(pred_full, truth, CFG) is Verdict.CORRECT_RELAXED

    def test_error_ground_truth_rejected(self):
        with pytest.raises(ValueError):
            judge(Scalar.of(1), ExecError(ErrorKind.TIMEOUT), CFG)

    def test_row_containment_mode(self):
        cfg = JudgeConfig(containment="rows")
        pred = Table(columns=("a", "b"),
                     rows=((Scalar.of("x"), Scalar.of(1)), (Scalar.of("y"), Scalar.of(2))))
        together = ValueList((Scalar.of("x"), Scalar.of(1)))
        split = ValueList((Scalar.of("x"), Scalar.of(2)))
        assert judge(pred, together, cfg) is Verdict.CORRECT_RELAXED
        assert judge(pred, split, cfg) is Verdict.NEEDS_REVIEW


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(canon_strategy())
    def test_judge_self_is_strict(self, result):
        if isinstance(result, ExecError):
            return
        assert judge(result, result, CFG) is Verdict.CORRECT_STRICT

    @settings(max_examples=300, deadline=None)
    @given(canon_strategy(), canon_strategy())
    def test_strict_equal_symmetric(self, a, b):
        if isinstance(a, ExecError) or isinstance(b, ExecError):
            return
        na, nb = normalize(a, CFG), normalize(b, CFG)
        assert strict_equal(na, nb, CFG) == strict_equal(nb, na, CFG)

    @settings(max_examples=300, deadline=None)
    @given(canon_strategy(), canon_strategy())
    def test_strict_implies_relaxed_containment(self, a, b):
        """Relaxation monotonicity: whenever two non-error container results are
        strictly equal, the containment criterion also accepts them."""
        if isinstance(a, ExecError) or isinstance(b, ExecError):
            return
        na, nb = normalize(a, CFG), normalize(b, CFG)
        if not isinstance(na, (ValueList, Series, Table)):
            return
        if strict_equal(na, nb, CFG):
            verdict = judge(a, b, CFG)
            assert verdict in (Verdict.CORRECT_STRICT, Verdict.CORRECT_RELAXED)

    def test_lowercase_config_is_noop_on_conforming_inputs(self):
        """Both sides already lowercase: toggling lowercase_compare cannot flip
        a verdict between correct_strict and incorrect."""
        gen = CanonGen(seed=31)
        lower_cfg = JudgeConfig(lowercase_compare=True)
        for _ in range(500):
            a, b = gen.result(), gen.result()

            def lower(r):
                if isinstance(r, Scalar):
                    return Scalar.of(r.value.lower()) if r.dtype is ScalarKind.STRING else r
                if isinstance(r, ValueList):
                    return ValueList(tuple(lower(s) for s in r.values))
                if isinstance(r, Series):
                    return Series(values=tuple(lower(s) for s in r.values),
                                  index=tuple(lower(s) for s in r.index), name=r.name)
                return Table(columns=r.columns,
                             rows=tuple(tuple(lower(s) for s in row) for row in r.rows))

            a, b = lower(a), lower(b)
            assert judge(a, b, CFG) == judge(a, b, lower_cfg)
