import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from graded_norms.errors import CombinatorialBlowup, NonConvergence
from graded_norms.norms import Atomic, Lp, WeightedLp
from graded_norms.properties import check_orthant_monotonic
from graded_norms.topk import (
    KSupportNorm, TopKNorm, fast_path_available, ksupport_ball_contains, ksupport_eval,
    ksupport_sequence, topk_ball_contains, topk_eval, topk_sequence,
)

from conftest import INF, ksupport_l2_oracle, vectors

SKEWED = Atomic([[2, 1], [1, 2]])
HEXAGON = Atomic([[1, 1], [1, -1], [0, 2]])


def _topk_by_hand(n, k, x):
    x = np.asarray(x, dtype=float)
    best = 0.0
    for size in range(1, k + 1):
        for K in itertools.combinations(range(x.size), size):
            z = np.zeros_like(x)
            z[list(K)] = x[list(K)]
            best = max(best, n.eval(z))
    return best


def test_topk_examples():
    assert topk_eval(Lp(1), 2, [3, -1, 2]) == 5
    for k in (1, 2, 3):
        assert topk_eval(Lp(INF), k, [1, -7, 2]) == 7
    with pytest.raises(ValueError):
        topk_eval(Lp(2), 0, [1, 2])
    with pytest.raises(ValueError):
        topk_eval(Lp(2), 3, [1, 2])


def test_topk_sequence_examples():
    r = topk_sequence(Lp(1), [3, -1, 2])
    assert r.values == (3, 5, 6) and r.stationary_from == 3 and r.monotone_ok
    assert r.chain() == "3 < 5 < 6"
    r = topk_sequence(Lp(2), [0, 0, 0])
    assert r.values == (0, 0, 0) and r.stationary_from == 1
    r = topk_sequence(Lp(INF), [1, -7, 2])
    assert r.values == (7, 7, 7) and r.stationary_from == 1


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, INF])
@settings(max_examples=40, deadline=None)
@given(x=vectors(1, 7))
def test_sorted_path_matches_brute_force(p, x):
    n = Lp(p)
    for k in range(1, x.size + 1):
        a, b = topk_eval(n, k, x, "sorted"), topk_eval(n, k, x, "brute")
        assert a == pytest.approx(b, rel=1e-12, abs=0)


def test_brute_force_matches_hand_enumeration_for_atomic():
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.standard_normal(2)
        for k in (1, 2):
            assert topk_eval(SKEWED, k, x) == pytest.approx(_topk_by_hand(SKEWED, k, x), rel=1e-12)


def test_fast_path_selection():
    assert fast_path_available(Lp(3), 4)
    assert fast_path_available(WeightedLp(2, (2, 2, 2)), 3)
    assert not fast_path_available(WeightedLp(2, (1, 2, 3)), 3)
    assert not fast_path_available(SKEWED, 2)
    with pytest.raises(ValueError):
        topk_eval(SKEWED, 1, [1, 2], "sorted")
    # declared flags are verified before use; a false claim is rejected
    liar = Atomic([[2, 1], [1, 2]], declared_flags={"permutation_invariant", "monotonic"})
    assert not fast_path_available(liar, 2)
    honest = Atomic([[1, 0], [0, 1]], declared_flags={"permutation_invariant", "monotonic"})
    assert fast_path_available(honest, 2)


def test_brute_force_dimension_cap():
    with pytest.raises(CombinatorialBlowup):
        topk_eval(WeightedLp(2, tuple(range(1, 22))), 2, np.ones(21))


def test_topd_equals_source_for_orthant_monotonic(rng):
    for n in (Lp(1), Lp(2.5), WeightedLp(1, (1, 4, 2)), HEXAGON):
        d = n.dim or 3
        for _ in range(50):
            x = rng.standard_normal(d)
            assert topk_eval(n, d, x) == pytest.approx(n.eval(x), rel=1e-9)


def test_topd_exceeds_source_without_orthant_monotonicity():
    x = [1.0, 0.5]
    assert SKEWED.eval(x) == pytest.approx(0.5)
    assert topk_eval(SKEWED, 2, x) == pytest.approx(1.0)


def test_ksupport_examples():
    assert ksupport_eval(Lp(1), 2, [3, -1, 2]) == 3
    for k in (1, 2, 3):
        assert ksupport_eval(Lp(INF), k, [3, -1, 2]) == 6
    with pytest.raises(ValueError):
        ksupport_eval(Lp(2), 1, [1, 2], method="analytic")
    with pytest.raises(ValueError):
        ksupport_eval(Lp(2), 1, [1, 2], method="newton")
    assert ksupport_eval(Lp(2), 2, [0, 0, 0]) == 0


def test_ksupport_l2_frozen_values():
    # sorting oracle: (1,1,1) gives 3, sqrt(9/2), sqrt(3)
    r = ksupport_sequence(Lp(2), [1, 1, 1])
    assert r.values == pytest.approx([3.0, 3 / math.sqrt(2), math.sqrt(3)], rel=1e-8)
    r = ksupport_sequence(Lp(2), [1, 1, 1], method="gauge_decomp")
    assert r.values == pytest.approx([3.0, 3 / math.sqrt(2), math.sqrt(3)], rel=1e-8)


@pytest.mark.parametrize("method", ["dual_opt", "gauge_decomp"])
def test_ksupport_l2_against_sorting_oracle(method, rng):
    for _ in range(40):
        d = int(rng.integers(1, 7))
        y = rng.standard_normal(d) * (rng.random(d) < 0.8)
        for k in range(1, d + 1):
            want = ksupport_l2_oracle(y, k)
            assert ksupport_eval(Lp(2), k, y, method=method) == pytest.approx(want, rel=1e-7, abs=1e-12)


def test_ksupport_l2_tiny_and_huge_scales():
    y = np.array([3.0, -1.0, 2.0])
    base = ksupport_eval(Lp(2), 2, y)
    for s in (1e-150, 1e150):
        assert ksupport_eval(Lp(2), 2, s * y) == pytest.approx(s * base, rel=1e-8)


@pytest.mark.parametrize("p", [1, INF])
def test_ksupport_closed_forms_against_both_solvers(p, rng):
    n = Lp(p)
    for _ in range(30):
        y = rng.standard_normal(5)
        for k in range(1, 6):
            a = ksupport_eval(n, k, y, method="analytic")
            for m in ("dual_opt", "gauge_decomp"):
                assert ksupport_eval(n, k, y, method=m) == pytest.approx(a, rel=1e-7)


@pytest.mark.parametrize("n", [Lp(1.5), Lp(3), WeightedLp(2, (1, 2, 3)), WeightedLp(1, (3, 1, 2))])
def test_ksupport_methods_agree_and_k_d_is_dual(n, rng):
    for _ in range(15):
        y = rng.standard_normal(3)
        for k in (1, 2, 3):
            a = ksupport_eval(n, k, y, method="dual_opt")
            b = ksupport_eval(n, k, y, method="gauge_decomp")
            assert a == pytest.approx(b, rel=1e-7)
        assert ksupport_eval(n, 3, y) == pytest.approx(n.dual_eval(y), rel=1e-7)


def test_ksupport_atomic_is_dual_of_topk():
    # by hand: the top-2 ball of SKEWED is the hexagon cut by |x_i| <= 1,
    # and <x, (1, .3)> is maximized at (1, 1)
    assert ksupport_eval(SKEWED, 2, [1, 0.3]) == pytest.approx(1.3, rel=1e-8)
    assert ksupport_eval(SKEWED, 2, [1, 0.3], method="gauge_decomp") == pytest.approx(1.3, rel=1e-8)
    assert ksupport_eval(SKEWED, 1, [1, 0.3]) == pytest.approx(1.3, rel=1e-8)


def test_ksupport_support_function_lower_bound(rng):
    """Sampled points of the top-k ball never beat the k-support value."""
    for n, d in ((Lp(2), 4), (Lp(1.5), 3), (SKEWED, 2)):
        for k in range(1, d + 1):
            y = rng.standard_normal(d)
            val = ksupport_eval(n, k, y)
            X = rng.standard_normal((2000, d))
            X /= np.array([topk_eval(n, k, x) for x in X])[:, None]
            best = float(np.max(X @ y))
            assert best <= val * (1 + 1e-9)
            assert best >= val * 0.9  # the sample is dense enough to get close


def test_chains_and_ball_inclusions(rng):
    for n in (Lp(1), Lp(2), Lp(INF), WeightedLp(2, (1, 2, 3, 4))):
        for _ in range(20):
            x = rng.standard_normal(4)
            top = topk_sequence(n, x)
            ks = ksupport_sequence(n, x)
            assert top.monotone_ok and ks.monotone_ok
            assert n.eval(x) <= top.values[-1] * (1 + 1e-12)
            for k in range(2, 5):
                if topk_ball_contains(n, k, x):
                    assert topk_ball_contains(n, k - 1, x)
                if ksupport_ball_contains(n, k - 1, x):
                    assert ksupport_ball_contains(n, k, x)
    assert topk_ball_contains(Lp(2), 1, [0, 0])
    assert ksupport_ball_contains(Lp(2), 1, [0, 0])
    assert topk_ball_contains(Lp(2), 1, [0.5, 0.1])


def test_norm_objects():
    t = TopKNorm(Lp(1), 2, 3)
    s = KSupportNorm(Lp(1), 2, 3)
    y = np.array([3.0, -1.0, 2.0])
    assert t.eval(y) == 5 and s.eval(y) == 3
    assert t.dual_eval(y) == s.eval(y)
    assert str(t) == "top-2(lp:1)"
    with pytest.raises(ValueError):
        KSupportNorm(Lp(2), 1, 3, method="analytic")


def test_topk_of_orthant_monotonic_source_is_orthant_monotonic():
    for src in (Lp(1.5), Lp(INF)):
        for k in (1, 2):
            assert check_orthant_monotonic(TopKNorm(src, k, 3), trials=300).passed
    assert check_orthant_monotonic(KSupportNorm(Lp(1), 2, 3), trials=300).passed


def test_sequence_report_serialization():
    r = topk_sequence(Lp(2), [0, 3, 0, -1])
    d = r.to_dict()
    assert d["stationary_from"] == 2 and d["direction"] == "nondecreasing"
    assert len(d["values"]) == 4


def test_nonconvergence_error_carries_gap():
    err = NonConvergence("solver", 3e-7)
    assert err.gap == 3e-7 and "3.000e-07" in str(err)
