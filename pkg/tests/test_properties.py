import json

import numpy as np
import pytest

from graded_norms.norms import Atomic, Lp, WeightedLp
from graded_norms.properties import (
    check_birkhoff, check_dual_pair_support, check_monotonic, check_om_rotund_implies_osm,
    check_orthant_monotonic, check_orthant_strictly_monotonic, check_permutation_invariant,
    check_restriction_duality, replay,
)
from graded_norms.vectors import IndexSet

from conftest import INF

ZOO = {
    "cross": Atomic([[1, 0], [0, 1]]),
    "square": Atomic([[1, 1], [1, -1]]),
    "hexagon": Atomic([[1, 1], [1, -1], [0, 2]]),
    "skewed": Atomic([[2, 1], [1, 2]]),
    "rotated": Atomic([[1, 0.3], [-0.3, 1]]),
}


def _grid_oracle(n, same_orthant):
    """Exhaustive pairwise test on a 2-d grid of step 0.1 (first two quadrants)."""
    g = np.round(np.arange(-1.0, 1.0001, 0.1), 10)
    P = np.array([(a, b) for a in g for b in g if b >= 0])
    vals = n.eval_rows(P)
    A = np.abs(P)
    dom = np.all(A[:, None, :] <= A[None, :, :], axis=2)  # |x_i| <= |x'_j|
    if same_orthant:
        dom &= np.all(P[:, None, :] * P[None, :, :] >= 0, axis=2)
    worse = vals[:, None] > vals[None, :] + 1e-9
    return not np.any(dom & worse)


def test_trials_must_be_positive():
    with pytest.raises(ValueError):
        check_monotonic(Lp(2), trials=0)
    with pytest.raises(ValueError):
        check_orthant_strictly_monotonic(Lp(2), margin=0)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, INF])
def test_lp_monotonic_and_orthant_monotonic(p):
    assert check_monotonic(Lp(p)).passed
    assert check_orthant_monotonic(Lp(p)).passed


@pytest.mark.parametrize("name", sorted(ZOO))
def test_monotonic_verdicts_match_grid_oracle(name):
    n = ZOO[name]
    want = _grid_oracle(n, same_orthant=False)
    assert check_monotonic(n, trials=400).passed == want


@pytest.mark.parametrize("name", sorted(ZOO))
def test_orthant_monotonic_verdicts_match_grid_oracle(name):
    n = ZOO[name]
    want = _grid_oracle(n, same_orthant=True)
    r = check_orthant_monotonic(n, trials=400)
    assert r.passed == want
    if want:
        # the two sub-tests are equivalent characterizations
        assert check_orthant_monotonic(n, trials=400, subtest="direct").passed
        assert check_orthant_monotonic(n, trials=400, subtest="subspace").passed


def test_grid_oracle_frozen_classification():
    # frozen from the grid oracle: axis-symmetric polytopes are monotonic,
    # the two skewed ones are not even orthant-monotonic
    got = {k: _grid_oracle(n, True) for k, n in ZOO.items()}
    assert got == {"cross": True, "square": True, "hexagon": True, "skewed": False,
                   "rotated": False}


def test_direct_pass_implies_subspace_pass_same_seed():
    for n in [Lp(1.5), WeightedLp(1, (1, 2, 3)), *ZOO.values()]:
        direct = check_orthant_monotonic(n, trials=300, seed=5, subtest="direct")
        if direct.passed:
            assert check_orthant_monotonic(n, trials=300, seed=5, subtest="subspace").passed


@pytest.mark.parametrize("p", [1, 1.2, 2, 4])
def test_lp_orthant_strictly_monotonic(p):
    assert check_orthant_strictly_monotonic(Lp(p)).passed


def test_weighted_l2_orthant_strictly_monotonic():
    for d in range(1, 7):
        w = tuple(np.linspace(0.5, 3, d))
        assert check_orthant_strictly_monotonic(WeightedLp(2, w), trials=300).passed


def test_linf_not_orthant_strictly_monotonic():
    n = Lp(INF)
    r = check_orthant_strictly_monotonic(n, trials=1000, seed=7)
    assert r.falsified and r.witness is not None
    assert r.witness["lhs"] == r.witness["rhs"]
    out = replay(r, n)
    assert out.status == "fail" and out.slack == r.witness["slack"]
    # the witness survives a JSON round trip bit for bit
    w = json.loads(r.to_json())["witness"]
    assert w["x"] == r.witness["x"]
    # the canonical tie
    assert n.eval([1, 0.5, 0]) == n.eval([1, 1, 0]) == 1


def test_birkhoff():
    assert check_birkhoff(Lp(2), strict=True).passed
    assert check_birkhoff(Lp(INF)).passed
    K = IndexSet.from_one_based([1], 2)
    r = check_birkhoff(Lp(INF), K=K, strict=True, trials=200)
    assert r.falsified
    assert Lp(INF).eval([1, 0.5]) == Lp(INF).eval([1, 0]) == 1
    # in R^1 the only index set is the full one, so v is always 0
    assert check_birkhoff(Lp(2), dim=1, trials=20).passed
    assert check_birkhoff(Lp(2), dim=1, trials=20, strict=True).verdict == "inconclusive"


def test_dual_pair_support():
    assert check_dual_pair_support(Lp(1)).passed
    assert check_dual_pair_support(Lp(2)).passed
    assert check_dual_pair_support(Lp(3)).passed
    r = check_dual_pair_support(Lp(INF))
    assert r.falsified
    u, v = np.array(r.witness["u"]), np.array(r.witness["v"])
    assert np.count_nonzero(v) < np.count_nonzero(u)
    # without a closed form a miss only makes the report inconclusive
    assert check_dual_pair_support(ZOO["square"], trials=200).verdict == "inconclusive"
    assert check_dual_pair_support(ZOO["cross"], trials=200).passed


def test_restriction_duality():
    for p in (1, 1.5, 2, 3, INF):
        assert check_restriction_duality(Lp(p)).passed
    for name, n in ZOO.items():
        om = check_orthant_monotonic(n, trials=400, seed=3)
        rd = check_restriction_duality(n, trials=400, seed=3)
        assert om.verdict == rd.verdict, name


def test_om_rotund_implies_osm():
    assert check_om_rotund_implies_osm(Lp(2)).passed
    assert check_om_rotund_implies_osm(Lp(1.5)).passed
    r = check_om_rotund_implies_osm(Lp(1))
    assert r.verdict == "inconclusive" and "strict convexity" in r.note
    flagged = Atomic([[2, 1], [1, 2]], declared_flags={"strictly_convex"})
    assert check_om_rotund_implies_osm(flagged, trials=200).verdict == "inconclusive"


def test_implication_lattice():
    norms = [Lp(1), Lp(2), Lp(INF), WeightedLp(3, (1, 2, 5)), *ZOO.values()]
    for n in norms:
        mono = check_monotonic(n, trials=300, seed=11)
        om = check_orthant_monotonic(n, trials=300, seed=11)
        osm = check_orthant_strictly_monotonic(n, trials=300, seed=11)
        if mono.passed:
            assert om.passed
        if osm.passed:
            assert om.passed


@pytest.mark.parametrize("name", sorted(ZOO))
def test_orthant_monotonicity_preserved_by_duality(name):
    n = ZOO[name]
    a = check_orthant_monotonic(n, trials=300, seed=2)
    b = check_orthant_monotonic(n.polar(), trials=300, seed=2)
    assert a.verdict == b.verdict


def test_strict_monotonicity_not_preserved_by_duality():
    assert check_orthant_strictly_monotonic(Lp(1)).passed
    assert check_orthant_strictly_monotonic(Lp(INF)).falsified


def test_permutation_invariance():
    assert check_permutation_invariant(Lp(3)).passed
    assert check_permutation_invariant(WeightedLp(2, (1, 2, 3))).falsified


def test_seeded_determinism_and_threads(monkeypatch):
    n = ZOO["skewed"]
    a = check_orthant_monotonic(n, trials=300, seed=9).to_json()
    b = check_orthant_monotonic(n, trials=300, seed=9).to_json()
    monkeypatch.setenv("GRADED_NORMS_THREADS", "4")
    c = check_orthant_monotonic(n, trials=300, seed=9).to_json()
    assert a == b == c
    p1 = check_orthant_strictly_monotonic(Lp(2), trials=300, seed=1).to_json()
    monkeypatch.setenv("GRADED_NORMS_THREADS", "1")
    p2 = check_orthant_strictly_monotonic(Lp(2), trials=300, seed=1).to_json()
    assert p1 == p2


def test_report_json_fields():
    r = json.loads(check_monotonic(Lp(2), trials=10).to_json())
    assert set(r) == {"property", "verdict", "trials", "seed", "witness", "margin"}
    assert r["trials"] == 10 and r["witness"] is None
