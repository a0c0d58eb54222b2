"""The acceptance matrix, runnable from the CLI (``graded-norms suite``) and from tests.

Each criterion returns a :class:`CriterionResult`. ``details`` holds counts
and worst-case errors; wall-clock times are kept out of ``to_dict`` so that
reports are byte-identical across runs.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonConvergence
from .gradedness import counterexample_family, l0_from_ksupport, l0_from_topk, planted_vector
from .norms import Atomic, Lp, WeightedLp, bidual_eval, dual_pair_search
from .properties import (
    check_birkhoff, check_dual_pair_support, check_om_rotund_implies_osm,
    check_orthant_monotonic, check_orthant_strictly_monotonic, check_restriction_duality,
    replay, sample_vector,
)
from .topk import ksupport_eval, ksupport_sequence, topk_eval, topk_sequence
from .vectors import l0

INF = math.inf


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# hand-built atomic norms on R^2; symmetric closure is applied on construction
ATOMIC_ZOO = {
    "cross_polytope": [[1, 0], [0, 1]],
    "square": [[1, 1], [1, -1]],
    "hexagon": [[1, 1], [1, -1], [0, 2]],
    "skewed": [[2, 1], [1, 2]],
    "rotated_square": [[1, 0.3], [-0.3, 1]],
}


def atomic_zoo() -> dict[str, Atomic]:
    return {name: Atomic(atoms) for name, atoms in ATOMIC_ZOO.items()}


@dataclass
class CriterionResult:
    id: int
    title: str
    groups: tuple
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "groups": list(self.groups),
                "passed": self.passed, "details": self.details}

    def line(self) -> str:
        return f"criterion {self.id:2d} [{'PASS' if self.passed else 'FAIL'}] {self.title}"


# -- 1 --------------------------------------------------------------------------

def criterion_closed_forms(quick: bool = False, seed: int = 42) -> CriterionResult:
    n = 100 if quick else 1000
    worst_topk = 0.0
    worst_ks = 0.0
    count = 0
    for d in range(2, 9):
        rng = np.random.default_rng([seed, 1, d])
        for _ in range(n):
            x = sample_vector(rng, d)
            for k in range(1, d + 1):
                for src in (Lp(1), Lp(2), Lp(INF)):
                    worst_topk = max(worst_topk, _rel(topk_eval(src, k, x, "brute"),
                                                      topk_eval(src, k, x, "sorted")))
                if np.any(x):
                    for src in (Lp(1), Lp(INF)):
                        worst_ks = max(worst_ks, _rel(ksupport_eval(src, k, x, method="analytic"),
                                                      ksupport_eval(src, k, x, method="dual_opt")))
                count += 1
    ok = worst_topk <= 1e-12 and worst_ks <= 1e-6
    return CriterionResult(1, "closed-form top-k and k-support norms", ("topk",), ok,
                           {"vectors_per_dim": n, "cases": count,
                            "max_rel_err_topk": worst_topk, "max_rel_err_ksupport": worst_ks})


# -- 2 --------------------------------------------------------------------------

def criterion_monotone_chains(quick: bool = False, seed: int = 42) -> CriterionResult:
    n_topk = 20 if quick else 200
    n_ks = 5 if quick else 40
    sources = [Lp(1), Lp(1.5), Lp(2), Lp(3), Lp(INF)]
    violations = []
    tested = 0
    for d in range(1, 7):
        extra = [WeightedLp(2, tuple(range(1, d + 1))), WeightedLp(1, tuple(range(d, 0, -1)))]
        if d == 2:
            extra += list(atomic_zoo().values())
        for si, src in enumerate(sources + extra):
            rng = np.random.default_rng([seed, 2, d, si])
            numeric = isinstance(src, Atomic) or src.p not in (1, INF)
            for t in range(n_topk):
                x = sample_vector(rng, d)
                top = topk_sequence(src, x)
                tested += 1
                if not top.monotone_ok:
                    violations.append({"source": str(src), "x": x.tolist(), "kind": "topk"})
                if numeric and t >= n_ks:
                    continue
                ks = ksupport_sequence(src, x)
                tested += 1
                if not ks.monotone_ok:
                    violations.append({"source": str(src), "x": x.tolist(), "kind": "ksupport"})
    return CriterionResult(2, "monotone top-k and k-support chains", ("topk",), not violations,
                           {"sequences": tested, "violations": violations[:5],
                            "violation_count": len(violations)})


# -- 3 --------------------------------------------------------------------------

def criterion_l0_recovery(quick: bool = False, seed: int = 42) -> CriterionResult:
    n = 100 if quick else 1000
    failures = []
    total = 0
    for pi, p in enumerate((1, 1.5, 2, 3)):
        src = Lp(p)
        for d in range(1, 11):
            for s in range(d + 1):
                rng = np.random.default_rng([seed, 3, pi, d, s])
                for _ in range(n):
                    x = planted_vector(rng, d, s)
                    total += 1
                    got = l0_from_topk(src, x)
                    if got != s:
                        failures.append({"p": p, "x": x.tolist(), "s": s, "got": got})
    return CriterionResult(3, "l0 recovery from top-k stationarity", ("gradedness",),
                           not failures, {"trials": total, "failures": len(failures),
                                          "first_failures": failures[:5]})


# -- 4 --------------------------------------------------------------------------

def _linf_tie_family(witness: dict, d: int) -> bool:
    """The falsifying pair keeps the largest modulus and shrinks something else."""
    if witness.get("subtest") == "direct":
        x, xp = np.abs(witness["x"]), np.abs(witness["x_prime"])
    else:
        y = np.abs(witness["y"])
        J = np.zeros(d, bool)
        K = np.zeros(d, bool)
        J[[i - 1 for i in witness["J"]]] = True
        K[[i - 1 for i in witness["K"]]] = True
        x, xp = np.where(J, y, 0.0), np.where(K, y, 0.0)
    smaller = x < xp
    return bool(x.max() == xp.max() and smaller.any() and np.all(xp[smaller] < xp.max()))


def criterion_osm_necessity(quick: bool = False, seed: int = 42) -> CriterionResult:
    trials = 100 if quick else 1000
    src = Lp(INF)
    seq = topk_sequence(src, [1, -7, 2])
    rec = l0_from_topk(src, [1, -7, 2])
    om = check_orthant_monotonic(src, dim=3, trials=trials, seed=seed)
    osm = check_orthant_strictly_monotonic(src, dim=3, trials=trials, seed=seed)
    replayed = osm.falsified and replay(osm, src).status == "fail"
    family = osm.falsified and _linf_tie_family(osm.witness, 3)
    # the canonical pair: (1, 1/2, 0) against (1, 1, 0)
    canon_tie = src.eval([1, 0.5, 0]) == src.eval([1, 1, 0])
    v = dual_pair_search(src, [1, 0.5, 0]).v
    dual_support_one = v.tolist() == [1.0, 0.0, 0.0]
    dps = check_dual_pair_support(src, dim=3, trials=trials, seed=seed)
    ok = (seq.values == (7.0, 7.0, 7.0) and seq.stationary_from == 1 and rec == 1
          and l0([1, -7, 2]) == 3 and om.passed and osm.falsified and replayed and family
          and canon_tie and dual_support_one and dps.falsified)
    return CriterionResult(4, "lp(inf): orthant-monotonic but not orthant-strictly monotonic",
                           ("properties", "gradedness"), ok,
                           {"topk_values": list(seq.values), "l0_from_topk": rec, "l0": 3,
                            "om": om.verdict, "osm": osm.verdict, "osm_witness": osm.witness,
                            "witness_replays": replayed, "witness_in_tie_family": family,
                            "canonical_tie": canon_tie, "dual_vector": v.tolist(),
                            "dual_pair_support": dps.verdict})


# -- 5 --------------------------------------------------------------------------

def criterion_dual_route(quick: bool = False, seed: int = 42) -> CriterionResult:
    n = 20 if quick else 200
    first_pass = []
    remaining = []
    total = 0
    for pi, p in enumerate((1.5, 2, 3)):
        src = Lp(p)
        for d in range(1, 7):
            rng = np.random.default_rng([seed, 5, pi, d])
            for _ in range(n):
                y = planted_vector(rng, d, int(rng.integers(0, d + 1)))
                total += 1
                try:
                    got = l0_from_ksupport(src, y, tol=1e-8)
                except NonConvergence:
                    got = None
                if got == l0(y):
                    continue
                first_pass.append({"p": p, "y": y.tolist(), "got": got})
                try:
                    again = l0_from_ksupport(src, y, tol=1e-10)
                except NonConvergence:
                    again = None
                if again != l0(y):
                    remaining.append({"p": p, "y": y.tolist(), "got": again})
    return CriterionResult(5, "l0 recovery from k-support stationarity", ("gradedness",),
                           not remaining, {"trials": total, "failures_at_1e-8": len(first_pass),
                                           "failures_after_rerun_1e-10": len(remaining),
                                           "first_failures": (remaining or first_pass)[:5]})


# -- 6 --------------------------------------------------------------------------

def criterion_counterexample(quick: bool = False, seed: int = 42) -> CriterionResult:
    rows = []
    ok = True
    for d in (2, 3, 5):
        for eps in (0.1, 0.5, 0.9):
            y = counterexample_family(d, eps)
            for method in ("analytic", "dual_opt"):
                seq = ksupport_sequence(Lp(1), y, method=method)
                good = seq.stationary_from == 2 and l0(y) == d
                ok &= good
                rows.append({"d": d, "eps": eps, "method": method, "values": list(seq.values),
                             "stationary_from": seq.stationary_from, "l0": l0(y)})
    return CriterionResult(6, "l1 source: k-support sequence is not strictly graded",
                           ("gradedness",), ok, {"cases": rows})


# -- 7 --------------------------------------------------------------------------

def criterion_om_equivalences(quick: bool = False, seed: int = 42) -> CriterionResult:
    trials = 100 if quick else 1000
    norms = {f"lp:{p}": (Lp(p), 3) for p in (1, 1.5, 2, 3, INF)}
    norms.update({name: (n, 2) for name, n in atomic_zoo().items()})
    rows = {}
    agree = True
    falsified_atomic = 0
    for name, (n, d) in norms.items():
        verdicts = {
            "orthant_monotonic": check_orthant_monotonic(n, d, trials, seed).verdict,
            "restriction_duality": check_restriction_duality(n, d, trials, seed).verdict,
            "birkhoff": check_birkhoff(n, dim=d, trials=trials, seed=seed).verdict,
        }
        rows[name] = verdicts
        agree &= len(set(verdicts.values())) == 1
        if isinstance(n, Atomic) and verdicts["orthant_monotonic"] == "falsified":
            falsified_atomic += 1
    ok = agree and falsified_atomic >= 1
    return CriterionResult(7, "orthant-monotonic, restriction-duality and Birkhoff verdicts agree",
                           ("properties",), ok, {"verdicts": rows,
                                                 "atomic_norms_failing_om": falsified_atomic})


# -- 8 --------------------------------------------------------------------------

def criterion_rotund_meta(quick: bool = False, seed: int = 42) -> CriterionResult:
    trials = 100 if quick else 1000
    rows = {}
    ok = True
    for p in (1.2, 1.5, 2, 4):
        for d in (2, 3, 5):
            r = check_om_rotund_implies_osm(Lp(p), d, trials, seed)
            rows[f"lp:{p}/d={d}"] = r.verdict
            ok &= r.passed
    return CriterionResult(8, "strictly convex and orthant-monotonic implies orthant-strict",
                           ("properties",), ok, {"verdicts": rows})


# -- 9 --------------------------------------------------------------------------

def _random_atomic(rng, d: int) -> Atomic:
    atoms = np.vstack([np.eye(d), rng.standard_normal((3, d))])
    return Atomic(atoms.tolist())


def criterion_bidual(quick: bool = False, seed: int = 42) -> CriterionResult:
    n = 100 if quick else 1000
    worst_lp = 0.0
    worst_atomic = 0.0
    rng0 = np.random.default_rng([seed, 9])
    atomics = list(atomic_zoo().values()) + [_random_atomic(rng0, 3), _random_atomic(rng0, 4)]
    for si, src in enumerate([Lp(1), Lp(1.5), Lp(2), Lp(3), Lp(INF)]):
        rng = np.random.default_rng([seed, 9, si])
        for t in range(n):
            x = sample_vector(rng, 1 + t % 6)
            worst_lp = max(worst_lp, _rel(bidual_eval(src, x), src.eval(x)))
    for ai, src in enumerate(atomics):
        rng = np.random.default_rng([seed, 9, 100 + ai])
        for _ in range(n):
            x = sample_vector(rng, src.dim)
            worst_atomic = max(worst_atomic, _rel(bidual_eval(src, x), src.eval(x)))
    ok = worst_lp <= 1e-9 and worst_atomic <= 1e-6
    return CriterionResult(9, "bidual norm equals the norm", ("norms",), ok,
                           {"vectors_per_source": n, "max_rel_err_lp": worst_lp,
                            "max_rel_err_atomic": worst_atomic})


# -- 10 -------------------------------------------------------------------------

def criterion_method_agreement(quick: bool = False, seed: int = 42, tol: float = 1e-8) -> CriterionResult:
    n = 20 if quick else 200
    worst = 0.0
    bad = []
    cases = 0
    for si, src in enumerate((Lp(1), Lp(2), Lp(INF))):
        for d, t in itertools.product(range(1, 7), range(n)):
            rng = np.random.default_rng([seed, 10, si, d, t])
            y = sample_vector(rng, d)
            for k in range(1, d + 1):
                a = ksupport_eval(src, k, y, tol, "dual_opt")
                b = ksupport_eval(src, k, y, tol, "gauge_decomp")
                err = _rel(a, b)
                worst = max(worst, err)
                cases += 1
                if err > 10 * tol:
                    bad.append({"source": str(src), "y": y.tolist(), "k": k,
                                "dual_opt": a, "gauge_decomp": b})
    return CriterionResult(10, "dual_opt and gauge_decomp agree", ("topk",), not bad,
                           {"vectors_per_dim": n, "cases": cases, "max_rel_diff": worst,
                            "disagreements": bad[:5]})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_closed_forms,
    2: criterion_monotone_chains,
    3: criterion_l0_recovery,
    4: criterion_osm_necessity,
    5: criterion_dual_route,
    6: criterion_counterexample,
    7: criterion_om_equivalences,
    8: criterion_rotund_meta,
    9: criterion_bidual,
    10: criterion_method_agreement,
}

GROUPS = {1: ("topk",), 2: ("topk",), 3: ("gradedness",), 4: ("properties", "gradedness"),
          5: ("gradedness",), 6: ("gradedness",), 7: ("properties",), 8: ("properties",),
          9: ("norms",), 10: ("topk",)}


def select(filter_: str | None) -> list[int]:
    """Criterion ids matching a group name or a comma-separated list of ids."""
    if not filter_:
        return sorted(CRITERIA)
    picked = []
    for token in filter_.split(","):
        token = token.strip()
        if token.isdigit() and int(token) in CRITERIA:
            picked.append(int(token))
        else:
            found = [i for i, g in GROUPS.items() if token in g]
            if not found:
                raise ValueError(f"unknown criterion or group {token!r}")
            picked.extend(found)
    return sorted(set(picked))


def run_criterion(i: int, quick: bool = False, seed: int = 42) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[i](quick=quick, seed=seed)
    res.elapsed = time.perf_counter() - t0
    return res


def run_suite(quick: bool = False, filter_: str | None = None, seed: int = 42,
              progress: Callable[[CriterionResult], None] | None = None) -> dict:
    results = []
    for i in select(filter_):
        res = run_criterion(i, quick, seed)
        if progress:
            progress(res)
        results.append(res)
    return {"quick": quick, "seed": seed, "passed": all(r.passed for r in results),
            "criteria": [r.to_dict() for r in results]}
