"""Randomized checkers for monotonicity classes and duality characterizations.

Each checker draws ``trials`` independent samples, evaluates one inequality
per sample and returns a :class:`PropertyReport`. Trial ``t`` uses the
generator ``default_rng([seed, t])`` so results do not depend on how trials
are scheduled. The first failing trial (by index) becomes the witness, and
:func:`replay` re-evaluates a stored witness.

Checkers only need ``norm.eval`` (and ``norm.dim`` when the norm has a fixed
dimension), except the dual-pair and restriction checks which need a
:class:`~graded_norms.norms.NormSpec`.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonConvergence
from .norms import (
    INF, Lp, WeightedLp, dual_pair_search, dual_then_restrict_eval, restrict_then_dual_eval,
)
from .vectors import IndexSet, numeric_support

DEFAULT_DIM = 3
DEFAULT_TRIALS = 1000
DEFAULT_SEED = 42
DEFAULT_TOL = 1e-9
DEFAULT_MARGIN = 1e-3
CHUNK = 64

PASSED, FALSIFIED, INCONCLUSIVE = "passed", "falsified", "inconclusive"


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one randomized property check.

    ``margin`` is the smallest slack seen over the evaluated trials (for a
    falsified report, the slack of the witness, which is negative or zero).
    """

    property_name: str
    verdict: str
    trials: int
    seed: int
    witness: dict | None = None
    margin: float = math.nan
    note: str = ""
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASSED

    @property
    def falsified(self) -> bool:
        return self.verdict == FALSIFIED

    def to_dict(self) -> dict:
        margin = self.margin if math.isfinite(self.margin) else None
        out = {"property": self.property_name, "verdict": self.verdict,
               "trials": self.trials, "seed": self.seed, "witness": self.witness,
               "margin": margin}
        if self.note:
            out["note"] = self.note
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class Outcome:
    status: str  # "ok", "fail", "skip" or "inconclusive"
    slack: float = math.inf
    info: dict = field(default_factory=dict)


# -- sampling -----------------------------------------------------------------

def sample_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    """Mixture of dense normal, sparse normal and signed-uniform vectors."""
    kind = rng.integers(3)
    if kind == 0:
        return rng.standard_normal(d)
    if kind == 1:
        return rng.standard_normal(d) * (rng.random(d) < 0.5) + 0.0
    return rng.uniform(-1.0, 1.0, d)


def sample_nonzero(rng: np.random.Generator, d: int) -> np.ndarray:
    x = sample_vector(rng, d)
    if not np.any(x):
        x[rng.integers(d)] = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 1.0)
    return x


def sample_subset(rng: np.random.Generator, d: int, nonempty: bool = True,
                  proper: bool = False) -> np.ndarray:
    """Random mask; ``proper`` excludes the full set when ``d >= 2``."""
    while True:
        mask = rng.random(d) < 0.5
        if nonempty and not mask.any():
            continue
        if proper and d >= 2 and mask.all():
            continue
        return mask


def _mask_from(members_one_based, d: int) -> np.ndarray:
    return IndexSet.from_one_based(members_one_based, d).mask


def _one_based(mask: np.ndarray) -> list[int]:
    return [int(i) + 1 for i in np.flatnonzero(mask)]


# -- engine -------------------------------------------------------------------

def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GRADED_NORMS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class _Check:
    name: str
    sample: Callable  # (rng, d, params) -> dict of JSON-able inputs
    evaluate: Callable  # (norm, inputs, params) -> Outcome


def _resolve_dim(norm, dim) -> int:
    fixed = getattr(norm, "dim", None)
    if dim is None:
        return fixed if fixed is not None else DEFAULT_DIM
    if fixed is not None and fixed != dim:
        raise DimensionMismatch(f"norm lives in R^{fixed}, checker asked for R^{dim}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return int(dim)


def _run(check: _Check, norm, dim, trials, seed, params) -> PropertyReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = _resolve_dim(norm, dim)
    params = dict(params, dim=d)

    def one(t: int) -> tuple[dict, Outcome]:
        rng = np.random.default_rng([seed, t])
        inputs = check.sample(rng, d, params)
        return inputs, check.evaluate(norm, inputs, params)

    margin = math.inf
    inconclusive = 0
    skipped = 0
    workers = _thread_count()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for start in range(0, trials, CHUNK):
            idx = range(start, min(trials, start + CHUNK))
            results = list(pool.map(one, idx)) if pool else [one(t) for t in idx]
            for t, (inputs, out) in zip(idx, results):
                if out.status == "fail":
                    witness = dict(inputs, slack=out.slack, trial=t, **out.info)
                    return PropertyReport(check.name, FALSIFIED, t + 1, seed, witness,
                                          out.slack, params=params)
                if out.status == "inconclusive":
                    inconclusive += 1
                elif out.status == "skip":
                    skipped += 1
                else:
                    margin = min(margin, out.slack)
    finally:
        if pool:
            pool.shutdown()
    if inconclusive or skipped == trials:
        note = (f"{inconclusive} trial(s) inconclusive" if inconclusive
                else "no trial could exercise the property")
        return PropertyReport(check.name, INCONCLUSIVE, trials, seed, None, margin, note,
                              params=params)
    return PropertyReport(check.name, PASSED, trials, seed, None, margin, params=params)


def replay(report: PropertyReport, norm) -> Outcome:
    """Re-evaluate the witness of a falsified report against ``norm``."""
    if report.witness is None:
        raise ValueError("report has no witness")
    check = _CHECKS[report.property_name]
    return check.evaluate(norm, report.witness, report.params)


def _arr(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


def _le(a: float, b: float, tol: float) -> Outcome:
    """``a <= b`` up to ``tol * b``; slack is ``b - a``."""
    slack = b - a
    return Outcome("ok" if a <= b + tol * abs(b) else "fail", slack, {"lhs": a, "rhs": b})


def _strict_lt(a: float, b: float) -> Outcome:
    slack = b - a
    return Outcome("ok" if slack > 0 else "fail", slack, {"lhs": a, "rhs": b})


# -- monotonic ----------------------------------------------------------------

def _shrink_factors(rng, d):
    # half of the coordinates (on average) keep their modulus exactly
    return np.where(rng.random(d) < 0.5, 1.0, rng.random(d))


def _sample_monotonic(rng, d, params):
    xp = sample_vector(rng, d)
    signs = rng.choice([-1.0, 1.0], d)
    x = signs * np.abs(xp) * _shrink_factors(rng, d)
    return {"x": x.tolist(), "x_prime": xp.tolist()}


def _eval_monotonic(norm, inputs, params):
    return _le(norm.eval(_arr(inputs["x"])), norm.eval(_arr(inputs["x_prime"])), params["tol"])


def check_monotonic(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                    tol=DEFAULT_TOL) -> PropertyReport:
    """``|x| <= |x'|`` componentwise implies ``||x|| <= ||x'||``; signs of ``x`` are free."""
    return _run(_CHECKS["monotonic"], norm, dim, trials, seed, {"tol": tol})


# -- orthant-monotonic --------------------------------------------------------

def _sample_om(rng, d, params):
    xp = sample_vector(rng, d)
    x = xp * _shrink_factors(rng, d)
    y = sample_vector(rng, d)
    K = sample_subset(rng, d)
    J = K & (rng.random(d) < 0.5)
    return {"x": x.tolist(), "x_prime": xp.tolist(), "y": y.tolist(),
            "J": _one_based(J), "K": _one_based(K)}


def _eval_om(norm, inputs, params):
    tol, which, d = params["tol"], params.get("subtest", "both"), params["dim"]
    slack = math.inf
    if which in ("both", "direct"):
        out = _le(norm.eval(_arr(inputs["x"])), norm.eval(_arr(inputs["x_prime"])), tol)
        if out.status == "fail":
            out.info["subtest"] = "direct"
            return out
        slack = out.slack
    if which in ("both", "subspace"):
        y = _arr(inputs["y"])
        J, K = _mask_from(inputs["J"], d), _mask_from(inputs["K"], d)
        out = _le(norm.eval(np.where(J, y, 0.0)), norm.eval(np.where(K, y, 0.0)), tol)
        if out.status == "fail":
            out.info["subtest"] = "subspace"
            return out
        slack = min(slack, out.slack)
    return Outcome("ok", slack)


def check_orthant_monotonic(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                            tol=DEFAULT_TOL, subtest: str = "both") -> PropertyReport:
    """Orthant-monotonicity, tested two ways per trial.

    ``direct``: ``|x| <= |x'|`` with ``x, x'`` in the same orthant implies
    ``||x|| <= ||x'||``. ``subspace``: ``||y_J|| <= ||y_K||`` for ``J`` inside ``K``.
    """
    if subtest not in ("both", "direct", "subspace"):
        raise ValueError(f"unknown subtest {subtest!r}")
    return _run(_CHECKS["orthant_monotonic"], norm, dim, trials, seed,
                {"tol": tol, "subtest": subtest})


# -- orthant-strictly monotonic -----------------------------------------------

def _sample_osm(rng, d, params):
    margin = params["margin"]
    xp = sample_nonzero(rng, d)
    a = np.abs(xp)
    f = _shrink_factors(rng, d)
    # one coordinate shrinks by at least margin * max|x'|
    i = rng.choice(np.flatnonzero(a >= margin * a.max()))
    f[i] = rng.uniform(0.0, 1.0 - margin * a.max() / a[i])
    x = xp * f

    y = sample_nonzero(rng, d)
    K = sample_subset(rng, d)
    K[rng.choice(np.flatnonzero(y))] = True
    yk = np.abs(np.where(K, y, 0.0))
    j = rng.choice(np.flatnonzero(yk >= margin * yk.max()))
    J = K & (rng.random(d) < 0.5)
    J[j] = False
    return {"x": x.tolist(), "x_prime": xp.tolist(), "y": y.tolist(),
            "J": _one_based(J), "K": _one_based(K)}


def _eval_osm(norm, inputs, params):
    which, d = params.get("subtest", "both"), params["dim"]
    slack = math.inf
    if which in ("both", "direct"):
        out = _strict_lt(norm.eval(_arr(inputs["x"])), norm.eval(_arr(inputs["x_prime"])))
        if out.status == "fail":
            out.info["subtest"] = "direct"
            return out
        slack = out.slack
    if which in ("both", "subspace"):
        y = _arr(inputs["y"])
        J, K = _mask_from(inputs["J"], d), _mask_from(inputs["K"], d)
        out = _strict_lt(norm.eval(np.where(J, y, 0.0)), norm.eval(np.where(K, y, 0.0)))
        if out.status == "fail":
            out.info["subtest"] = "subspace"
            return out
        slack = min(slack, out.slack)
    return Outcome("ok", slack)


def check_orthant_strictly_monotonic(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                                     margin=DEFAULT_MARGIN, subtest: str = "both") -> PropertyReport:
    """Orthant-strict monotonicity.

    ``direct``: ``|x| <= |x'|`` in a common orthant, with one coordinate
    shrunk by at least ``margin * max|x'|``, must give ``||x|| < ||x'||``.
    ``subspace``: ``||y_J|| < ||y_K||`` for ``J`` strictly inside ``K`` when
    ``y`` has an entry of size at least ``margin * max|y_K|`` on ``K \\ J``.
    No tolerance is subtracted: a tie at floating precision falsifies.
    """
    if not margin > 0:
        raise ValueError("margin must be > 0")
    if subtest not in ("both", "direct", "subspace"):
        raise ValueError(f"unknown subtest {subtest!r}")
    return _run(_CHECKS["orthant_strictly_monotonic"], norm, dim, trials, seed,
                {"margin": margin, "subtest": subtest})


# -- Birkhoff orthogonality ---------------------------------------------------

def _sample_birkhoff(rng, d, params):
    if params.get("K") is not None:
        K = _mask_from(params["K"], d)
    else:
        K = sample_subset(rng, d, nonempty=True, proper=True)
    u = np.where(K, sample_nonzero(rng, d), 0.0)
    if not np.any(u):
        u[rng.choice(np.flatnonzero(K))] = rng.uniform(0.1, 1.0)
    v = np.where(K, 0.0, sample_vector(rng, d))
    if params["strict"] and not np.any(v) and not K.all():
        v[rng.choice(np.flatnonzero(~K))] = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 1.0)
    return {"u": u.tolist(), "v": v.tolist(), "K": _one_based(K)}


def _eval_birkhoff(norm, inputs, params):
    u, v = _arr(inputs["u"]), _arr(inputs["v"])
    a, b = norm.eval(u), norm.eval(u + v)
    if params["strict"]:
        if not np.any(v):
            return Outcome("skip")
        return _strict_lt(a, b)
    return _le(a, b, params["tol"])


def check_birkhoff(norm, K: IndexSet | None = None, dim=None, trials=DEFAULT_TRIALS,
                   seed=DEFAULT_SEED, strict: bool = False, tol=DEFAULT_TOL) -> PropertyReport:
    """``F_K`` Birkhoff orthogonal to ``F_{-K}``: ``||u + v|| >= ||u||``.

    With ``strict`` the increase must be positive whenever ``v != 0``. A
    random proper ``K`` is drawn per trial when ``K`` is None.
    """
    if K is not None:
        dim = K.ambient_dim if dim is None else dim
        if K.ambient_dim != _resolve_dim(norm, dim):
            raise DimensionMismatch("index set and norm dimensions differ")
    params = {"tol": tol, "strict": bool(strict), "K": None if K is None else K.one_based()}
    name = "birkhoff_strict" if strict else "birkhoff"
    return _run(_CHECKS[name], norm, dim, trials, seed, params)


# -- dual pair support ---------------------------------------------------------

def _sample_nonzero_only(rng, d, params):
    return {"u": sample_nonzero(rng, d).tolist()}


def _linf_like(norm) -> bool:
    return isinstance(norm, (Lp, WeightedLp)) and norm.p == INF


def _eval_dual_pair(norm, inputs, params):
    tol = params["tol"]
    u = _arr(inputs["u"])
    try:
        pair = dual_pair_search(norm, u, tol)
    except NonConvergence:
        return Outcome("inconclusive")
    v = pair.v
    scale = float(np.max(np.abs(u)) * np.max(np.abs(v)))
    same_support = numeric_support(u, relative=True) == numeric_support(v, relative=True)
    aligned = bool(np.all(u * v >= -tol * scale))
    info = {"v": v.tolist(), "gap": pair.gap}
    if same_support and aligned:
        return Outcome("ok", 0.0, info)
    # for lp(inf) every dual vector lives on argmax|u_i|, so a miss is a disproof
    return Outcome("fail" if _linf_like(norm) else "inconclusive", -1.0, info)


def check_dual_pair_support(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                            tol=DEFAULT_TOL) -> PropertyReport:
    """Every ``u != 0`` has a dual vector ``v`` with the same support and ``u * v >= 0``.

    The vector returned by :func:`dual_pair_search` is tested. A miss is a
    falsification only for ``lp(inf)`` norms, whose dual vectors are known in
    closed form; otherwise it makes the report inconclusive.
    """
    return _run(_CHECKS["dual_pair_support"], norm, dim, trials, seed, {"tol": tol})


# -- restriction duality ---------------------------------------------------------

def _sample_restriction(rng, d, params):
    K = sample_subset(rng, d)
    return {"y": np.where(K, sample_vector(rng, d), 0.0).tolist(), "K": _one_based(K)}


def _eval_restriction(norm, inputs, params):
    tol, d = params["tol"], params["dim"]
    K = IndexSet.from_one_based(inputs["K"], d)
    y = _arr(inputs["y"])
    try:
        a = dual_then_restrict_eval(norm, K, y)
        b = restrict_then_dual_eval(norm, K, y, tol)
    except NonConvergence:
        return Outcome("inconclusive")
    diff = abs(a - b)
    slack = tol * max(a, b) - diff
    return Outcome("ok" if slack >= 0 else "fail", slack, {"star_K": a, "K_star": b})


def check_restriction_duality(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                              tol=DEFAULT_TOL) -> PropertyReport:
    """Dual-then-restrict equals restrict-then-dual on random ``(K, y in F_K)``."""
    return _run(_CHECKS["restriction_duality"], norm, dim, trials, seed, {"tol": tol})


# -- permutation invariance ----------------------------------------------------

def _sample_perm(rng, d, params):
    return {"x": sample_vector(rng, d).tolist(), "perm": rng.permutation(d).tolist()}


def _eval_perm(norm, inputs, params):
    x = _arr(inputs["x"])
    a, b = norm.eval(x), norm.eval(x[np.asarray(inputs["perm"], dtype=int)])
    slack = params["tol"] * max(a, b) - abs(a - b)
    return Outcome("ok" if slack >= 0 else "fail", slack, {"lhs": a, "rhs": b})


def check_permutation_invariant(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                                tol=DEFAULT_TOL) -> PropertyReport:
    return _run(_CHECKS["permutation_invariant"], norm, dim, trials, seed, {"tol": tol})


# -- strict convexity + OM => OSM ----------------------------------------------

def check_om_rotund_implies_osm(norm, dim=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED,
                                tol=DEFAULT_TOL, margin=DEFAULT_MARGIN) -> PropertyReport:
    """Consistency check: a strictly convex orthant-monotonic norm must pass the OSM check.

    Inconclusive when strict convexity is neither known nor declared, or
    when the orthant-monotonic check itself does not pass. A falsified
    report means the two checkers disagree with each other.
    """
    name = "om_rotund_implies_osm"
    if not getattr(norm, "strictly_convex", False):
        return PropertyReport(name, INCONCLUSIVE, 0, seed,
                              note="strict convexity neither known nor declared")
    om = check_orthant_monotonic(norm, dim, trials, seed, tol)
    if not om.passed:
        return PropertyReport(name, INCONCLUSIVE, om.trials, seed,
                              note=f"orthant-monotonic check {om.verdict}")
    osm = check_orthant_strictly_monotonic(norm, dim, trials, seed, margin)
    if osm.passed:
        return PropertyReport(name, PASSED, trials, seed, None, osm.margin)
    return PropertyReport(name, FALSIFIED, osm.trials, seed, osm.witness, osm.margin,
                          note="orthant-monotonic and strictly convex, yet the "
                               "orthant-strict check failed", params=osm.params)


_CHECKS = {c.name: c for c in (
    _Check("monotonic", _sample_monotonic, _eval_monotonic),
    _Check("orthant_monotonic", _sample_om, _eval_om),
    _Check("orthant_strictly_monotonic", _sample_osm, _eval_osm),
    _Check("birkhoff", _sample_birkhoff, _eval_birkhoff),
    _Check("birkhoff_strict", _sample_birkhoff, _eval_birkhoff),
    _Check("dual_pair_support", _sample_nonzero_only, _eval_dual_pair),
    _Check("restriction_duality", _sample_restriction, _eval_restriction),
    _Check("permutation_invariant", _sample_perm, _eval_perm),
)}
# the meta-check replays through the OSM evaluator
_CHECKS["om_rotund_implies_osm"] = _CHECKS["orthant_strictly_monotonic"]

CHECKERS = {
    "monotonic": check_monotonic,
    "om": check_orthant_monotonic,
    "osm": check_orthant_strictly_monotonic,
    "birkhoff": check_birkhoff,
    "birkhoff-strict": lambda norm, **kw: check_birkhoff(norm, strict=True, **kw),
    "dual-pair-support": check_dual_pair_support,
    "restriction-duality": check_restriction_duality,
    "om-rotund-osm": check_om_rotund_implies_osm,
    "permutation-invariant": check_permutation_invariant,
}
