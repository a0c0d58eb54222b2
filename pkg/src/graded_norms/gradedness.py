"""Graded norm sequences and recovery of the number of nonzeros.

A nondecreasing sequence of norms ``N_1 <= ... <= N_d`` is increasingly
graded when, for every ``x``, the sequence has reached its final value
``N_d(x)`` by index ``l0(x)``; it is strictly graded when it reaches it
exactly there. Top-k sequences of orthant-strictly monotonic sources are
strictly increasingly graded, so ``l0`` is the stationarity index. The
k-support sequence plays the same role in the nonincreasing direction when
the source is orthant-monotonic and its dual norm is strictly convex.

The level sets ``{l0 <= k}`` are then ``{ ||x|| - top_k(x) <= 0 }``, a
difference of two norms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .norms import DEFAULT_TOL, NormSpec
from .properties import FALSIFIED, INCONCLUSIVE, PASSED, PropertyReport
from .topk import (
    STATIONARY_ATOL, NormSequenceReport, ksupport_eval, ksupport_sequence,
    resolve_ksupport_method, stationarity_rtol, topk_eval, topk_sequence,
)
from .vectors import l0

INCREASING, DECREASING = "increasing", "decreasing"
PLANTED_LOW, PLANTED_HIGH = 0.1, 10.0


def _close(a: float, b: float, rtol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= max(STATIONARY_ATOL, rtol * max(abs(a), abs(b)))


def l0_from_topk(source: NormSpec, x, tol: float = DEFAULT_TOL, method: str = "auto") -> int:
    """Stationarity index of the top-k sequence of ``x`` (0 for ``x = 0``).

    Equals ``l0(x)`` when the source is orthant-strictly monotonic and is a
    lower bound on it for any orthant-monotonic source.
    """
    x = source._vec(x)
    if not np.any(x):
        return 0
    return topk_sequence(source, x, method).stationary_from


def l0_from_ksupport(source: NormSpec, y, tol: float = DEFAULT_TOL, method: str = "auto") -> int:
    """Smallest ``k`` whose k-support norm of ``y`` equals the dual norm of ``y``.

    Exact when the source is orthant-monotonic and its dual norm is strictly
    convex. Returns 0 for ``y = 0`` and ``d`` if no ``k`` matches (which can
    only happen for sources that are not orthant-monotonic).
    """
    y = source._vec(y)
    if not np.any(y):
        return 0
    method = resolve_ksupport_method(source, method)
    rtol = stationarity_rtol(method, tol)
    target = source.dual_eval(y)
    for k in range(1, y.size + 1):
        if _close(ksupport_eval(source, k, y, tol, method), target, rtol):
            return k
    return y.size


def dc_level_membership(source: NormSpec, x, k: int, tol: float = DEFAULT_TOL,
                        form: str = "primal", method: str = "auto") -> bool:
    """Test ``l0(x) <= k`` through a difference of two norms.

    ``form="primal"``: ``||x|| - top_k(x) <= 0`` (exact for orthant-strictly
    monotonic sources). ``form="dual"``: ``ksupport_k(x) - ||x||_* <= 0``
    (exact for orthant-monotonic sources with a strictly convex dual norm).
    Both comparisons allow the stationarity tolerance.
    """
    x = source._vec(x)
    d = x.size
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= d:
        raise ValueError(f"k={k!r} out of range [0, {d}]")
    k = int(k)
    if not np.any(x):
        return True
    if k == 0:
        return False
    if form == "primal":
        lhs, rhs, rtol = source.eval(x), topk_eval(source, k, x, method), stationarity_rtol("sorted")
    elif form == "dual":
        method = resolve_ksupport_method(source, method)
        lhs, rhs = ksupport_eval(source, k, x, tol, method), source.dual_eval(x)
        rtol = stationarity_rtol(method, tol)
    else:
        raise ValueError(f"unknown form {form!r}")
    return lhs - rhs <= max(STATIONARY_ATOL, rtol * abs(rhs))


# -- per-vector classification -------------------------------------------------

@dataclass(frozen=True)
class GradednessVerdict:
    """Gradedness of one sequence at one vector.

    ``forms`` holds the three equivalent statements of the definition:
    ``a`` the chain pattern around index ``l0``, ``b`` the implication (or
    equivalence) ``l0 <= l  =>  N_l = N_d`` for every ``l``, and ``c`` the
    minimum-index formula. ``forms_agree`` is False when they disagree.
    """

    direction: str
    strict: bool
    holds_for_vector: bool
    l0_true: int
    l0_recovered: int
    sequence: NormSequenceReport
    forms: dict = field(default_factory=dict)

    @property
    def forms_agree(self) -> bool:
        return len(set(self.forms.values())) <= 1

    def to_dict(self) -> dict:
        return {"direction": self.direction, "strict": self.strict,
                "holds_for_vector": self.holds_for_vector, "l0_true": self.l0_true,
                "l0_recovered": self.l0_recovered, "forms": dict(self.forms),
                "forms_agree": self.forms_agree, "sequence": self.sequence.to_dict()}


def _forms(seq: NormSequenceReport, s: int, strict: bool, direction: str) -> dict:
    d = len(seq)
    zero = all(v == 0 for v in seq.values)
    # prepend index 0: the zero norm (increasing) or +inf (decreasing)
    v0 = 0.0 if direction == INCREASING or zero else math.inf
    vals = (v0, *seq.values)
    eq = [_close(v, vals[d], seq.rtol) for v in vals]
    mono = seq.monotone_ok
    first = next(k for k in range(d + 1) if eq[k])
    tail = all(eq[k] for k in range(max(s, 1), d + 1))
    if strict:
        step = s == 0 or not eq[s - 1]
        a = mono and tail and step
        b = mono and all((s <= k) == eq[k] for k in range(1, d + 1))
        c = mono and s == first
    else:
        a = mono and tail
        b = mono and all(eq[k] for k in range(1, d + 1) if s <= k)
        c = mono and s >= first
    return {"a": a, "b": b, "c": c}


def grade_vector(source: NormSpec, x, direction: str = INCREASING, strict: bool = True,
                 tol: float = DEFAULT_TOL, method: str = "auto") -> GradednessVerdict:
    """Check the graded-sequence statements for the top-k (increasing) or
    k-support (decreasing) sequence of ``x``."""
    x = source._vec(x)
    if direction == INCREASING:
        seq = topk_sequence(source, x, method)
    elif direction == DECREASING:
        seq = ksupport_sequence(source, x, tol, method)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    s = l0(x)
    forms = _forms(seq, s, strict, direction)
    recovered = 0 if s == 0 else seq.stationary_from
    return GradednessVerdict(direction, strict, all(forms.values()), s, recovered, seq, forms)


# -- sampling and aggregate classification -----------------------------------------

def planted_vector(rng: np.random.Generator, d: int, s: int) -> np.ndarray:
    """Vector with exactly ``s`` nonzeros of modulus in ``[0.1, 10]`` and random signs."""
    x = np.zeros(d)
    idx = rng.choice(d, size=s, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], s) * rng.uniform(PLANTED_LOW, PLANTED_HIGH, s)
    return x


def counterexample_family(d: int, eps: float) -> np.ndarray:
    """``(eps/(d-1), ..., eps/(d-1), 1)``: its l1-source k-support sequence is
    already stationary at ``k = 2`` although all ``d`` entries are nonzero."""
    if d < 2:
        raise ValueError("needs d >= 2")
    y = np.full(d, eps / (d - 1))
    y[-1] = 1.0
    return y


def default_probes(d: int, direction: str) -> list[np.ndarray]:
    if direction != DECREASING or d < 2:
        return []
    return [counterexample_family(d, eps) for eps in (0.1, 0.5, 0.9)]


@dataclass(frozen=True)
class GradednessClassification:
    source: NormSpec
    dim: int
    direction: str
    strict: bool
    verdict: str
    trials: int
    seed: int
    witness: dict | None = None
    divergences: tuple = ()

    @property
    def holds(self) -> bool:
        return self.verdict == PASSED

    def to_dict(self) -> dict:
        return {"source": self.source.to_dict(), "dim": self.dim, "direction": self.direction,
                "strict": self.strict, "verdict": self.verdict, "trials": self.trials,
                "seed": self.seed, "witness": self.witness,
                "form_divergences": list(self.divergences)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def classify_gradedness(source: NormSpec, dim: int | None = None, direction: str = INCREASING,
                        strict: bool = True, trials: int = 1000, seed: int = 42,
                        tol: float = DEFAULT_TOL, probes=None,
                        method: str = "auto") -> GradednessClassification:
    """Test gradedness on probe vectors, then on random planted-sparsity vectors.

    The planted ``l0`` is uniform on ``{0, ..., d}``. The first vector where
    the chosen statement fails becomes the witness. Disagreements between the
    three forms of the definition are listed in ``divergences``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = dim or source.dim or 3
    if probes is None:
        probes = default_probes(d, direction)
    vectors = [(np.asarray(p, dtype=float), True) for p in probes]
    divergences = []
    count = 0
    for t in range(len(vectors) + trials):
        if t < len(vectors):
            x, probe = vectors[t]
        else:
            rng = np.random.default_rng([seed, t - len(vectors)])
            x, probe = planted_vector(rng, d, int(rng.integers(0, d + 1))), False
        g = grade_vector(source, x, direction, strict, tol, method)
        count += 1
        if not g.forms_agree:
            divergences.append({"x": x.tolist(), "forms": g.forms})
        if not g.holds_for_vector:
            witness = {"x": x.tolist(), "probe": probe, **g.to_dict()}
            return GradednessClassification(source, d, direction, strict, FALSIFIED, count,
                                            seed, witness, tuple(divergences))
    return GradednessClassification(source, d, direction, strict, PASSED, count, seed,
                                    None, tuple(divergences))


def check_level_set_sphere_identity(source: NormSpec, k: int, dim: int | None = None,
                                    trials: int = 1000, seed: int = 42,
                                    tol: float = DEFAULT_TOL, probes=None,
                                    method: str = "auto") -> PropertyReport:
    """On the dual unit sphere, ``l0(y) <= k`` iff ``ksupport_k(y) <= 1``.

    Requires an orthant-monotonic source with strictly convex dual norm.
    Half of the random trials plant ``l0 <= k`` (exercising the forward
    implication), half plant ``l0 > k`` (the converse).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = dim or source.dim or 3
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range [1, {d}]")
    method = resolve_ksupport_method(source, method)
    rtol = stationarity_rtol(method, tol)
    if probes is None:
        probes = default_probes(d, DECREASING)
    name = "level_set_sphere_identity"
    n_probe = len(probes)
    margin = math.inf
    for t in range(n_probe + trials):
        if t < n_probe:
            y = np.asarray(probes[t], dtype=float)
        else:
            rng = np.random.default_rng([seed, t - n_probe])
            lo, hi = (1, k) if (t - n_probe) % 2 == 0 or k == d else (k + 1, d)
            y = planted_vector(rng, d, int(rng.integers(lo, hi + 1)))
        y = y / source.dual_eval(y)
        val = ksupport_eval(source, k, y, tol, method)
        sparse = l0(y) <= k
        inside = val <= 1.0 + max(STATIONARY_ATOL, rtol)
        if sparse != inside:
            witness = {"y": y.tolist(), "l0": l0(y), "k": k, "ksupport": val,
                       "failed_direction": "only_if" if sparse else "if",
                       "probe": t < n_probe}
            return PropertyReport(name, FALSIFIED, t + 1, seed, witness, 1.0 - val,
                                  params={"k": k, "dim": d})
        margin = min(margin, abs(1.0 - val) if not sparse else math.inf)
    return PropertyReport(name, PASSED, n_probe + trials, seed, None, margin,
                          params={"k": k, "dim": d})
