"""Source norms: evaluation, dual norms, restriction norms and dual pairs.

Three kinds of source norm are supported:

* :class:`Lp` -- ``(sum |x_i|^p)^(1/p)``, with ``p = inf`` handled as its own case;
* :class:`WeightedLp` -- ``||w * x||_p`` for strictly positive weights;
* :class:`Atomic` -- the gauge of the convex hull of a finite, symmetric,
  spanning set of atoms. Evaluation solves a small linear program.

Atomic norms are the way to build norms outside the ``lp`` family, e.g.
norms that are not orthant-monotonic.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import DimensionMismatch, InvalidNormSpec, NonConvergence, NotInSubspace
from .vectors import IndexSet, as_vector, check_same_dim

INF = math.inf

FLAG_NAMES = frozenset({
    "permutation_invariant",
    "monotonic",
    "orthant_monotonic",
    "orthant_strictly_monotonic",
    "strictly_convex",
})

DEFAULT_TOL = 1e-8


def conjugate_exponent(p: float) -> float:
    """Return ``q`` with ``1/p + 1/q = 1``."""
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    if p < 1:
        raise InvalidNormSpec(f"p must be >= 1, got {p}")
    return p / (p - 1.0)


def _lp_rows(X: np.ndarray, p: float) -> np.ndarray:
    """l_p norm of each row of ``X``."""
    A = np.abs(X)
    if p == INF:
        return A.max(axis=1)
    if p == 1:
        return A.sum(axis=1)
    # scale by the largest modulus so tiny or huge entries neither underflow nor overflow
    m = A.max(axis=1)
    out = np.zeros(A.shape[0])
    nz = m > 0
    if np.any(nz):
        scaled = A[nz] / m[nz, None]
        out[nz] = m[nz] * np.sum(scaled ** p, axis=1) ** (1.0 / p)
    return out


def _lp(x: np.ndarray, p: float) -> float:
    return float(_lp_rows(x[None, :], p)[0])


def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidNormSpec(f"p must be in [1, inf], got {p}")
    return p


def _check_flags(flags) -> frozenset:
    flags = frozenset(flags)
    unknown = flags - FLAG_NAMES
    if unknown:
        raise InvalidNormSpec(f"unknown flags {sorted(unknown)}")
    return flags


class NormSpec:
    """Common interface of the source norms.

    Subclasses implement ``eval``, ``dual_eval`` and ``eval_rows``. The
    ``known_properties`` mapping holds facts that follow from the norm's
    closed form; ``declared_flags`` are user claims that evaluators never
    rely on without verification.
    """

    kind: str
    declared_flags: frozenset
    dim: int | None = None

    def eval(self, x) -> float:
        raise NotImplementedError

    def dual_eval(self, y) -> float:
        raise NotImplementedError

    def eval_rows(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.eval(row) for row in X])

    def known_properties(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _vec(self, x) -> np.ndarray:
        x = as_vector(x)
        if self.dim is not None and x.size != self.dim:
            raise DimensionMismatch(f"norm on R^{self.dim} applied to vector in R^{x.size}")
        return x

    def is_known(self, prop: str) -> bool:
        return self.known_properties().get(prop) is True

    @property
    def strictly_convex(self) -> bool:
        """Whether ``(R^d, ||.||)`` is known or declared to be strictly convex."""
        return self.is_known("strictly_convex") or "strictly_convex" in self.declared_flags

    @property
    def dual_strictly_convex(self) -> bool:
        return self.known_properties().get("dual_strictly_convex") is True

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class Lp(NormSpec):
    p: float = 2.0
    declared_flags: frozenset = field(default=frozenset(), compare=False)
    kind = "lp"

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_p(self.p))
        object.__setattr__(self, "declared_flags", _check_flags(self.declared_flags))

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def eval(self, x) -> float:
        return _lp(self._vec(x), self.p)

    def eval_rows(self, X) -> np.ndarray:
        return _lp_rows(np.asarray(X, dtype=float), self.p)

    def dual_eval(self, y) -> float:
        return _lp(self._vec(y), self.q)

    def known_properties(self) -> dict:
        rotund = 1 < self.p < INF
        return {
            "permutation_invariant": True,
            "monotonic": True,
            "orthant_monotonic": True,
            "orthant_strictly_monotonic": self.p < INF,
            "strictly_convex": rotund,
            "dual_strictly_convex": rotund,
        }

    def to_dict(self) -> dict:
        return {"kind": "lp", "p": "inf" if self.p == INF else self.p}

    def __str__(self):
        return f"lp:{'inf' if self.p == INF else format(self.p, 'g')}"


@dataclass(frozen=True)
class WeightedLp(NormSpec):
    p: float = 2.0
    w: tuple = ()
    declared_flags: frozenset = field(default=frozenset(), compare=False)
    kind = "weighted_lp"

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_p(self.p))
        w = tuple(float(v) for v in np.asarray(self.w, dtype=float).ravel())
        if not w:
            raise InvalidNormSpec("weighted lp needs at least one weight")
        if not all(math.isfinite(v) and v > 0 for v in w):
            raise InvalidNormSpec("weights must be finite and strictly positive")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "declared_flags", _check_flags(self.declared_flags))

    @property
    def dim(self) -> int:
        return len(self.w)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array(self.w)

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def eval(self, x) -> float:
        return _lp(self.weights * self._vec(x), self.p)

    def eval_rows(self, X) -> np.ndarray:
        return _lp_rows(np.asarray(X, dtype=float) * self.weights, self.p)

    def dual_eval(self, y) -> float:
        return _lp(self._vec(y) / self.weights, self.q)

    def known_properties(self) -> dict:
        rotund = 1 < self.p < INF
        return {
            "permutation_invariant": len(set(self.w)) == 1,
            "monotonic": True,
            "orthant_monotonic": True,
            "orthant_strictly_monotonic": self.p < INF,
            "strictly_convex": rotund,
            "dual_strictly_convex": rotund,
        }

    def to_dict(self) -> dict:
        return {"kind": "weighted_lp", "p": "inf" if self.p == INF else self.p,
                "w": list(self.w)}

    def __str__(self):
        return f"wlp:{'inf' if self.p == INF else format(self.p, 'g')}:{list(self.w)}"


@dataclass(frozen=True)
class Atomic(NormSpec):
    """Gauge of ``conv(atoms)``; ``-a`` is added for every atom ``a``."""

    atoms: tuple = ()
    declared_flags: frozenset = field(default=frozenset(), compare=False)
    kind = "atomic"

    def __post_init__(self):
        A = np.asarray(self.atoms, dtype=float)
        if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
            raise InvalidNormSpec("atomic norm needs a non-empty list of equal-length atoms")
        if not np.all(np.isfinite(A)):
            raise InvalidNormSpec("atoms must be finite")
        A = np.vstack([A, -A]) + 0.0  # no negative zeros
        A = A[np.any(A != 0, axis=1)]
        A = np.unique(A, axis=0)
        if A.shape[0] == 0 or np.linalg.matrix_rank(A) < A.shape[1]:
            raise InvalidNormSpec("atoms do not span R^d: the gauge would not be a norm")
        object.__setattr__(self, "atoms", tuple(tuple(float(v) for v in row) for row in A))
        object.__setattr__(self, "declared_flags", _check_flags(self.declared_flags))

    @property
    def dim(self) -> int:
        return len(self.atoms[0])

    @cached_property
    def atom_matrix(self) -> np.ndarray:
        """Atoms as rows."""
        A = np.array(self.atoms)
        A.flags.writeable = False
        return A

    def eval(self, x) -> float:
        x = self._vec(x)
        if not np.any(x):
            return 0.0
        A = self.atom_matrix
        res = linprog(np.ones(A.shape[0]), A_eq=A.T, b_eq=x, bounds=(0, None), method="highs")
        if res.status == 2:
            raise InvalidNormSpec("gauge LP infeasible: atoms do not span R^d")
        if res.status != 0:
            raise NonConvergence(f"gauge LP failed: {res.message}")
        return float(res.fun)

    def dual_eval(self, y) -> float:
        y = self._vec(y)
        return max(0.0, float(np.max(self.atom_matrix @ y)))

    @cached_property
    def polar_vertices(self) -> np.ndarray:
        """Vertices of the dual unit ball ``{y : <a, y> <= 1 for all atoms a}``."""
        A = self.atom_matrix
        if self.dim == 1:
            r = float(np.max(np.abs(A)))
            V = np.array([[1.0 / r], [-1.0 / r]])
        else:
            hull = ConvexHull(A)
            normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
            V = normals / (-offsets)[:, None]
            _, keep = np.unique(np.round(V, 10), axis=0, return_index=True)
            V = V[np.sort(keep)]
        V.flags.writeable = False
        return V

    def polar(self) -> "Atomic":
        """The dual norm, itself an atomic norm on the polar vertices."""
        return Atomic(tuple(map(tuple, self.polar_vertices)))

    def known_properties(self) -> dict:
        return {
            "permutation_invariant": None,
            "monotonic": None,
            "orthant_monotonic": None,
            "orthant_strictly_monotonic": None,
            # a polytope ball is rotund only on the line
            "strictly_convex": self.dim == 1,
            "dual_strictly_convex": self.dim == 1,
        }

    def to_dict(self) -> dict:
        return {"kind": "atomic", "atoms": [list(a) for a in self.atoms]}

    def __str__(self):
        return f"atomic[{len(self.atoms)} atoms in R^{self.dim}]"


# -- serialization -----------------------------------------------------------

def norm_from_dict(obj) -> NormSpec:
    if isinstance(obj, list):
        return Atomic(obj)
    try:
        kind = obj["kind"]
    except (TypeError, KeyError):
        raise InvalidNormSpec(f"not a norm spec: {obj!r}") from None
    flags = obj.get("flags", ())
    if kind == "lp":
        return Lp(obj["p"], declared_flags=flags)
    if kind == "weighted_lp":
        return WeightedLp(obj["p"], obj["w"], declared_flags=flags)
    if kind == "atomic":
        return Atomic(obj["atoms"], declared_flags=flags)
    raise InvalidNormSpec(f"unknown norm kind {kind!r}")


_COMPACT = re.compile(r"^(?P<kind>lp|wlp|atomic):(?P<rest>.+)$", re.DOTALL)


def parse_norm_spec(text: str) -> NormSpec:
    """Parse ``lp:2``, ``lp:inf``, ``wlp:1:[1,2,3]``, ``atomic:@file.json``,
    ``atomic:[[1,0],[0,1]]`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return norm_from_dict(json.loads(text))
    m = _COMPACT.match(text)
    if not m:
        raise InvalidNormSpec(f"cannot parse norm spec {text!r}")
    kind, rest = m["kind"], m["rest"].strip()
    try:
        if kind == "lp":
            return Lp(_parse_p(rest))
        if kind == "wlp":
            p, _, w = rest.partition(":")
            return WeightedLp(_parse_p(p), json.loads(w))
        if rest.startswith("@"):
            return norm_from_dict(json.loads(Path(rest[1:]).read_text()))
        return norm_from_dict(json.loads(rest))
    except (ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, InvalidNormSpec):
            raise
        raise InvalidNormSpec(f"cannot parse norm spec {text!r}: {exc}") from exc


# -- dual norms, biduals, restrictions ---------------------------------------

def _require_in_subspace(x: np.ndarray, K: IndexSet) -> None:
    if K.ambient_dim != x.size:
        raise DimensionMismatch(f"index set lives in R^{K.ambient_dim}, vector in R^{x.size}")
    if np.any(x[~K.mask] != 0):
        raise NotInSubspace(f"vector is not supported inside {K}")


def bidual_eval(n: NormSpec, x, tol: float = DEFAULT_TOL) -> float:
    """``sup { <x, y> : ||y||_* <= 1 }``, computed without calling ``n.eval``.

    For lp norms the maximizer is the Holder-equality vector; for atomic
    norms the dual ball is the polar polytope and the sup is an LP.
    """
    x = n._vec(x)
    if not np.any(x):
        return 0.0
    if isinstance(n, Atomic):
        A = n.atom_matrix
        res = linprog(-x, A_ub=A, b_ub=np.ones(A.shape[0]), bounds=(None, None),
                      method="highs")
        if res.status != 0:
            raise NonConvergence(f"polar LP failed: {res.message}")
        return float(-res.fun)
    v = _holder_vector(n, x)
    return float(x @ v) / n.dual_eval(v)


def restrict_eval(n: NormSpec, K: IndexSet, x) -> float:
    """The ``K``-restriction norm: ``||x||`` for ``x`` supported in ``K``."""
    x = n._vec(x)
    _require_in_subspace(x, K)
    return n.eval(x)


def dual_then_restrict_eval(n: NormSpec, K: IndexSet, y) -> float:
    """Restriction of the dual norm to ``F_K`` (first dual, then restriction)."""
    y = n._vec(y)
    _require_in_subspace(y, K)
    return n.dual_eval(y)


def restrict_then_dual_eval(n: NormSpec, K: IndexSet, y, tol: float = DEFAULT_TOL) -> float:
    """Dual of the ``K``-restriction norm: ``sup { <x, y> : x in F_K, ||x|| <= 1 }``."""
    y = n._vec(y)
    _require_in_subspace(y, K)
    if len(K) == 0 or not np.any(y):
        return 0.0
    mask = K.mask
    if isinstance(n, Lp):
        return _lp(y[mask], n.q)
    if isinstance(n, WeightedLp):
        return _lp(y[mask] / n.weights[mask], n.q)
    A = n.atom_matrix
    outside = A[:, ~mask]
    m = A.shape[0]
    res = linprog(-(A @ y),
                  A_ub=np.ones((1, m)), b_ub=[1.0],
                  A_eq=outside.T if outside.shape[1] else None,
                  b_eq=np.zeros(outside.shape[1]) if outside.shape[1] else None,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise NonConvergence(f"restricted dual LP failed: {res.message}")
    return float(-res.fun)


# -- dual pairs ----------------------------------------------------------------

@dataclass(frozen=True)
class DualPair:
    """Vectors ``u, v`` with ``<u, v> = ||u|| ||v||_*`` up to ``gap``."""

    u: np.ndarray
    v: np.ndarray
    norm: NormSpec
    gap: float

    def certified(self, tol: float = 1e-12) -> bool:
        scale = self.norm.eval(self.u) * self.norm.dual_eval(self.v)
        return self.gap <= tol * scale


def _lp_holder(z: np.ndarray, p: float) -> np.ndarray:
    s = np.sign(z)
    if p == 1:
        return s
    if p == INF:
        a = np.abs(z)
        return s * (a == a.max())
    if p == 2:
        return z.copy()
    a = np.abs(z)
    m = a.max()
    # |z|^(p/q) = |z|^(p-1); scale first to stay in range
    return s * (a / m) ** (p - 1.0)


def _holder_vector(n: NormSpec, u: np.ndarray) -> np.ndarray:
    if isinstance(n, Lp):
        return _lp_holder(u, n.p)
    if isinstance(n, WeightedLp):
        return n.weights * _lp_holder(n.weights * u, n.p)
    raise InvalidNormSpec("closed-form dual vectors exist only for lp and weighted lp norms; "
                          "use dual_pair_search")


def _pair(n: NormSpec, u: np.ndarray, v: np.ndarray) -> DualPair:
    v = np.asarray(v, dtype=float)
    v.flags.writeable = False
    gap = n.eval(u) * n.dual_eval(v) - float(u @ v)
    return DualPair(u=u, v=v, norm=n, gap=max(gap, 0.0))


def dual_pair_construct(n: NormSpec, u) -> DualPair:
    """Closed-form ``||.||``-dual vector of ``u`` for lp / weighted lp norms.

    ``p = 1`` gives ``sign(u)``, ``p = inf`` gives ``sign(u)`` restricted to
    ``argmax |u_i|``, otherwise ``sign(u) * |u|^(p-1)`` (up to scaling).
    """
    u = n._vec(u)
    if not np.any(u):
        raise ValueError("the zero vector has no distinguished dual vector")
    return _pair(n, u, _holder_vector(n, u))


def dual_pair_search(n: NormSpec, u, tol: float = DEFAULT_TOL) -> DualPair:
    """A maximizer of ``<u, .>`` over the dual unit ball.

    Atomic norms scan the polar-polytope vertices and return the centroid
    of the maximizing ones; other kinds use the closed form.
    """
    u = n._vec(u)
    if not np.any(u):
        raise ValueError("the zero vector has no distinguished dual vector")
    if not isinstance(n, Atomic):
        return dual_pair_construct(n, u)
    V = n.polar_vertices
    scores = V @ u
    # centroid of the maximizing face: still a maximizer, with the widest support
    best = scores >= scores.max() - 1e-12 * np.abs(scores).max()
    v = V[best].mean(axis=0)
    pair = _pair(n, u, v)
    scale = n.eval(u) * n.dual_eval(v)
    if pair.gap > tol * max(scale, 1e-300):
        raise NonConvergence("polar vertex scan did not certify a dual pair", pair.gap)
    return pair
