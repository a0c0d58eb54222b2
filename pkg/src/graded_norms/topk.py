"""Generalized top-k and k-support norms built from a source norm.

The top-k norm of ``x`` is the largest source norm of a restriction of
``x`` to at most ``k`` coordinates; the k-support norm is its dual norm.

Evaluation paths:

* top-k, ``"sorted"``: for permutation-invariant monotonic sources the best
  restriction keeps the ``k`` largest moduli;
* top-k, ``"brute"``: maximum over all subsets of size ``<= k``;
* k-support, ``"analytic"``: closed forms for the ``l1`` and ``linf`` sources;
* k-support, ``"dual_opt"``: maximize ``<x, y>`` over the top-k unit ball,
  written as one norm-ball constraint per subset;
* k-support, ``"gauge_decomp"``: minimize the sum of dual norms over
  decompositions of ``y`` into pieces supported on ``k``-subsets.

Both numeric paths are conic programs solved by Clarabel and return values
only after checking a feasibility and duality-gap certificate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _conic
from ._conic import Affine, ConicProgram
from .errors import CombinatorialBlowup, NonConvergence
from .norms import DEFAULT_TOL, INF, Atomic, Lp, NormSpec, WeightedLp, conjugate_exponent
from .vectors import as_vector, sorted_abs_desc, subset_masks

BRUTE_FORCE_MAX_DIM = 20
GAUGE_DECOMP_MAX_DIM = 8

STATIONARY_ATOL = 1e-10
ANALYTIC_RTOL = 1e-8

KSUPPORT_METHODS = ("analytic", "dual_opt", "gauge_decomp")


def stationarity_rtol(method: str, tol: float = DEFAULT_TOL) -> float:
    """Relative tolerance for "equal to the last value" comparisons."""
    return ANALYTIC_RTOL if method in ("analytic", "sorted", "brute") else 100.0 * tol


def _check_k(k: int, d: int) -> int:
    if isinstance(k, bool) or int(k) != k:
        raise ValueError(f"k must be an integer, got {k!r}")
    k = int(k)
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range [1, {d}]")
    return k


def _vec_for(source: NormSpec, x) -> np.ndarray:
    return source._vec(x)


# -- top-k --------------------------------------------------------------------

_verified_fast_path: dict = {}


def fast_path_available(source: NormSpec, d: int) -> bool:
    """Whether the sorted-moduli formula is valid for ``source`` on ``R^d``.

    Holds for permutation-invariant monotonic norms. Closed-form knowledge is
    used directly; declared flags are accepted only after the randomized
    checkers confirm them.
    """
    if source.is_known("permutation_invariant") and source.is_known("monotonic"):
        return True
    declared = source.declared_flags
    if not {"permutation_invariant", "monotonic"} <= declared:
        return False
    key = (source, d)
    if key not in _verified_fast_path:
        from .properties import check_monotonic, check_permutation_invariant

        ok = (check_monotonic(source, dim=d, trials=200, seed=0).passed
              and check_permutation_invariant(source, dim=d, trials=200, seed=0).passed)
        _verified_fast_path[key] = ok
    return _verified_fast_path[key]


def _resolve_topk_method(source: NormSpec, d: int, method: str) -> str:
    if method == "auto":
        return "sorted" if fast_path_available(source, d) else "brute"
    if method == "sorted" and not fast_path_available(source, d):
        raise ValueError(f"sorted-moduli path needs a permutation-invariant monotonic source, "
                         f"got {source}")
    if method not in ("sorted", "brute"):
        raise ValueError(f"unknown top-k method {method!r}")
    return method


def _sorted_prefixes(x: np.ndarray, ks) -> np.ndarray:
    s = sorted_abs_desc(x)
    rows = np.zeros((len(ks), x.size))
    for r, k in enumerate(ks):
        rows[r, :k] = s[:k]
    return rows


def _brute_force_rows(source: NormSpec, x: np.ndarray, k: int):
    d = x.size
    if d > BRUTE_FORCE_MAX_DIM:
        raise CombinatorialBlowup(f"brute-force top-k limited to d <= {BRUTE_FORCE_MAX_DIM}")
    masks = _masks(d, k)
    return masks, source.eval_rows(np.where(masks, x, 0.0))


@lru_cache(maxsize=512)
def _masks(d: int, k: int) -> np.ndarray:
    m = subset_masks(d, k, min_size=1)
    m.flags.writeable = False
    return m


def topk_eval(source: NormSpec, k: int, x, method: str = "auto") -> float:
    """Generalized top-k norm ``max_{|K| <= k} ||x_K||``."""
    x = _vec_for(source, x)
    k = _check_k(k, x.size)
    method = _resolve_topk_method(source, x.size, method)
    if method == "sorted":
        return float(source.eval_rows(_sorted_prefixes(x, [k]))[0])
    _, vals = _brute_force_rows(source, x, k)
    return float(vals.max())


@dataclass(frozen=True)
class NormSequenceReport:
    """Values of a top-k or k-support sequence ``k = 1..d`` for one vector."""

    values: tuple
    stationary_from: int
    monotone_ok: bool
    direction: str  # "nondecreasing" or "nonincreasing"
    rtol: float = ANALYTIC_RTOL
    atol: float = STATIONARY_ATOL

    def __len__(self):
        return len(self.values)

    def close(self, a: float, b: float) -> bool:
        return abs(a - b) <= max(self.atol, self.rtol * max(abs(a), abs(b)))

    def chain(self) -> str:
        """Render ``v1 <= v2 < v3 = v4``, comparisons made at the report tolerance."""
        parts = [f"{self.values[0]:.10g}"]
        for a, b in zip(self.values, self.values[1:]):
            if self.close(a, b):
                op = "="
            elif (b > a) == (self.direction == "nondecreasing"):
                op = "<" if self.direction == "nondecreasing" else ">"
            else:
                op = "!"  # chain violation
            parts.append(f" {op} {b:.10g}")
        return "".join(parts)

    def to_dict(self) -> dict:
        return {"values": list(self.values), "stationary_from": self.stationary_from,
                "monotone_ok": self.monotone_ok, "direction": self.direction}


def _make_report(values, direction: str, rtol: float, atol: float = STATIONARY_ATOL):
    values = [float(v) for v in values]
    last = values[-1]
    tol_last = max(atol, rtol * abs(last))
    stationary = next(i + 1 for i, v in enumerate(values) if abs(last - v) <= tol_last)
    sign = 1.0 if direction == "nondecreasing" else -1.0
    monotone = all(sign * (b - a) >= -max(atol, rtol * max(abs(a), abs(b)))
                   for a, b in zip(values, values[1:]))
    return NormSequenceReport(tuple(values), stationary, monotone, direction, rtol, atol)


def topk_sequence(source: NormSpec, x, method: str = "auto") -> NormSequenceReport:
    """Top-k values for ``k = 1..d``; nondecreasing in ``k``."""
    x = _vec_for(source, x)
    d = x.size
    method = _resolve_topk_method(source, d, method)
    if method == "sorted":
        values = source.eval_rows(_sorted_prefixes(x, range(1, d + 1)))
    else:
        masks, vals = _brute_force_rows(source, x, d)
        sizes = masks.sum(axis=1)
        per_size = np.array([vals[sizes == j].max() for j in range(1, d + 1)])
        values = np.maximum.accumulate(per_size)
    return _make_report(values, "nondecreasing", stationarity_rtol(method))


def topk_ball_contains(source: NormSpec, k: int, x, tol: float = DEFAULT_TOL) -> bool:
    return topk_eval(source, k, x) <= 1.0 + tol


# -- k-support ----------------------------------------------------------------

def has_closed_form_ksupport(source: NormSpec) -> bool:
    return isinstance(source, Lp) and source.p in (1.0, INF)


def _analytic_ksupport(source: NormSpec, k: int, y: np.ndarray) -> float:
    if not has_closed_form_ksupport(source):
        raise ValueError(f"no closed-form k-support norm for source {source}")
    a = np.abs(y)
    if source.p == 1:
        return float(max(a.sum() / k, a.max()))
    return float(a.sum())


def _known_om(source: NormSpec) -> bool:
    return isinstance(source, (Lp, WeightedLp))


def _subsets(d: int, k: int, source: NormSpec) -> list[tuple[int, ...]]:
    # for orthant-monotonic sources ||x_J|| <= ||x_K|| when J is inside K,
    # so subsets of size exactly k suffice
    sizes = [k] if _known_om(source) else range(1, k + 1)
    return [c for j in sizes for c in itertools.combinations(range(d), j)]


def _weights(source: NormSpec, d: int) -> np.ndarray:
    if isinstance(source, WeightedLp):
        return source.weights
    return np.ones(d)


@lru_cache(maxsize=256)
def _dual_opt_program(source: NormSpec, d: int, k: int) -> _conic.CompiledProgram:
    """max <x, y> s.t. ||x_K|| <= 1 for each subset K; x occupies columns 0..d-1."""
    prog = ConicProgram()
    x = prog.add_vars(d)
    subsets = _subsets(d, k, source)
    if isinstance(source, Atomic):
        A = source.atom_matrix
        m = A.shape[0]
        for K in subsets:
            lam = prog.add_vars(m)
            prog.le(lam, np.ones(m), 1.0)
            for j in range(m):
                prog.le([lam[j]], [-1.0], 0.0)
            inside = set(K)
            for i in range(d):
                # x_K = sum_j lam_j a_j ; coordinates outside K must cancel
                if i in inside:
                    prog.eq([x[i], *lam], [1.0, *(-A[:, i])], 0.0)
                else:
                    prog.eq(list(lam), list(A[:, i]), 0.0)
        return prog.compile()

    w = _weights(source, d)
    p = source.p
    if p == INF:
        for i in range(d):
            prog.le([x[i]], [w[i]], 1.0)
            prog.le([x[i]], [-w[i]], 1.0)
    elif p == 1:
        t = prog.add_vars(d)
        for i in range(d):
            prog.le([x[i], t[i]], [w[i], -1.0], 0.0)
            prog.le([x[i], t[i]], [-w[i], -1.0], 0.0)
        for K in subsets:
            prog.le([t[i] for i in K], [1.0] * len(K), 1.0)
    else:
        r = prog.add_vars(d)
        for i in range(d):
            if p == 2:
                # r_i >= (w_i x_i)^2 as a rotated second-order cone
                prog.soc([Affine((r[i],), (0.5,), 0.5), Affine((r[i],), (0.5,), -0.5),
                          _conic.var(x[i], w[i])])
            else:
                # r_i >= |w_i x_i|^p via (r_i, 1, w_i x_i) in the power cone with alpha = 1/p
                prog.power(1.0 / p, _conic.var(r[i]), _conic.const(1.0), _conic.var(x[i], w[i]))
        for K in subsets:
            prog.le([r[i] for i in K], [1.0] * len(K), 1.0)
    return prog.compile()


def _attempts(tol: float):
    # (solver tolerance, settings level): default first, then more careful retries
    eps = min(1e-10, max(tol * 1e-2, 1e-13))
    return ((eps, 0), (eps, 1), (eps, 2))


def _ksupport_dual_opt(source: NormSpec, k: int, y: np.ndarray, tol: float) -> float:
    d = y.size
    scale = float(np.max(np.abs(y)))
    yn = y / scale
    prog = _dual_opt_program(source, d, k)
    q = np.zeros(prog.n)
    q[:d] = -yn
    best = math.inf
    for eps, level in _attempts(tol):
        sol = prog.solve(q, eps=eps, level=level)
        if not sol.ok:
            continue
        x = sol.x[:d]
        top = topk_eval(source, k, x)
        violation = max(0.0, top - 1.0)
        lower = float(x @ yn) / max(1.0, top)  # rescaled into the ball: always feasible
        gap = -sol.dual_obj - lower
        if violation <= tol and gap <= tol * max(abs(lower), 1e-300):
            return lower * scale
        best = min(best, max(gap, violation))
    raise NonConvergence("dual_opt certificate failed", best)


def _dual_norm_epigraph(prog: ConicProgram, source: NormSpec, cols, coords, t: int) -> None:
    """Constrain ``t >= ||z||_*`` where ``z[coords[i]] = x[cols[i]]`` and z is 0 elsewhere."""
    if isinstance(source, Atomic):
        A = source.atom_matrix
        for a in A:
            prog.le([*cols, t], [*(a[list(coords)]), -1.0], 0.0)
        return
    w = _weights(source, source.dim or (max(coords) + 1))
    inv = [1.0 / w[i] for i in coords]
    q = conjugate_exponent(source.p)
    n = len(cols)
    if q == INF:
        for c, s in zip(cols, inv):
            prog.le([c, t], [s, -1.0], 0.0)
            prog.le([c, t], [-s, -1.0], 0.0)
    elif q == 1:
        u = prog.add_vars(n)
        for c, s, ui in zip(cols, inv, u):
            prog.le([c, ui], [s, -1.0], 0.0)
            prog.le([c, ui], [-s, -1.0], 0.0)
        prog.le([*u, t], [1.0] * n + [-1.0], 0.0)
    elif q == 2:
        prog.soc([_conic.var(t)] + [_conic.var(c, s) for c, s in zip(cols, inv)])
    else:
        r = prog.add_vars(n)
        for c, s, ri in zip(cols, inv, r):
            prog.power(1.0 / q, _conic.var(ri), _conic.var(t), _conic.var(c, s))
        prog.le([*r, t], [1.0] * n + [-1.0], 0.0)


@lru_cache(maxsize=256)
def _gauge_program(source: NormSpec, d: int, k: int):
    """min sum_K ||w_K||_* s.t. sum_K pi_K(w_K) = y.

    For sources known to be orthant-monotonic each ``w_K`` lives in ``F_K``;
    otherwise ``w_K`` is a full vector and only its ``K`` part counts toward
    ``y`` (the gauge of ``pi_K`` of the dual ball).
    Returns the compiled program, the equality rows carrying ``y``, and the
    column layout ``[(K, cols, coords, t), ...]``.
    """
    prog = ConicProgram()
    restricted = _known_om(source)
    layout = []
    for K in _subsets(d, k, source):
        coords = K if restricted else tuple(range(d))
        cols = prog.add_vars(len(coords))
        t = int(prog.add_vars(1)[0])
        layout.append((K, tuple(int(c) for c in cols), coords, t))
    for _, _, _, t in layout:
        prog.le([t], [-1.0], 0.0)
    for K, cols, coords, t in layout:
        _dual_norm_epigraph(prog, source, cols, coords, t)
    eq_rows = []
    for i in range(d):
        terms = [cols[coords.index(i)] for K, cols, coords, _ in layout if i in K]
        eq_rows.append(prog.eq(terms, [1.0] * len(terms), 0.0))
    return prog.compile(), tuple(eq_rows), tuple(layout)


def _ksupport_gauge(source: NormSpec, k: int, y: np.ndarray, tol: float) -> float:
    d = y.size
    if d > GAUGE_DECOMP_MAX_DIM:
        raise CombinatorialBlowup(f"gauge_decomp limited to d <= {GAUGE_DECOMP_MAX_DIM}")
    scale = float(np.max(np.abs(y)))
    yn = y / scale
    prog, eq_rows, layout = _gauge_program(source, d, k)
    b = prog.b.copy()
    b[list(eq_rows)] = yn
    q = np.zeros(prog.n)
    q[[t for *_, t in layout]] = 1.0
    best = math.inf
    for eps, level in _attempts(tol):
        sol = prog.solve(q, b=b, eps=eps, level=level)
        if not sol.ok:
            continue
        upper, gap = _gauge_certificate(source, sol, layout, yn)
        if gap <= tol * max(upper, 1e-300):
            return upper * scale
        best = min(best, gap)
    raise NonConvergence("gauge_decomp certificate failed", best)


def _gauge_certificate(source: NormSpec, sol, layout, yn: np.ndarray) -> tuple[float, float]:
    d = yn.size
    pieces = []
    covered = np.zeros(d)
    for K, cols, coords, _ in layout:
        w = np.zeros(d)
        w[list(coords)] = sol.x[list(cols)]
        pieces.append((K, w))
        covered[list(K)] += w[list(K)]
    # repair the equality residual so the upper bound is exact
    residual = yn - covered
    for i in range(d):
        K, w = next((K, w) for K, w in pieces if i in K)
        w[i] += residual[i]
    upper = float(sum(source.dual_eval(w) for _, w in pieces))
    lower = sol.primal_obj if math.isnan(sol.dual_obj) else sol.dual_obj
    return upper, upper - lower


def ksupport_eval(source: NormSpec, k: int, y, tol: float = DEFAULT_TOL,
                  method: str = "auto") -> float:
    """Generalized k-support norm (dual of the generalized top-k norm).

    ``method`` is one of ``"analytic"``, ``"dual_opt"``, ``"gauge_decomp"`` or
    ``"auto"`` (closed form when one exists, otherwise ``dual_opt``).
    ``gauge_decomp`` assumes an orthant-monotonic source unless the source is
    atomic, in which case the general decomposition is used.
    """
    y = _vec_for(source, y)
    k = _check_k(k, y.size)
    method = resolve_ksupport_method(source, method)
    if method == "analytic":
        return _analytic_ksupport(source, k, y)
    if not np.any(y):
        return 0.0
    if method == "dual_opt":
        return _ksupport_dual_opt(source, k, y, tol)
    return _ksupport_gauge(source, k, y, tol)


def resolve_ksupport_method(source: NormSpec, method: str) -> str:
    if method == "auto":
        return "analytic" if has_closed_form_ksupport(source) else "dual_opt"
    if method not in KSUPPORT_METHODS:
        raise ValueError(f"unknown k-support method {method!r}")
    if method == "analytic" and not has_closed_form_ksupport(source):
        raise ValueError(f"no closed-form k-support norm for source {source}")
    return method


def ksupport_sequence(source: NormSpec, y, tol: float = DEFAULT_TOL,
                      method: str = "auto") -> NormSequenceReport:
    """k-support values for ``k = 1..d``; nonincreasing in ``k``."""
    y = _vec_for(source, y)
    method = resolve_ksupport_method(source, method)
    values = [ksupport_eval(source, k, y, tol, method) for k in range(1, y.size + 1)]
    return _make_report(values, "nonincreasing", stationarity_rtol(method, tol))


def ksupport_ball_contains(source: NormSpec, k: int, y, tol: float = DEFAULT_TOL) -> bool:
    return ksupport_eval(source, k, y, tol) <= 1.0 + tol


# -- norm objects ---------------------------------------------------------------

@dataclass(frozen=True)
class TopKNorm:
    """The generalized top-k norm of ``source`` on ``R^dim`` as a norm object."""

    source: NormSpec
    k: int
    dim: int

    def __post_init__(self):
        if self.source.dim is not None and self.source.dim != self.dim:
            raise ValueError("dimension does not match the source norm")
        _check_k(self.k, self.dim)

    def eval(self, x) -> float:
        return topk_eval(self.source, self.k, x)

    def eval_rows(self, X) -> np.ndarray:
        return np.array([self.eval(r) for r in X])

    def dual_eval(self, y, tol: float = DEFAULT_TOL) -> float:
        return ksupport_eval(self.source, self.k, y, tol)

    def __str__(self):
        return f"top-{self.k}({self.source})"


@dataclass(frozen=True)
class KSupportNorm:
    """The generalized k-support norm of ``source`` on ``R^dim`` as a norm object."""

    source: NormSpec
    k: int
    dim: int
    method: str = "auto"
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _check_k(self.k, self.dim)
        resolve_ksupport_method(self.source, self.method)

    def eval(self, y) -> float:
        return ksupport_eval(self.source, self.k, y, self.tol, self.method)

    def eval_rows(self, Y) -> np.ndarray:
        return np.array([self.eval(r) for r in Y])

    def dual_eval(self, x) -> float:
        return topk_eval(self.source, self.k, x)

    def __str__(self):
        return f"{self.k}-support({self.source})"
