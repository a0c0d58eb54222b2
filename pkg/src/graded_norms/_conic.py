"""Tiny builder for conic programs solved with Clarabel.

Programs have the Clarabel standard form::

    minimize    q' x
    subject to  s = b - A x,   s in K

where ``K`` is a product of zero, nonnegative, second-order and 3-d power
cones. A fresh solver is created per solve, so no solver state is shared
between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp


@dataclass
class Affine:
    """``const + sum(coef[j] * x[cols[j]])``."""

    cols: tuple = ()
    coefs: tuple = ()
    const: float = 0.0


def var(j: int, c: float = 1.0) -> Affine:
    return Affine((j,), (c,))


def const(c: float) -> Affine:
    return Affine((), (), c)


class ConicProgram:
    def __init__(self):
        self.n = 0
        self._rows: list[tuple[tuple, tuple]] = []
        self._b: list[float] = []
        self._cones: list[tuple[str, float, int]] = []  # (type, param, size)

    def add_vars(self, count: int) -> np.ndarray:
        idx = np.arange(self.n, self.n + count)
        self.n += count
        return idx

    def _push(self, cone: str, exprs: list[Affine], param: float = 0.0) -> None:
        # s = b - A x  and we want s = expr, so A = -coef, b = const
        for e in exprs:
            self._rows.append((tuple(e.cols), tuple(-c for c in e.coefs)))
            self._b.append(e.const)
        if self._cones and self._cones[-1][0] == cone and cone in ("zero", "nonneg"):
            kind, p, size = self._cones[-1]
            self._cones[-1] = (kind, p, size + len(exprs))
        else:
            self._cones.append((cone, param, len(exprs)))

    def eq(self, cols, coefs, rhs: float = 0.0) -> int:
        """``sum coefs * x[cols] == rhs``; returns the row index."""
        self._push("zero", [Affine(tuple(cols), tuple(-c for c in coefs), rhs)])
        return len(self._b) - 1

    def le(self, cols, coefs, rhs: float = 0.0) -> None:
        """``sum coefs * x[cols] <= rhs``."""
        self._push("nonneg", [Affine(tuple(cols), tuple(-c for c in coefs), rhs)])

    def soc(self, exprs: list[Affine]) -> None:
        """``exprs[0] >= ||exprs[1:]||_2``."""
        self._push("soc", exprs)

    def power(self, alpha: float, a: Affine, b: Affine, c: Affine) -> None:
        """``a^alpha * b^(1-alpha) >= |c|`` with ``a, b >= 0``."""
        self._push("pow", [a, b, c], alpha)

    def compile(self) -> "CompiledProgram":
        rows, cols, vals = [], [], []
        for i, (cs, vs) in enumerate(self._rows):
            rows.extend([i] * len(cs))
            cols.extend(cs)
            vals.extend(vs)
        m = len(self._b)
        A = sp.csc_matrix((vals, (rows, cols)), shape=(m, self.n))
        return CompiledProgram(A=A, b=np.array(self._b, dtype=float),
                               cones=tuple(self._cones), n=self.n)


@dataclass(frozen=True)
class Solution:
    status: str
    x: np.ndarray
    primal_obj: float
    dual_obj: float

    @property
    def ok(self) -> bool:
        return self.status in ("Solved", "AlmostSolved")


def _cone_objects(cones):
    out = []
    for kind, param, size in cones:
        if kind == "zero":
            out.append(clarabel.ZeroConeT(size))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(size))
        elif kind == "soc":
            out.append(clarabel.SecondOrderConeT(size))
        elif kind == "pow":
            out.append(clarabel.PowerConeT(param))
        else:  # pragma: no cover
            raise ValueError(kind)
    return out


@dataclass(frozen=True)
class CompiledProgram:
    A: sp.csc_matrix
    b: np.ndarray
    cones: tuple
    n: int

    def solve(self, q: np.ndarray, b: np.ndarray | None = None, eps: float = 1e-10,
              level: int = 0) -> Solution:
        """Solve with objective ``q`` (and optionally a replacement ``b``).

        ``level`` > 0 selects more conservative settings for retries: tighter
        iterative refinement and regularization, then shorter steps.
        """
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = eps
        settings.tol_gap_rel = eps
        settings.tol_feas = eps
        settings.tol_ktratio = min(1e-6, eps)
        settings.max_iter = 400
        if level >= 1:
            settings.iterative_refinement_reltol = 1e-16
            settings.iterative_refinement_abstol = 1e-16
            settings.iterative_refinement_max_iter = 50
            settings.static_regularization_constant = 1e-10
        if level >= 2:
            settings.max_step_fraction = 0.9
        P = sp.csc_matrix((self.n, self.n))
        solver = clarabel.DefaultSolver(P, np.asarray(q, dtype=float), self.A,
                                        self.b if b is None else np.asarray(b, dtype=float),
                                        _cone_objects(self.cones), settings)
        sol = solver.solve()
        return Solution(status=str(sol.status), x=np.array(sol.x),
                        primal_obj=float(sol.obj_val), dual_obj=float(sol.obj_val_dual))
