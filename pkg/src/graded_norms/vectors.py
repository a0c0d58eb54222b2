"""Coordinate-vector primitives.

Vectors are plain 1-d float numpy arrays. :func:`as_vector` validates and
returns a read-only copy; everything else in the library goes through it.
Index sets are 0-based internally and 1-based on the JSON/CLI boundary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import CombinatorialBlowup, DimensionMismatch

MAX_ENUMERATION_DIM = 24
NUMERIC_SUPPORT_TOL = 1e-9


def as_vector(x) -> np.ndarray:
    """Return ``x`` as a read-only finite 1-d float array."""
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    arr.flags.writeable = False
    return arr


def check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionMismatch(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")


@dataclass(frozen=True)
class IndexSet:
    """A subset ``K`` of the coordinates ``{0, ..., d-1}`` of ``R^d``."""

    members: tuple[int, ...]
    ambient_dim: int

    def __post_init__(self):
        members = tuple(sorted(set(int(i) for i in self.members)))
        if self.ambient_dim < 1:
            raise ValueError("ambient dimension must be >= 1")
        if members and (members[0] < 0 or members[-1] >= self.ambient_dim):
            raise ValueError(f"indices {members} out of range for d={self.ambient_dim}")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_one_based(cls, members: Iterable[int], ambient_dim: int) -> "IndexSet":
        members = list(members)
        if any(int(i) < 1 for i in members):
            raise ValueError("1-based indices must be >= 1")
        return cls(tuple(int(i) - 1 for i in members), ambient_dim)

    @classmethod
    def full(cls, ambient_dim: int) -> "IndexSet":
        return cls(tuple(range(ambient_dim)), ambient_dim)

    @classmethod
    def from_mask(cls, mask) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask).tolist()), mask.size)

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.members]

    def complement(self) -> "IndexSet":
        inside = set(self.members)
        return IndexSet(tuple(i for i in range(self.ambient_dim) if i not in inside),
                        self.ambient_dim)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.ambient_dim, dtype=bool)
        m[list(self.members)] = True
        return m

    def issubset(self, other: "IndexSet") -> bool:
        return set(self.members) <= set(other.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, i) -> bool:
        return i in self.members

    def __repr__(self) -> str:
        return f"IndexSet({self.one_based()}, d={self.ambient_dim})"


def support(x) -> IndexSet:
    """Exact support ``{j : x_j != 0}``; no threshold is applied."""
    x = as_vector(x)
    return IndexSet.from_mask(x != 0)


def numeric_support(x, tau: float = NUMERIC_SUPPORT_TOL, relative: bool = False) -> IndexSet:
    """Support of a solver output, treating ``|x_j| <= tau`` as zero.

    With ``relative=True`` the threshold is ``tau * max|x_j|``.
    """
    x = as_vector(x)
    thresh = tau * float(np.max(np.abs(x))) if relative else tau
    return IndexSet.from_mask(np.abs(x) > thresh)


def l0(x) -> int:
    """Number of nonzero components."""
    return int(np.count_nonzero(as_vector(x)))


def project(x, K: IndexSet) -> np.ndarray:
    """Orthogonal projection onto the coordinate subspace ``F_K``."""
    x = as_vector(x)
    if K.ambient_dim != x.size:
        raise DimensionMismatch(f"index set lives in R^{K.ambient_dim}, vector in R^{x.size}")
    out = np.where(K.mask, x, 0.0)
    out.flags.writeable = False
    return out


def sorted_abs_desc(x) -> np.ndarray:
    """Moduli of ``x`` in nonincreasing order (stable in the original index)."""
    a = np.abs(as_vector(x))
    order = np.argsort(-a, kind="stable")
    return a[order]


def sign(x) -> np.ndarray:
    return np.sign(as_vector(x))


def hadamard(x, y) -> np.ndarray:
    x, y = as_vector(x), as_vector(y)
    check_same_dim(x, y)
    return x * y


def count_subsets(d: int, k: int) -> int:
    return sum(math.comb(d, j) for j in range(k + 1))


def _check_enumerable(d: int, k: int) -> None:
    if not 0 <= k <= d:
        raise ValueError(f"need 0 <= k <= d, got k={k}, d={d}")
    if d > MAX_ENUMERATION_DIM:
        raise CombinatorialBlowup(
            f"refusing to enumerate subsets of a {d}-element set "
            f"(limit d <= {MAX_ENUMERATION_DIM})")


def subsets_of_size_at_most(d: int, k: int) -> Iterator[IndexSet]:
    """Yield every ``K`` with ``|K| <= k`` once, in lexicographic order of member lists.

    The empty set comes first, e.g. ``(), (0,), (0, 1), (0, 2), (1,), ...``.
    """
    _check_enumerable(d, k)

    def extend(prefix: tuple[int, ...], start: int) -> Iterator[IndexSet]:
        yield IndexSet(prefix, d)
        if len(prefix) == k:
            return
        for i in range(start, d):
            yield from extend(prefix + (i,), i + 1)

    yield from extend((), 0)


def subset_masks(d: int, k: int, min_size: int = 0) -> np.ndarray:
    """Boolean matrix with one row per subset ``K``, ``min_size <= |K| <= k``."""
    _check_enumerable(d, k)
    rows = []
    for size in range(min_size, k + 1):
        for combo in itertools.combinations(range(d), size):
            row = np.zeros(d, dtype=bool)
            row[list(combo)] = True
            rows.append(row)
    if not rows:
        return np.zeros((0, d), dtype=bool)
    return np.array(rows)
