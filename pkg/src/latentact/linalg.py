"""Dense vector and matrix helpers used by every other module.

Vectors are 1-D float64 numpy arrays and matrices are 2-D float64 arrays.
``dot`` sums left to right in plain Python so that audit numbers do not
depend on the BLAS build; bulk scoring elsewhere uses numpy directly.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9
RANK_TOL = 1e-9
MIN_NORM = 1e-9


class DimensionError(ValueError):
    pass


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate and copy ``values`` into a finite 1-D float64 array."""
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError(f"{name} must be 1-D with at least one entry, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    m = np.array(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} must be 2-D and non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError(f"dot expects 1-D vectors, got shapes {a.shape} and {b.shape}")
    if a.shape != b.shape:
        raise DimensionError(f"dot dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    total = 0.0
    for p in map(operator.mul, a.tolist(), b.tolist()):
        total += p
    return total


def norm(a) -> float:
    """Euclidean length, rescaled by the largest entry so tiny vectors do not underflow to 0."""
    a = np.asarray(a, dtype=np.float64)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    s = a / scale
    return scale * math.sqrt(dot(s, s))


@dataclass(frozen=True)
class OrthogonalBasis:
    """``n`` mutually orthogonal non-zero vectors of ``R^n``, stored as rows."""

    vectors: np.ndarray

    def __post_init__(self):
        v = as_matrix(self.vectors, "basis")
        if v.shape[0] != v.shape[1]:
            raise DimensionError(f"basis must hold n vectors of dim n, got shape {v.shape}")
        norms = [norm(row) for row in v]
        for i, nrm in enumerate(norms):
            if nrm < MIN_NORM:
                raise ValueError(f"basis vector {i} has norm {nrm:.3g} < {MIN_NORM}")
        for i in range(len(v)):
            for j in range(i + 1, len(v)):
                d = dot(v[i], v[j])
                if abs(d) > ORTHO_TOL * norms[i] * norms[j]:
                    raise ValueError(f"basis vectors {i} and {j} are not orthogonal (dot={d:.3g})")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.vectors)

    def __getitem__(self, i):
        return self.vectors[i]


def standard_basis(n: int) -> OrthogonalBasis:
    if n < 1:
        raise ValueError("n must be >= 1")
    return OrthogonalBasis(np.eye(n))


def random_orthogonal_basis(n: int, seed: int) -> OrthogonalBasis:
    """Orthonormal basis from Gram-Schmidt on seeded Gaussian draws.

    Each new vector is orthogonalized twice against the accepted ones; a
    draw that loses more than ``1 - 1e-6`` of its length is discarded and
    redrawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    accepted: list[np.ndarray] = []
    while len(accepted) < n:
        w = rng.standard_normal(n)
        start = np.linalg.norm(w)
        for _ in range(2):
            for q in accepted:
                w = w - dot(q, w) * q
        length = norm(w)
        if length <= 1e-6 * start:
            continue
        accepted.append(w / length)
    return OrthogonalBasis(np.array(accepted))


def row_reduce(m, tol: float = RANK_TOL) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form with partial pivoting.

    A pivot whose magnitude is at most ``tol`` times the largest absolute
    entry of the input is treated as zero. Returns the reduced matrix and
    the pivot column indices.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = np.array(m, dtype=np.float64)
    if r.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {r.shape}")
    rows, cols = r.shape
    scale = float(np.max(np.abs(r))) if r.size else 0.0
    cutoff = tol * scale
    pivots: list[int] = []
    row = 0
    for col in range(cols):
        if row >= rows:
            break
        p = row + int(np.argmax(np.abs(r[row:, col])))
        if abs(r[p, col]) <= cutoff or r[p, col] == 0.0:
            r[row:, col] = 0.0
            continue
        if p != row:
            r[[row, p]] = r[[p, row]]
        r[row] /= r[row, col]
        others = np.arange(rows) != row
        r[others] -= np.outer(r[others, col], r[row])
        r[others, col] = 0.0
        pivots.append(col)
        row += 1
    return r, pivots


def rank(m, tol: float = RANK_TOL) -> int:
    return len(row_reduce(m, tol)[1])


def null_vector(m, tol: float = RANK_TOL) -> np.ndarray | None:
    """A unit-norm ``a`` with ``m @ a ~ 0``, or None if the columns are independent.

    The first free column of the echelon form gets coefficient 1 and the
    pivot variables follow by back-substitution.
    """
    r, pivots = row_reduce(m, tol)
    cols = r.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    if not free:
        return None
    a = np.zeros(cols)
    a[free[0]] = 1.0
    for i, pc in enumerate(pivots):
        a[pc] = -r[i, free[0]]
    return a / np.linalg.norm(a)
