"""Numeric substrate: orthonormal subspaces, tolerant ranks, minimum-norm
points of affine families, and matrices whose entries are horizontal vectors.

Vectors and covectors are plain 1-d float arrays of ambient length; the
helpers here never attach geometric meaning to them.  All outputs are
deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import Infeasible, NotInjective, ShapeMismatch

Array = np.ndarray

DEFAULT_TOL = 1e-9


def _rows(vectors) -> Array:
    mat = np.atleast_2d(np.asarray(vectors, dtype=float))
    if mat.size and not np.all(np.isfinite(mat)):
        raise ValueError("non-finite entries")
    return mat


def orthonormalize(vectors, tol: float = DEFAULT_TOL) -> "Subspace":
    """Orthonormal basis of the span by modified Gram-Schmidt.

    A vector whose residual after projecting out the earlier ones has norm
    at most ``tol`` times the largest input norm (or ``tol`` itself when all
    inputs vanish) is discarded.  Running the function on its own output
    reproduces the basis.
    """
    if vectors is None or len(vectors) == 0:
        return Subspace(np.zeros((0, 0)), tol)
    mat = _rows(vectors)
    norms = np.linalg.norm(mat, axis=1)
    scale = norms.max() if norms.size and norms.max() > 0 else 1.0
    basis: list[Array] = []
    for row in mat:
        v = row.astype(float)
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis:
                v = v - (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            basis.append(v / nv)
    if not basis:
        return Subspace(np.zeros((0, mat.shape[1])), tol)
    return Subspace(np.array(basis), tol)


@dataclass(frozen=True)
class Subspace:
    """Subspace given by orthonormal basis rows."""

    basis: Array
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.basis.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v: Array) -> Array:
        if self.dim == 0:
            return np.zeros_like(np.asarray(v, dtype=float))
        return self.basis.T @ (self.basis @ v)

    def contains(self, v: Array, tol: float | None = None) -> bool:
        v = np.asarray(v, dtype=float)
        t = self.tol if tol is None else tol
        scale = max(1.0, float(np.linalg.norm(v)))
        return float(np.linalg.norm(v - self.project(v))) <= t * scale


def nullspace(mat: Array, tol: float = DEFAULT_TOL) -> Array:
    """Orthonormal rows spanning the right null space of ``mat``."""
    mat = _rows(mat)
    if mat.shape[0] == 0:
        return np.eye(mat.shape[1])
    _, s, vt = np.linalg.svd(mat)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * max(smax, 1.0)))
    return vt[rank:]


def rank(mat: Array, tol: float = DEFAULT_TOL) -> int:
    mat = _rows(mat)
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1.0)))


def rref(mat: Array, tol: float = DEFAULT_TOL, col_order: Sequence[int] | None = None) -> Array:
    """Reduced row-echelon form with partial pivoting.

    ``col_order`` selects the pivot search order; the returned matrix is in
    the original column order.  Rows of (near) zeros are dropped.
    """
    a = _rows(mat).copy()
    nrows, ncols = a.shape
    order = list(range(ncols)) if col_order is None else list(col_order)
    scale = np.abs(a).max() if a.size else 0.0
    if scale == 0.0:
        return np.zeros((0, ncols))
    r = 0
    for j in order:
        if r >= nrows:
            break
        piv = r + int(np.argmax(np.abs(a[r:, j])))
        if abs(a[piv, j]) <= tol * scale:
            continue
        a[[r, piv]] = a[[piv, r]]
        a[r] = a[r] / a[r, j]
        for i in range(nrows):
            if i != r:
                a[i] = a[i] - a[i, j] * a[r]
        r += 1
    out = a[:r]
    out[np.abs(out) <= tol * scale] = 0.0
    return out


def max_principal_angle(a: Array, b: Array) -> float:
    """Largest principal angle between the row spans of two bases (radians)."""
    qa = orthonormalize(a).basis
    qb = orthonormalize(b).basis
    if qa.shape[0] != qb.shape[0]:
        return float(np.pi / 2)
    if qa.shape[0] == 0:
        return 0.0
    s = np.linalg.svd(qa @ qb.T, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


@dataclass(frozen=True)
class HValuedMatrix:
    """Matrix whose entries are horizontal vectors.

    Stored as an array of shape ``(rows, cols, h)`` where ``h`` is the
    horizontal rank; the trace inner product is the sum of entrywise
    Euclidean products.
    """

    entries: Array

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 3:
            raise ShapeMismatch(f"expected 3-d entry array, got shape {arr.shape}")
        object.__setattr__(self, "entries", arr)
        arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape[:2]

    @property
    def hdim(self) -> int:
        return self.entries.shape[2]

    def flat(self) -> Array:
        return self.entries.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def trace(self) -> Array:
        r, c = self.shape
        if r != c:
            raise ShapeMismatch("trace requires a square matrix")
        return self.entries.diagonal(axis1=0, axis2=1).sum(axis=1)

    def __add__(self, other: "HValuedMatrix") -> "HValuedMatrix":
        if self.entries.shape != other.entries.shape:
            raise ShapeMismatch("shapes differ")
        return HValuedMatrix(self.entries + other.entries)

    def __mul__(self, scalar: float) -> "HValuedMatrix":
        return HValuedMatrix(self.entries * float(scalar))

    __rmul__ = __mul__


def hmat_inner(a: HValuedMatrix, b: HValuedMatrix) -> float:
    """Trace inner product: sum over entries of horizontal dot products."""
    if a.entries.shape != b.entries.shape:
        raise ShapeMismatch(f"shapes {a.entries.shape} vs {b.entries.shape}")
    return float(np.sum(a.entries * b.entries))


def _eliminate_constraints(a: Array, b: Array, p: int, tol: float) -> tuple[Array, Array]:
    """Affine parametrization z = z0 + N y of {z : A z = b}."""
    a = np.asarray(a, dtype=float).reshape(-1, p)
    b = np.asarray(b, dtype=float).reshape(-1)
    z0, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = np.linalg.norm(a @ z0 - b)
    scale = max(1.0, float(np.linalg.norm(b)), float(np.abs(a).max()) if a.size else 1.0)
    if resid > tol * scale:
        raise Infeasible(f"constraint residual {resid:.3e}")
    return z0, nullspace(a, tol).T  # N columns span ker A


def min_norm_affine(
    offset: HValuedMatrix,
    images: Sequence[HValuedMatrix],
    constraints: tuple[Array, Array] | None = None,
    tol: float = DEFAULT_TOL,
) -> tuple[Array, float]:
    """Unique minimizer of ``|offset + sum(z_i * images_i)|`` over z.

    Optional equality constraints ``A z = b`` are eliminated by an affine
    parametrization of the feasible set before projecting.  The map must be
    injective on the feasible set; the normal equations are solved by an
    orthogonal decomposition, never by iterative search.
    """
    p = len(images)
    o = offset.flat()
    m = (
        np.stack([im.flat() for im in images], axis=1)
        if p
        else np.zeros((o.size, 0))
    )
    if any(im.entries.shape != offset.entries.shape for im in images):
        raise ShapeMismatch("image shape differs from offset shape")
    if constraints is not None:
        z0, n = _eliminate_constraints(constraints[0], constraints[1], p, tol)
    else:
        z0, n = np.zeros(p), np.eye(p)
    mn = m @ n
    if n.shape[1] > 0:
        s = np.linalg.svd(mn, compute_uv=False)
        if s.size == 0 or s[-1] <= tol * max(s[0], 1.0) or mn.shape[0] < mn.shape[1]:
            raise NotInjective(
                f"minimization map is rank deficient on the feasible set "
                f"({n.shape[1]} parameters)"
            )
        y, *_ = np.linalg.lstsq(mn, -(o + m @ z0), rcond=None)
        z = z0 + n @ y
    else:
        z = z0
    value = float(np.linalg.norm(o + m @ z))
    return z, value
