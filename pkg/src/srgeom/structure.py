"""Input structures and their intrinsic invariants.

A structure is a frame with constant bracket coefficients, a declared
horizontal rank, and the first ``d1`` frame vectors declared orthonormal.
From it we build the flag of distributions obtained by iterated brackets
with the horizontal bundle, the growth vector and step, and the tower of
quotient spaces with their induced inner products and dual annihilator data.

File format (UTF-8, line oriented, ``#`` comments)::

    dim <n>
    horizontal <d1>
    basis <name_1> ... <name_n>
    bracket <name_i> <name_j> = <c> <name_k> [ <c> <name_k> ... ]

Unlisted brackets are zero; listing both (i, j) and (j, i) is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    JacobiViolation,
    NotBracketGenerating,
    ParseError,
)
from .linalg import DEFAULT_TOL, Subspace, nullspace, orthonormalize, rref

Array = np.ndarray


@dataclass(frozen=True)
class StructureSpec:
    """Validated input structure.

    ``c[i, j, k]`` is the coefficient of frame vector ``k`` in the bracket of
    frame vectors ``i`` and ``j``; it is antisymmetric in ``(i, j)`` by
    construction and satisfies the Jacobi identity to ``tol``.
    """

    n: int
    d1: int
    names: tuple[str, ...]
    c: Array
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        arr = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", arr)
        arr.setflags(write=False)

    def bracket(self, u: Array, v: Array) -> Array:
        """Bracket of two vectors given by frame coordinates."""
        return np.einsum("i,j,ijk->k", u, v, self.c)

    def brackets_with_horizontal(self, u: Array) -> Array:
        """Rows: bracket of ``u`` with each horizontal frame vector."""
        return np.einsum("i,iak->ak", u, self.c[:, : self.d1, :])


def _jacobi_residual(c: Array) -> tuple[float, tuple[int, int, int]]:
    term = np.einsum("ijm,mkl->ijkl", c, c)
    total = term + np.einsum("jkm,mil->ijkl", c, c) + np.einsum("kim,mjl->ijkl", c, c)
    resid = np.abs(total).sum(axis=3)
    idx = np.unravel_index(int(np.argmax(resid)), resid.shape)
    return float(resid[idx]), idx


def make_structure(
    n: int,
    d1: int,
    names: Iterable[str],
    brackets: dict[tuple[int, int], dict[int, float]],
    tol: float = DEFAULT_TOL,
) -> StructureSpec:
    """Build and validate a structure from sparse bracket data.

    ``brackets[(i, j)][k]`` gives the coefficient of frame vector ``k`` in
    ``[e_i, e_j]`` for ``i < j`` pairs; antisymmetry is filled in.
    """
    names = tuple(names)
    if n < 1 or not (1 <= d1 <= n) or len(names) != n:
        raise ParseError("inconsistent dimensions")
    c = np.zeros((n, n, n))
    for (i, j), terms in brackets.items():
        for k, coef in terms.items():
            c[i, j, k] = coef
            c[j, i, k] = -coef
    resid, (i, j, k) = _jacobi_residual(c)
    scale = max(1.0, float(np.abs(c).max()) ** 2)
    if resid > tol * scale:
        raise JacobiViolation((names[i], names[j], names[k]), resid)
    return StructureSpec(n, d1, names, c, tol)


def parse_structure(text: str, tol: float = DEFAULT_TOL) -> StructureSpec:
    """Parse and validate a structure file."""
    n = d1 = None
    names: tuple[str, ...] | None = None
    brackets: dict[tuple[int, int], dict[int, float]] = {}
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        if key == "dim":
            n = _parse_int(parts, lineno)
        elif key == "horizontal":
            d1 = _parse_int(parts, lineno)
        elif key == "basis":
            names = tuple(parts[1:])
            if len(set(names)) != len(names):
                raise ParseError("duplicate frame names", lineno)
        elif key == "bracket":
            if n is None or d1 is None or names is None:
                raise ParseError("bracket before dim/horizontal/basis", lineno)
            i, j, terms = _parse_bracket(parts, names, lineno)
            if (i, j) in seen or (j, i) in seen:
                raise ParseError(f"bracket ({names[i]}, {names[j]}) listed twice", lineno)
            seen.add((i, j))
            brackets[(i, j)] = terms
        else:
            raise ParseError(f"unknown directive {key!r}", lineno)
    if n is None or d1 is None or names is None:
        raise ParseError("missing dim, horizontal or basis")
    if len(names) != n:
        raise ParseError(f"basis lists {len(names)} names, expected {n}")
    if not (1 <= d1 <= n):
        raise ParseError(f"horizontal rank {d1} outside 1..{n}")
    return make_structure(n, d1, names, brackets, tol)


def _parse_int(parts: list[str], lineno: int) -> int:
    if len(parts) != 2:
        raise ParseError(f"expected one argument to {parts[0]!r}", lineno)
    try:
        return int(parts[1])
    except ValueError:
        raise ParseError(f"not an integer: {parts[1]!r}", lineno) from None


def _parse_bracket(
    parts: list[str], names: tuple[str, ...], lineno: int
) -> tuple[int, int, dict[int, float]]:
    try:
        eq = parts.index("=")
    except ValueError:
        raise ParseError("bracket line lacks '='", lineno) from None
    if eq != 3:
        raise ParseError("bracket expects two frame names before '='", lineno)
    index = {name: i for i, name in enumerate(names)}
    try:
        i, j = index[parts[1]], index[parts[2]]
    except KeyError as exc:
        raise ParseError(f"unknown frame name {exc.args[0]!r}", lineno) from None
    if i == j:
        raise ParseError("bracket of a frame vector with itself", lineno)
    rhs = parts[eq + 1 :]
    if len(rhs) == 0 or len(rhs) % 2 != 0:
        raise ParseError("right-hand side must be coefficient/name pairs", lineno)
    terms: dict[int, float] = {}
    for coef_s, name in zip(rhs[0::2], rhs[1::2]):
        try:
            coef = float(coef_s)
        except ValueError:
            raise ParseError(f"not a number: {coef_s!r}", lineno) from None
        if not np.isfinite(coef):
            raise ParseError(f"non-finite coefficient {coef_s!r}", lineno)
        if name not in index:
            raise ParseError(f"unknown frame name {name!r}", lineno)
        terms[index[name]] = terms.get(index[name], 0.0) + coef
    return i, j, terms


def structure_to_text(spec: StructureSpec) -> str:
    """Serialize a structure back to the file format."""
    lines = [
        f"dim {spec.n}",
        f"horizontal {spec.d1}",
        "basis " + " ".join(spec.names),
    ]
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            terms = [
                f"{spec.c[i, j, k]:.17g} {spec.names[k]}"
                for k in range(spec.n)
                if abs(spec.c[i, j, k]) > 0
            ]
            if terms:
                lines.append(f"bracket {spec.names[i]} {spec.names[j]} = " + " ".join(terms))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Filtration:
    """Nested flag of distributions with its growth vector."""

    spaces: tuple[Subspace, ...]
    growth: tuple[int, ...]
    step: int

    def space(self, level: int) -> Subspace:
        """Flag member at the given level (level 0 is the zero space)."""
        if level <= 0:
            return Subspace(np.zeros((0, self.spaces[0].ambient_dim)))
        return self.spaces[min(level, self.step) - 1]


def compute_filtration(spec: StructureSpec) -> Filtration:
    """Grow the flag by bracketing with the horizontal bundle.

    Stops when the rank stabilizes; raises if that happens below the
    ambient dimension.
    """
    tol = spec.tol
    basis = np.eye(spec.n)[: spec.d1]
    spaces = [orthonormalize(basis, tol)]
    growth = [spec.d1]
    while spaces[-1].dim < spec.n:
        current = spaces[-1].basis
        candidates = [current]
        for row in current:
            candidates.append(spec.brackets_with_horizontal(row))
        nxt = orthonormalize(np.vstack(candidates), tol)
        if nxt.dim == spaces[-1].dim:
            raise NotBracketGenerating(nxt.dim, spec.n)
        growth.append(nxt.dim - spaces[-1].dim)
        spaces.append(nxt)
    return Filtration(tuple(spaces), tuple(growth), len(spaces))


def _canonical_subspace_basis(span_rows: Array, tol: float) -> Array:
    """Deterministic orthonormal basis depending only on the subspace."""
    reduced = rref(span_rows, tol)
    basis = orthonormalize(reduced, tol).basis.copy()
    for row in basis:
        nz = np.nonzero(np.abs(row) > tol * max(1.0, np.abs(row).max()))[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return basis


@dataclass(frozen=True)
class QuotientLevel:
    """One level of the quotient tower.

    ``reps`` rows are the canonical representatives (the component of the
    level orthogonal to the previous one, a bookkeeping section with no
    geometric meaning); ``gram`` is the induced inner product in those
    coordinates, ``ann`` an orthonormal basis of the annihilator of the
    level, and ``dual_gram`` the inverse Gram for covector classes.
    """

    level: int
    reps: Array
    gram: Array
    ann: Array
    dual_gram: Array
    onb: Array  # rows: chart coordinates of a gram-orthonormal basis

    @property
    def dim(self) -> int:
        return self.reps.shape[0]


@dataclass(frozen=True)
class QuotientTower:
    """Quotient charts, induced inner products and annihilators per level."""

    spec: StructureSpec
    filtration: Filtration
    levels: tuple[QuotientLevel, ...]

    @property
    def step(self) -> int:
        return self.filtration.step

    def level(self, m: int) -> QuotientLevel:
        return self.levels[m - 1]

    def chart(self, m: int, vectors: Array) -> Array:
        """Quotient-class coordinates of vectors in the level-``m`` chart."""
        return np.asarray(vectors, dtype=float) @ self.level(m).reps.T

    def covector_chart(self, m: int, covectors: Array) -> Array:
        """Class coordinates of covectors in the dual level-``m`` chart."""
        return np.asarray(covectors, dtype=float) @ self.level(m).reps.T

    def from_chart(self, m: int, coords: Array) -> Array:
        """Canonical representative vectors for chart coordinates."""
        return np.asarray(coords, dtype=float) @ self.level(m).reps

    def canonical_coframe(self, m: int) -> Array:
        """Deterministic coframe rows whose classes are orthonormal duals.

        Entries lie in the annihilator of the previous level; orthonormality
        is with respect to the dual Gram.
        """
        lev = self.level(m)
        coeff = np.linalg.inv(np.linalg.cholesky(lev.dual_gram))
        return coeff @ lev.reps


def _pushforward_gram(p: Array, domain_gram_inv: Array, tol: float) -> Array:
    g_inv = p @ domain_gram_inv @ p.T
    s = np.linalg.svd(g_inv, compute_uv=False)
    if s.size == 0 or s[-1] <= tol * max(s[0], 1.0):
        raise NotBracketGenerating(0, 0)  # cannot happen for a valid filtration
    g = np.linalg.inv(g_inv)
    return 0.5 * (g + g.T)


def quotient_tower(spec: StructureSpec, filtration: Filtration | None = None) -> QuotientTower:
    """Charts and induced inner products for every quotient level.

    The level-2 product is pushed forward from the wedge square of the
    horizontal space (determinant convention); higher levels from the tensor
    product of the horizontal space with the previous quotient, identifying
    the orthogonal complement of the kernel isometrically with the image.
    Dual Grams are the inverses in the paired charts.
    """
    tol = spec.tol
    filt = filtration if filtration is not None else compute_filtration(spec)
    levels: list[QuotientLevel] = []
    full = np.eye(spec.n)

    for m in range(1, filt.step + 1):
        if m == 1:
            reps = np.eye(spec.n)[: spec.d1]
            gram = np.eye(spec.d1)
        else:
            prev = filt.space(m - 1).basis
            cur = filt.space(m).basis
            proj = cur - (cur @ prev.T) @ prev
            reps = _canonical_subspace_basis(proj, tol)
            if m == 2:
                reps1 = levels[0].reps
                pairs = [(a, b) for a in range(spec.d1) for b in range(a + 1, spec.d1)]
                p = np.zeros((reps.shape[0], len(pairs)))
                for col, (a, b) in enumerate(pairs):
                    p[:, col] = reps @ (-spec.bracket(reps1[a], reps1[b]))
                gram = _pushforward_gram(p, np.eye(len(pairs)), tol)
            else:
                prev_lev = levels[-1]
                dp = spec.d1 * prev_lev.dim
                p = np.zeros((reps.shape[0], dp))
                dom_gram_inv = np.kron(np.eye(spec.d1), np.linalg.inv(prev_lev.gram))
                for a in range(spec.d1):
                    for i in range(prev_lev.dim):
                        vec = -spec.bracket(full[a], prev_lev.reps[i])
                        p[:, a * prev_lev.dim + i] = reps @ vec
                gram = _pushforward_gram(p, dom_gram_inv, tol)
        ann = _canonical_subspace_basis(nullspace(filt.space(m).basis, tol), tol)
        dual_gram = np.linalg.inv(gram)
        onb = np.linalg.inv(np.linalg.cholesky(gram))
        levels.append(QuotientLevel(m, reps, 0.5 * (gram + gram.T), ann, dual_gram, onb))
    return QuotientTower(spec, filt, tuple(levels))


def transform_frame(spec: StructureSpec, l_mat: Array, names: Iterable[str] | None = None) -> StructureSpec:
    """Structure constants after the frame change ``f_i = sum_a L[a, i] e_a``.

    The new first ``d1`` frame vectors are declared orthonormal, so a
    non-orthogonal horizontal block genuinely changes the metric.
    """
    l_mat = np.asarray(l_mat, dtype=float)
    k = np.linalg.inv(l_mat)
    c_new = np.einsum("ai,bj,abm,km->ijk", l_mat, l_mat, spec.c, k)
    return StructureSpec(
        spec.n,
        spec.d1,
        tuple(names) if names is not None else spec.names,
        c_new,
        spec.tol,
    )


def parse_check_file(text: str, tol: float = DEFAULT_TOL) -> tuple[StructureSpec, dict[int, Array]]:
    """Parse a structure file with trailing user-supplied complement blocks.

    Blocks are ``complement <level>`` followed by ``vec <c_1> ... <c_n>``
    lines as used by the ``check`` command.
    """
    struct_lines: list[str] = []
    comp: dict[int, list[list[float]]] = {}
    current: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            struct_lines.append(raw)
            continue
        parts = line.split()
        if parts[0] == "complement":
            if len(parts) != 2:
                raise ParseError("complement expects one level argument", lineno)
            try:
                current = int(parts[1])
            except ValueError:
                raise ParseError(f"not an integer level: {parts[1]!r}", lineno) from None
            if current < 2:
                raise ParseError("complement levels start at 2", lineno)
            comp.setdefault(current, [])
        elif parts[0] == "vec":
            if current is None:
                raise ParseError("vec outside a complement block", lineno)
            try:
                comp[current].append([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError("vec expects numbers", lineno) from None
        else:
            if current is not None:
                raise ParseError("structure directive after complement block", lineno)
            struct_lines.append(raw)
    spec = parse_structure("\n".join(struct_lines), tol)
    bases: dict[int, Array] = {}
    for level, rows in comp.items():
        mat = np.asarray(rows, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != spec.n:
            raise ParseError(f"complement {level}: vectors must have length {spec.n}")
        bases[level] = mat
    return spec, bases
