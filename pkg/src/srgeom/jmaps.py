"""Bracket-structure maps between quotient levels and nondegeneracy checks.

The quotient bracket pairs classes from two levels into the class of minus
their bracket one level up.  Pairing that with a covector class gives linear
operators between quotients; symmetrizing over a coframe gives the maps
whose injectivity the whole minimization pipeline depends on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WrongStep
from .linalg import DEFAULT_TOL, HValuedMatrix, nullspace
from .structure import QuotientTower, StructureSpec

Array = np.ndarray


def bracket_quotient(k: int, m: int, a: Array, b: Array, tower: QuotientTower) -> Array:
    """Class of ``-[A, B]`` one level up, in chart coordinates.

    ``a`` is a level-``k`` class and ``b`` a level-``m`` class, both in chart
    coordinates.  Above the top level the quotient is trivial and the zero
    class (an empty chart) is returned.
    """
    lvl = k + m
    if lvl > tower.step:
        return np.zeros(0)
    spec = tower.spec
    va = tower.from_chart(k, np.asarray(a, dtype=float))
    vb = tower.from_chart(m, np.asarray(b, dtype=float))
    return tower.chart(lvl, -spec.bracket(va, vb))


@dataclass(frozen=True)
class JOperator:
    """Operator from the level-``m`` quotient to the level-``k`` quotient.

    ``matrix`` acts on chart coordinates.  It satisfies, for all classes a, b:
    ``<J a, b>_k = phi(-[A, B])`` with A, B representatives of a, b.
    """

    m: int
    k: int
    matrix: Array
    phi_chart: Array

    def __call__(self, a: Array) -> Array:
        return self.matrix @ np.asarray(a, dtype=float)


def jmap(m: int, k: int, phi: Array, tower: QuotientTower) -> JOperator:
    """Operator pairing a covector class with the quotient bracket.

    ``phi`` is an ambient covector representing a class in the dual of the
    level-``(m+k)`` quotient.
    """
    lvl_mk = tower.level(m + k)
    lvl_k = tower.level(k)
    lvl_m = tower.level(m)
    u = lvl_mk.reps @ np.asarray(phi, dtype=float)
    n_mat = np.zeros((lvl_k.dim, lvl_m.dim))
    for a in range(lvl_m.dim):
        ea = np.zeros(lvl_m.dim)
        ea[a] = 1.0
        for b in range(lvl_k.dim):
            eb = np.zeros(lvl_k.dim)
            eb[b] = 1.0
            beta = bracket_quotient(m, k, ea, eb, tower)
            n_mat[b, a] = float(u @ beta) if beta.size else 0.0
    matrix = np.linalg.inv(lvl_k.gram) @ n_mat
    return JOperator(m, k, matrix, u)


def jhat(k: int, coframe: Array, z_chart: Array, tower: QuotientTower) -> HValuedMatrix:
    """Symmetrized pairing of a level-``k`` coframe against a row of classes.

    ``coframe`` rows are ambient covectors forming a level-``k`` coframe;
    ``z_chart`` has one row per coframe entry holding chart coordinates of a
    level-``(k-1)`` class.  Entry (i, j) is ``J[phi_i](Z_j) + J[phi_j](Z_i)``
    expressed as a horizontal vector.
    """
    coframe = np.atleast_2d(np.asarray(coframe, dtype=float))
    z_chart = np.atleast_2d(np.asarray(z_chart, dtype=float))
    dk = coframe.shape[0]
    ops = [jmap(k - 1, 1, coframe[i], tower) for i in range(dk)]
    d1 = tower.spec.d1
    entries = np.zeros((dk, dk, d1))
    cols = [ops[i].matrix @ z_chart.T for i in range(dk)]  # cols[i][:, j] = J_i(Z_j)
    for i in range(dk):
        for j in range(dk):
            entries[i, j] = cols[i][:, j] + cols[j][:, i]
    return HValuedMatrix(entries)


def assemble_jhat_matrix(
    k: int, tower: QuotientTower, coframe: Array | None = None
) -> tuple[Array, int]:
    """Matrix of the symmetrized level-``k`` map over gram-orthonormal inputs.

    Columns run over one-hot rows (slot j, basis i) of the level-``(k-1)``
    orthonormal chart basis; rows are flattened horizontal-valued entries.
    """
    if coframe is None:
        coframe = tower.canonical_coframe(k)
    dk = coframe.shape[0]
    prev = tower.level(k - 1)
    p = dk * prev.dim
    cols = []
    for j in range(dk):
        for i in range(prev.dim):
            z = np.zeros((dk, prev.dim))
            z[j] = prev.onb[i]
            cols.append(jhat(k, coframe, z, tower).flat())
    mat = np.stack(cols, axis=1) if cols else np.zeros((dk * dk * tower.spec.d1, 0))
    return mat, p


@dataclass(frozen=True)
class LevelVerdict:
    level: int
    injective: bool
    kernel_dim: int
    sigma_min: float


@dataclass(frozen=True)
class NondegeneracyReport:
    """Per-level injectivity verdicts for the symmetrized maps."""

    levels: tuple[LevelVerdict, ...]
    overall: bool
    trace_surjective: bool | None

    def first_degenerate_level(self) -> LevelVerdict | None:
        for lv in self.levels:
            if not lv.injective:
                return lv
        return None


def check_semi_j_nondegenerate(
    spec: StructureSpec, tower: QuotientTower, tol: float | None = None
) -> NondegeneracyReport:
    """Test injectivity of every symmetrized level map by tolerant rank.

    Also reports whether the trace of the level-2 map is onto the horizontal
    space, which the trace-constrained final minimization step relies on.
    Negative verdicts are results, not errors.
    """
    t = spec.tol if tol is None else tol
    verdicts = []
    for k in range(2, tower.step + 1):
        mat, p = assemble_jhat_matrix(k, tower)
        s = np.linalg.svd(mat, compute_uv=False) if mat.size else np.zeros(0)
        smax = s[0] if s.size else 0.0
        rk = int(np.sum(s > t * max(smax, 1.0)))
        kernel = p - rk
        sigma_min = float(s[min(p, s.size) - 1]) if s.size and p <= mat.shape[0] else 0.0
        if p > mat.shape[0]:
            sigma_min = 0.0
        verdicts.append(LevelVerdict(k, kernel == 0, kernel, sigma_min))
    overall = all(v.injective for v in verdicts)
    trace_surjective: bool | None = None
    if tower.step >= 2:
        coframe = tower.canonical_coframe(2)
        d2 = coframe.shape[0]
        cols = []
        for j in range(d2):
            for i in range(spec.d1):
                z = np.zeros((d2, spec.d1))
                z[j, i] = 1.0
                cols.append(jhat(2, coframe, z, tower).trace())
        tmat = np.stack(cols, axis=1)
        s = np.linalg.svd(tmat, compute_uv=False)
        trace_surjective = bool(np.sum(s > t * max(s[0], 1.0)) == spec.d1)
    return NondegeneracyReport(tuple(verdicts), overall, trace_surjective)


@dataclass(frozen=True)
class Step2Report:
    """Sufficient-condition flags for structures of step two."""

    j_nondegenerate: bool
    iso_covector_exists: bool
    kernel_sum_condition: bool
    seed: int
    n_samples: int
    min_abs_det: float


def _unit_covector_from_coeffs(coeffs: Array, tower: QuotientTower) -> Array:
    """Ambient covector with dual-norm-one class from chart coefficients."""
    lev = tower.level(2)
    norm = float(np.sqrt(coeffs @ lev.dual_gram @ coeffs))
    return (coeffs / norm) @ lev.reps


def check_step2_conditions(
    spec: StructureSpec,
    tower: QuotientTower,
    seed: int = 0,
    n_samples: int = 64,
) -> Step2Report:
    """Evaluate the three independent sufficient conditions at step two.

    The universal quantifier over covectors is approximated by a recorded
    deterministic sample grid plus seeded random unit covectors: any
    determinant vanishing to tolerance flips the first flag to false.
    """
    if tower.step != 2:
        raise WrongStep(f"step is {tower.step}, expected 2")
    tol = spec.tol
    d2 = tower.level(2).dim
    rng = np.random.default_rng(seed)

    coeff_samples: list[Array] = []
    eye = np.eye(d2)
    for i in range(d2):
        coeff_samples.append(eye[i])
        coeff_samples.append(-eye[i])
        for j in range(i + 1, d2):
            coeff_samples.append((eye[i] + eye[j]) / np.sqrt(2.0))
            coeff_samples.append((eye[i] - eye[j]) / np.sqrt(2.0))
    for _ in range(n_samples):
        v = rng.normal(size=d2)
        coeff_samples.append(v / np.linalg.norm(v))

    dets = []
    iso_found = False
    for coeffs in coeff_samples:
        phi = _unit_covector_from_coeffs(np.asarray(coeffs, dtype=float), tower)
        det = float(np.linalg.det(jmap(1, 1, phi, tower).matrix))
        dets.append(abs(det))
        if abs(det) > tol:
            iso_found = True
    j_nondeg = all(d > tol for d in dets)

    coframe = tower.canonical_coframe(2)
    kernel_sum = _kernel_sum_condition(coframe, tower, tol)
    if not kernel_sum:
        for _ in range(8):
            f = _random_orthogonal(d2, rng)
            if _kernel_sum_condition(f @ coframe, tower, tol):
                kernel_sum = True
                break
    return Step2Report(
        j_nondeg, iso_found, kernel_sum, seed, len(coeff_samples), float(min(dets))
    )


def _kernel_sum_condition(coframe: Array, tower: QuotientTower, tol: float) -> bool:
    mats = [jmap(1, 1, phi, tower).matrix for phi in coframe]
    kernels = [nullspace(m_, tol) for m_ in mats]
    stacked = np.vstack([k_ for k_ in kernels if k_.size]) if kernels else np.zeros((0, 0))
    if stacked.size == 0:
        return True  # all kernels trivial
    from .linalg import orthonormalize

    n_basis = orthonormalize(stacked, tol).basis
    if n_basis.shape[0] == 0:
        return True
    j_sum = sum(mats)
    restricted = j_sum @ n_basis.T
    s = np.linalg.svd(restricted, compute_uv=False)
    return bool(s.size and s[-1] > tol * max(s[0], 1.0))


def _random_orthogonal(d: int, rng: np.random.Generator) -> Array:
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))
