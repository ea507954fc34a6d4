"""Construction of the minimal rigid complement and its verifiers.

The driver walks the filtration top-down.  At each stage it refines the
carried frame sections by unique minimum-norm corrections (the symmetrized
pairing for the stage's own level, the plain pairing for higher levels) and
emits one new section dual to a deterministic coframe of the stage
annihilator.  The final stage replaces the plain minimization of the level-2
section by a trace-constrained one, which is exactly what makes the output
satisfy the vertical rigidity identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    AnnihilationViolation,
    DualityViolation,
    Infeasible,
    InfeasibleW,
    NotSemiJNondegenerate,
    SrgeomError,
)
from .jmaps import check_semi_j_nondegenerate, jhat, jmap, NondegeneracyReport
from .linalg import HValuedMatrix, min_norm_affine, nullspace
from .structure import QuotientTower, StructureSpec, quotient_tower

Array = np.ndarray

Variant = Literal["minimal-rigid", "alternate"]


@dataclass(frozen=True)
class FrameSection:
    """Representatives of a level's quotient frame, with its dual coframe.

    ``vectors`` rows are genuine frame-coordinate vectors whose classes are
    orthonormal in the level quotient; they are pinned down to ``modulus``
    (modulus 0 means honest vector fields).  ``coframe`` rows are covectors
    in the annihilator of level ``level - 1`` pairing to the identity.
    """

    level: int
    modulus: int
    vectors: Array
    coframe: Array

    def __post_init__(self):
        np.asarray(self.vectors).setflags(write=False)
        np.asarray(self.coframe).setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


def _dpairing(coframe: Array, vectors: Array, spec: StructureSpec) -> Array:
    """Array d[i, j, a] = dphi^i(E_j, X_a) = -phi^i([E_j, X_a])."""
    coframe = np.atleast_2d(np.asarray(coframe, dtype=float))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    brackets = np.einsum("ji,iak->jak", vectors, spec.c[:, : spec.d1, :])
    return -np.einsum("ik,jak->ija", coframe, brackets)


def s_map(
    coframe: Array,
    vectors: Array,
    spec: StructureSpec,
    check: bool = True,
) -> HValuedMatrix:
    """Symmetrized coframe differential along a dual frame.

    Entry (i, j) is the horizontal vector pairing to
    ``dphi^i(E_j, X) + dphi^j(E_i, X)`` for horizontal X.
    """
    coframe = np.atleast_2d(np.asarray(coframe, dtype=float))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if check:
        pairing = coframe @ vectors.T
        if not np.allclose(pairing, np.eye(coframe.shape[0]), atol=1e-8):
            raise DualityViolation(
                f"coframe/frame pairing differs from identity by "
                f"{np.abs(pairing - np.eye(coframe.shape[0])).max():.3e}"
            )
    d = _dpairing(coframe, vectors, spec)
    return HValuedMatrix(d + d.transpose(1, 0, 2))


def a_map(
    coframe: Array,
    vectors: Array,
    spec: StructureSpec,
    check: bool = True,
) -> HValuedMatrix:
    """Coframe differential against an annihilated frame.

    Entry (i, j) is the horizontal vector representing ``dphi^i(E_j, .)`` on
    the horizontal bundle; requires the coframe to annihilate the frame.
    """
    coframe = np.atleast_2d(np.asarray(coframe, dtype=float))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if check:
        pairing = coframe @ vectors.T
        if not np.allclose(pairing, 0.0, atol=1e-8):
            raise AnnihilationViolation(
                f"coframe pairs nontrivially with frame: {np.abs(pairing).max():.3e}"
            )
    return HValuedMatrix(_dpairing(coframe, vectors, spec))


@dataclass(frozen=True)
class TraceRecord:
    """One minimization solved by the driver, kept for auditing.

    ``offset_flat`` and ``images`` are the affine data (flattened), ``z`` the
    unique solution in the gram-orthonormal parameter chart, ``value`` the
    minimal norm.  ``constraints`` holds (A, b) for the trace-constrained
    step, else None.
    """

    kind: str
    level: int
    coframe_level: int
    offset_flat: Array
    images: Array  # (q, p)
    constraints: tuple[Array, Array] | None
    z: Array
    value: float


def _apply_correction(
    section: FrameSection, z: Array, tower: QuotientTower, z_level: int
) -> FrameSection:
    lev = tower.level(z_level)
    coeff = z.reshape(section.dim, lev.dim)
    adds = (coeff @ lev.onb) @ lev.reps
    return FrameSection(
        section.level, section.modulus - 1, section.vectors + adds, section.coframe
    )


def min_s(
    section: FrameSection, tower: QuotientTower, trace: list[TraceRecord] | None = None
) -> FrameSection:
    """Unique norm-minimizing refinement of a section one modulus down,
    using the symmetrized pairing with its own coframe."""
    spec = tower.spec
    m = section.level
    prev = tower.level(section.modulus)
    offset = s_map(section.coframe, section.vectors, spec)
    images = []
    for j in range(section.dim):
        for i in range(prev.dim):
            z = np.zeros((section.dim, prev.dim))
            z[j] = prev.onb[i]
            images.append(jhat(m, section.coframe, z, tower))
    z, value = min_norm_affine(offset, images, None, spec.tol)
    refined = _apply_correction(section, z, tower, section.modulus)
    if trace is not None:
        trace.append(
            TraceRecord(
                "min_s",
                m,
                m,
                offset.flat(),
                np.stack([im.flat() for im in images], axis=1),
                None,
                z,
                value,
            )
        )
    return refined


def min_a(
    coframe: Array,
    coframe_level: int,
    section: FrameSection,
    tower: QuotientTower,
    trace: list[TraceRecord] | None = None,
) -> FrameSection:
    """Unique norm-minimizing refinement of a higher section one modulus
    down, using the plain pairing with a lower-level coframe that
    annihilates it."""
    spec = tower.spec
    prev = tower.level(section.modulus)
    offset = a_map(coframe, section.vectors, spec)
    ops = [jmap(coframe_level - 1, 1, phi, tower) for phi in np.atleast_2d(coframe)]
    dm = len(ops)
    images = []
    for j in range(section.dim):
        for i in range(prev.dim):
            entries = np.zeros((dm, section.dim, spec.d1))
            zc = prev.onb[i]
            for ii in range(dm):
                entries[ii, j] = ops[ii].matrix @ zc
            images.append(HValuedMatrix(entries))
    z, value = min_norm_affine(offset, images, None, spec.tol)
    refined = _apply_correction(section, z, tower, section.modulus)
    if trace is not None:
        trace.append(
            TraceRecord(
                "min_a",
                section.level,
                coframe_level,
                offset.flat(),
                np.stack([im.flat() for im in images], axis=1),
                None,
                z,
                value,
            )
        )
    return refined


def _annihilator_rows(
    tower: QuotientTower, level: int, sections: list[Array]
) -> Array:
    """Covector rows annihilating the flag below ``level`` and the sections."""
    blocks = [tower.filtration.space(level - 1).basis]
    blocks.extend(sections)
    rows = nullspace(np.vstack([b for b in blocks if b.size]), tower.spec.tol)
    if rows.shape[0] != tower.level(level).dim:
        raise SrgeomError(
            f"annihilator at level {level} has rank {rows.shape[0]}, "
            f"expected {tower.level(level).dim}"
        )
    return rows


def _coframe_in(rows: Array, level: int, tower: QuotientTower) -> Array:
    """Deterministic coframe inside the span of covector rows.

    Classes are orthonormalized against the dual Gram in row order, then
    sign-fixed so the leading chart coefficient is positive.
    """
    lev = tower.level(level)
    chart = rows @ lev.reps.T  # class coordinates of each row
    dual = lev.dual_gram
    coeffs = np.eye(rows.shape[0])
    ortho: list[Array] = []
    for i in range(rows.shape[0]):
        u = chart[i].astype(float)
        ci = coeffs[i].astype(float)
        for uj, cj in ortho:
            proj = float(u @ dual @ uj)
            u = u - proj * uj
            ci = ci - proj * cj
        norm = float(np.sqrt(u @ dual @ u))
        u, ci = u / norm, ci / norm
        lead = np.nonzero(np.abs(u) > 1e-12 * max(1.0, np.abs(u).max()))[0]
        if lead.size and u[lead[0]] < 0:
            u, ci = -u, -ci
        ortho.append((u, ci))
    return np.array([ci for _, ci in ortho]) @ rows


def _dual_frame(coframe: Array, level: int, tower: QuotientTower) -> Array:
    """Canonical representatives dual to a coframe of the level."""
    lev = tower.level(level)
    u = coframe @ lev.reps.T
    y = np.linalg.inv(u).T
    return y @ lev.reps


def inductive_step(
    m: int,
    sections: dict[int, FrameSection],
    tower: QuotientTower,
    trace: list[TraceRecord] | None = None,
) -> dict[int, FrameSection]:
    """One stage of the driver: refine all carried sections one modulus down
    and emit the new level-``m`` section dual to the stage annihilator."""
    r = tower.step
    phi = sections[m + 1].coframe
    new: dict[int, FrameSection] = {}
    for j in range(r, m + 1, -1):
        new[j] = min_a(phi, m + 1, sections[j], tower, trace)
    new[m + 1] = min_s(sections[m + 1], tower, trace)
    rows = _annihilator_rows(tower, m, [new[j].vectors for j in range(m + 1, r + 1)])
    coframe_m = _coframe_in(rows, m, tower)
    vectors_m = _dual_frame(coframe_m, m, tower)
    new[m] = FrameSection(m, m - 1, vectors_m, coframe_m)
    return new


@dataclass(frozen=True)
class LevelBasis:
    level: int
    basis: Array  # rows span the partial complement; classes orthonormal

    def __post_init__(self):
        np.asarray(self.basis).setflags(write=False)


@dataclass(frozen=True)
class GradedComplement:
    """Direct-sum complement of the horizontal bundle, one block per level.

    Bases are orthonormal for the intrinsic metric extension (their quotient
    classes are orthonormal), so concatenating the horizontal frame with the
    blocks gives an adapted orthonormal frame.
    """

    levels: tuple[LevelBasis, ...]
    provenance: str
    trace: tuple[TraceRecord, ...] = field(default=(), compare=False, repr=False)
    coframes: tuple[Array, ...] = field(default=(), compare=False, repr=False)

    def basis(self, level: int) -> Array:
        for lb in self.levels:
            if lb.level == level:
                return lb.basis
        raise KeyError(level)

    @property
    def level_numbers(self) -> tuple[int, ...]:
        return tuple(lb.level for lb in self.levels)


def minimal_rigid_complement(
    spec: StructureSpec,
    tower: QuotientTower | None = None,
    variant: Variant = "minimal-rigid",
    report: NondegeneracyReport | None = None,
) -> GradedComplement:
    """Run the full top-down construction of the natural complement.

    Checks the nondegeneracy hypothesis first and fails hard when it does
    not hold.  ``variant="alternate"`` drops the trace constraint in the
    final step, trading vertical rigidity for an unconstrained minimum.
    """
    tower = tower if tower is not None else quotient_tower(spec)
    if report is None:
        report = check_semi_j_nondegenerate(spec, tower)
    if not report.overall:
        bad = report.first_degenerate_level()
        raise NotSemiJNondegenerate(bad.level, bad.kernel_dim)
    r = tower.step
    trace: list[TraceRecord] = []
    if r == 1:
        return GradedComplement((), variant, ())

    coframe_r = tower.canonical_coframe(r)
    sections: dict[int, FrameSection] = {
        r: FrameSection(r, r - 1, _dual_frame(coframe_r, r, tower), coframe_r)
    }
    for m in range(r - 1, 1, -1):
        sections = inductive_step(m, sections, tower, trace)

    spec_ = tower.spec
    phi2 = sections[2].coframe
    for j in range(r, 2, -1):
        sections[j] = min_a(phi2, 2, sections[j], tower, trace)

    r_vec = np.zeros(spec_.d1)
    for m in range(3, r + 1):
        r_vec += s_map(sections[m].coframe, sections[m].vectors, spec_).trace()

    sec2 = sections[2]
    offset = s_map(phi2, sec2.vectors, spec_)
    images = []
    for j in range(sec2.dim):
        for i in range(spec_.d1):
            z = np.zeros((sec2.dim, spec_.d1))
            z[j, i] = 1.0
            images.append(jhat(2, phi2, z, tower))
    constraints = None
    if variant == "minimal-rigid":
        a_mat = np.stack([im.trace() for im in images], axis=1)
        b_vec = -r_vec - offset.trace()
        constraints = (a_mat, b_vec)
    try:
        z, value = min_norm_affine(offset, images, constraints, spec_.tol)
    except Infeasible as exc:
        raise InfeasibleW(f"trace-constrained step infeasible: {exc}") from exc
    trace.append(
        TraceRecord(
            "w_step" if variant == "minimal-rigid" else "final_unconstrained",
            2,
            2,
            offset.flat(),
            np.stack([im.flat() for im in images], axis=1),
            constraints,
            z,
            value,
        )
    )
    vec2 = sec2.vectors + z.reshape(sec2.dim, spec_.d1) @ np.eye(spec_.n)[: spec_.d1]
    sections[2] = FrameSection(2, 0, vec2, phi2)

    levels = tuple(LevelBasis(m, sections[m].vectors) for m in range(2, r + 1))
    coframes = tuple(sections[m].coframe for m in range(2, r + 1))
    return GradedComplement(levels, variant, tuple(trace), coframes)


def rigidity_vector(complement: GradedComplement, spec: StructureSpec) -> Array:
    """Sum over an adapted vertical frame of the dual-coframe differentials
    evaluated on the frame, one component per horizontal direction."""
    frame = adapted_frame(complement, spec)
    dual = np.linalg.inv(frame).T
    total = np.zeros(spec.d1)
    for idx in range(spec.d1, spec.n):
        u, psi = frame[idx], dual[idx]
        for a in range(spec.d1):
            total[a] += -float(psi @ spec.bracket(u, np.eye(spec.n)[a]))
    return total


def adapted_frame(complement: GradedComplement, spec: StructureSpec) -> Array:
    """Rows: horizontal frame followed by the complement bases, level order."""
    blocks = [np.eye(spec.n)[: spec.d1]]
    blocks.extend(lb.basis for lb in complement.levels)
    frame = np.vstack(blocks)
    if frame.shape != (spec.n, spec.n):
        raise SrgeomError("complement blocks do not complete the frame")
    if abs(np.linalg.det(frame)) < 1e-12:
        raise SrgeomError("complement is not transverse to the horizontal flag")
    return frame


def verify_v_rigid(complement: GradedComplement, spec: StructureSpec) -> float:
    """Largest horizontal component of the rigidity sum; zero means rigid."""
    if not complement.levels:
        return 0.0
    return float(np.abs(rigidity_vector(complement, spec)).max())


@dataclass(frozen=True)
class VNormalResult:
    exists: bool
    complement: GradedComplement | None
    residuals: dict[int, float]


def solve_v_normal(
    spec: StructureSpec, tower: QuotientTower | None = None
) -> VNormalResult:
    """Decide whether a complement with vanishing symmetrized pairings exists.

    Such a complement is unique and must coincide with the minimal rigid
    one, so it suffices to measure the levelwise pairing norms of that
    output (reported per level).
    """
    tower = tower if tower is not None else quotient_tower(spec)
    comp = minimal_rigid_complement(spec, tower)
    if not comp.levels:
        return VNormalResult(True, comp, {})
    frame = adapted_frame(comp, spec)
    dual = np.linalg.inv(frame).T
    residuals: dict[int, float] = {}
    start = spec.d1
    for lb in comp.levels:
        d = lb.basis.shape[0]
        psi = dual[start : start + d]
        residuals[lb.level] = s_map(psi, lb.basis, spec).norm()
        start += d
    scale = max(1.0, float(np.abs(spec.c).max()))
    exists = all(v <= 1e-8 * scale for v in residuals.values())
    return VNormalResult(exists, comp if exists else None, residuals)


def coordinate_levels(tower: QuotientTower) -> tuple[int, ...]:
    """Filtration level of each frame coordinate direction (lowest member of
    the flag containing it)."""
    spec = tower.spec
    eye = np.eye(spec.n)
    out = []
    for i in range(spec.n):
        for m in range(1, tower.step + 1):
            if tower.filtration.space(m).contains(eye[i]):
                out.append(m)
                break
        else:
            out.append(tower.step)
    return tuple(out)


def canonical_basis(basis: Array, tower: QuotientTower, tol: float = 1e-9) -> Array:
    """Reported form of a complement basis: reduced row echelon with pivots
    searched through the highest filtration coordinate block first (input
    order within a block), original column order preserved in the output."""
    from .linalg import rref

    levels = coordinate_levels(tower)
    order = sorted(range(len(levels)), key=lambda i: (-levels[i], i))
    return rref(np.atleast_2d(basis), tol, col_order=order)
