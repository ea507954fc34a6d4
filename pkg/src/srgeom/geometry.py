"""Derived geometric objects over a chosen complement.

Everything here works in the adapted orthonormal frame (horizontal frame
followed by the complement blocks).  With constant structure constants the
canonical connection reduces to algebra: same-level derivatives come from
the Koszul identity projected to the level, cross-level ones from the skew
part of the bracket, with the horizontal bundle treated as level one
throughout.  The intrinsic volume density needs only the quotient tower.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complement import GradedComplement, adapted_frame
from .errors import NotSemiJNondegenerate
from .jmaps import NondegeneracyReport, check_semi_j_nondegenerate
from .structure import QuotientTower, StructureSpec, quotient_tower

Array = np.ndarray

HORIZONTAL_RULE_NOTE = (
    "connection on horizontal sections follows the same two rules with the "
    "horizontal bundle treated as level 1 (interpretation)"
)


def popp_volume(tower: QuotientTower) -> float:
    """Density of the intrinsic volume form against the frame covolume.

    Builds, for each level, covector representatives whose quotient classes
    are orthonormal for the dual Gram, wedges all of them together and
    returns the absolute determinant.  Independent of any complement.
    """
    rows = [tower.canonical_coframe(m) for m in range(1, tower.step + 1)]
    return float(abs(np.linalg.det(np.vstack(rows))))


@dataclass(frozen=True)
class ConnectionTable:
    """Connection coefficients and torsion over an adapted frame.

    ``gamma[a, b, c]`` is the coefficient of frame vector ``c`` in the
    derivative of ``b`` along ``a``; ``torsion[a, b]`` the components of
    ``T(F_a, F_b)``.  ``levels`` labels each adapted index with its block.
    """

    frame: Array
    levels: tuple[int, ...]
    gamma: Array
    torsion: Array
    same_level_orthogonal: bool
    cross_level_symmetric: bool
    note: str = HORIZONTAL_RULE_NOTE


def connection_and_torsion(
    complement: GradedComplement, spec: StructureSpec
) -> ConnectionTable:
    """Canonical connection and torsion for the metric extension.

    Also evaluates the two structural torsion properties: vanishing of the
    same-level component of ``T`` on each block, and symmetry of the
    cross-level torsion operators.
    """
    frame = adapted_frame(complement, spec)
    levels: list[int] = [1] * spec.d1
    for lb in complement.levels:
        levels.extend([lb.level] * lb.basis.shape[0])
    n = spec.n
    to_adapted = np.linalg.inv(frame.T)

    bk = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            bk[a, b] = to_adapted @ spec.bracket(frame[a], frame[b])

    gamma = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            la, lb_ = levels[a], levels[b]
            for c in range(n):
                if levels[c] != lb_:
                    continue
                if la == lb_:
                    gamma[a, b, c] = 0.5 * (bk[a, b, c] - bk[b, c, a] + bk[c, a, b])
                else:
                    gamma[a, b, c] = 0.5 * (bk[a, b, c] - bk[a, c, b])

    torsion = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            torsion[a, b] = gamma[a, b] - gamma[b, a] - bk[a, b]

    tol = 1e-9 * max(1.0, float(np.abs(spec.c).max()))
    same_ok = True
    cross_ok = True
    level_idx = {m: [i for i, lv in enumerate(levels) if lv == m] for m in set(levels)}
    for m, idx in level_idx.items():
        for a in idx:
            for b in idx:
                if np.abs(torsion[a, b][idx]).max() > tol:
                    same_ok = False
    for m, idx in level_idx.items():
        for b in range(n):
            if levels[b] == m:
                continue
            op = np.array([[torsion[b, i][j] for j in idx] for i in idx])
            if np.abs(op - op.T).max() > tol:
                cross_ok = False
    return ConnectionTable(frame, tuple(levels), gamma, torsion, same_ok, cross_ok)


def vnormal_vrigid_flags(
    table: ConnectionTable, complement: GradedComplement, tol: float = 1e-9
) -> tuple[bool, bool]:
    """Torsion-based verticality flags.

    Normal: torsion of a horizontal direction against a block stays
    orthogonal to that block.  Rigid: the trace of that pairing over an
    orthonormal vertical frame vanishes.  Normal implies rigid.
    """
    levels = table.levels
    n = len(levels)
    d1 = levels.count(1)
    scale = max(1.0, float(np.abs(table.torsion).max()))
    v_normal = True
    rigid_sums = np.zeros(d1)
    for a in range(d1):
        for i in range(d1, n):
            rigid_sums[a] += table.torsion[a, i][i]
            block = [j for j in range(n) if levels[j] == levels[i]]
            if np.abs(table.torsion[a, i][block]).max() > tol * scale:
                v_normal = False
    v_rigid = bool(np.abs(rigid_sums).max() <= tol * scale)
    if v_normal and not v_rigid:
        raise AssertionError("normal torsion without rigid torsion")
    return v_normal, v_rigid


@dataclass(frozen=True)
class LaplacianCoefficients:
    """First-order data of the horizontal sum-of-squares operator.

    ``contraction`` holds the adapted-frame components of the summed
    horizontal self-derivatives (its negative is the drift of the operator);
    ``self_adjoint_applicable`` records whether the rigidity condition that
    makes the operator formally self-adjoint against the intrinsic volume
    holds.  The second-order symbol is the identity on the horizontal bundle.
    """

    contraction: Array
    contraction_ambient: Array
    self_adjoint_applicable: bool


def horizontal_laplacian_coeffs(
    table: ConnectionTable, complement: GradedComplement
) -> LaplacianCoefficients:
    """Drift data of the horizontal Laplacian over the adapted frame."""
    d1 = table.levels.count(1)
    n = len(table.levels)
    contraction = np.zeros(n)
    for i in range(d1):
        contraction += table.gamma[i, i]
    ambient = contraction @ table.frame
    _, v_rigid = vnormal_vrigid_flags(table, complement)
    return LaplacianCoefficients(contraction, ambient, v_rigid)


def isometry_dim_bound(
    spec: StructureSpec,
    tower: QuotientTower | None = None,
    report: NondegeneracyReport | None = None,
) -> int:
    """Upper bound for the dimension of the isometry group.

    Valid only under the nondegeneracy hypothesis, which is verified first.
    """
    tower = tower if tower is not None else quotient_tower(spec)
    if report is None:
        report = check_semi_j_nondegenerate(spec, tower)
    if not report.overall:
        bad = report.first_degenerate_level()
        raise NotSemiJNondegenerate(bad.level, bad.kernel_dim)
    return spec.d1 * (spec.d1 - 3) // 2 + spec.n
