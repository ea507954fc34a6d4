"""srgeom: frame-based analysis of equiregular sub-Riemannian structures.

Given a frame with constant structure constants and a declared orthonormal
horizontal subframe, the package computes the bracket filtration, quotient
metrics, nondegeneracy verdicts, the minimal rigid complement with its
derived connection, torsion classes, intrinsic volume density, and the
isometry-dimension bound.
"""

__version__ = "0.1.0"

from .complement import (
    FrameSection,
    GradedComplement,
    a_map,
    adapted_frame,
    canonical_basis,
    inductive_step,
    min_a,
    min_s,
    minimal_rigid_complement,
    s_map,
    solve_v_normal,
    verify_v_rigid,
)
from .errors import (
    AnnihilationViolation,
    DualityViolation,
    Infeasible,
    InfeasibleW,
    JacobiViolation,
    LevelOverflow,
    NotBracketGenerating,
    NotInjective,
    NotSemiJNondegenerate,
    ParseError,
    ShapeMismatch,
    SrgeomError,
    WrongStep,
)
from .geometry import (
    ConnectionTable,
    connection_and_torsion,
    horizontal_laplacian_coeffs,
    isometry_dim_bound,
    popp_volume,
    vnormal_vrigid_flags,
)
from .jmaps import (
    JOperator,
    NondegeneracyReport,
    Step2Report,
    bracket_quotient,
    check_semi_j_nondegenerate,
    check_step2_conditions,
    jhat,
    jmap,
)
from .linalg import (
    HValuedMatrix,
    Subspace,
    hmat_inner,
    max_principal_angle,
    min_norm_affine,
    nullspace,
    orthonormalize,
)
from .structure import (
    Filtration,
    QuotientTower,
    StructureSpec,
    compute_filtration,
    make_structure,
    parse_check_file,
    parse_structure,
    quotient_tower,
    structure_to_text,
    transform_frame,
)

__all__ = [name for name in dir() if not name.startswith("_")]
