"""Exception types raised across the package.

Every domain error carries enough context (level, index, residual) for the
CLI to name the offending part of the input.
"""

from __future__ import annotations


class SrgeomError(Exception):
    """Base class for all domain errors."""


class ParseError(SrgeomError):
    """Structure file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class JacobiViolation(SrgeomError):
    """Structure constants fail the Jacobi identity."""

    def __init__(self, triple: tuple[str, str, str], residual: float):
        super().__init__(
            f"Jacobi identity violated on ({triple[0]}, {triple[1]}, {triple[2]}): "
            f"residual {residual:.3e}"
        )
        self.triple = triple
        self.residual = residual


class NotBracketGenerating(SrgeomError):
    """Iterated brackets stabilize below the ambient dimension."""

    def __init__(self, rank: int, dim: int):
        super().__init__(f"filtration stabilizes at rank {rank} < dimension {dim}")
        self.rank = rank
        self.dim = dim


class ShapeMismatch(SrgeomError):
    """Vector-entry matrices of incompatible shapes."""


class NotInjective(SrgeomError):
    """Affine minimization map has a kernel on the feasible set."""


class Infeasible(SrgeomError):
    """Equality constraints of a minimization are inconsistent."""


class InfeasibleW(SrgeomError):
    """Trace-constrained final step has no feasible frame.

    Under the nondegeneracy hypothesis this cannot happen, so it is surfaced
    as an internal-consistency error rather than silently relaxed.
    """


class DualityViolation(SrgeomError):
    """Coframe does not pair to the identity against the frame."""


class AnnihilationViolation(SrgeomError):
    """Coframe does not annihilate the frame it is paired with."""


class LevelOverflow(SrgeomError):
    """Bracket lands above the top filtration level with a nontrivial quotient."""


class WrongStep(SrgeomError):
    """Operation requires a specific step size."""


class NotSemiJNondegenerate(SrgeomError):
    """A symmetrized bracket-pairing map fails injectivity at some level."""

    def __init__(self, level: int, kernel_dim: int):
        super().__init__(
            f"structure is degenerate at level {level} (kernel dimension {kernel_dim})"
        )
        self.level = level
        self.kernel_dim = kernel_dim
