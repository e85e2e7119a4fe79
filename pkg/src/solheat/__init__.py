"""Finite-volume solvers for anisotropic edge-plasma heat transport.

Subpackages: mesh (grids and restriction), linsolve (tridiagonal/cyclic/CG),
heat1d (nonlinear parallel transport), heat2d (2D split and unsplit schemes),
coupled (two-species relaxation), diagnostics (norms, energies, order fits),
cli (config-driven runner).
"""

__version__ = "1.0.0"

from .errors import (BlowUpError, ConfigError, DegenerateProblemError,
                     NonConvergenceError, SingularSystemError, SolheatError)

__all__ = [
    "__version__",
    "SolheatError",
    "ConfigError",
    "SingularSystemError",
    "NonConvergenceError",
    "BlowUpError",
    "DegenerateProblemError",
]
