"""Exception types shared across the solver suite."""


class SolheatError(Exception):
    """Base class for all solver errors."""


class ConfigError(SolheatError):
    """Invalid or incomplete run configuration."""


class SingularSystemError(SolheatError):
    """A direct linear solve hit a zero pivot."""


class NonConvergenceError(SolheatError):
    """An iterative solve (Newton or CG) failed to reach tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BlowUpError(SolheatError):
    """An explicit step produced NaN/inf or a runaway max-norm."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class DegenerateProblemError(SolheatError):
    """All transport coefficients vanish; the CFL bound is undefined."""
