"""Two-species (ion/electron) transport coupled by temperature relaxation.

Each species follows the 2D anisotropic model with its own coefficients;
the coupling is a pointwise relaxation source beta*(T_other - T_self) with
beta < 0 driving the temperatures together.  One step composes an exact
implicit source step with a per-species directional split step.
"""

from dataclasses import dataclass

import numpy as np

from .heat1d import NewtonOptions, ViscosityState
from .heat2d import Params2D, State2D, step_split

__all__ = [
    "CoupledParams",
    "CoupledState",
    "source_step",
    "step_coupled",
]


@dataclass(frozen=True)
class CoupledParams:
    ions: Params2D
    electrons: Params2D
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta <= 0):
            raise ValueError("beta must be <= 0 (zero only decouples the species)")


@dataclass
class CoupledState:
    ions: State2D
    electrons: State2D

    def __post_init__(self):
        if self.ions.mesh is not self.electrons.mesh:
            raise ValueError("species must share one mesh")
        if self.ions.time != self.electrons.time:
            raise ValueError("species times must agree")

    @property
    def time(self):
        return self.ions.time


def source_step(ti, te, beta, dt):
    """Implicit relaxation step, solved exactly.

    The sum T_i + T_e is invariant pointwise; the difference is divided by
    1 - 2*beta*dt.  Both outputs are convex combinations of the inputs for
    beta <= 0, so positivity and the max principle are inherited.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = 1.0 / (1.0 - 2.0 * beta * dt)
    a = 0.5 * (1.0 - f)
    ti = np.asarray(ti, dtype=float)
    te = np.asarray(te, dtype=float)
    ti_new = a * te + (1.0 - a) * ti
    te_new = a * ti + (1.0 - a) * te
    return ti_new, te_new


def step_coupled(state, params, dt, visc_i, visc_e, mode="imex",
                 newton=NewtonOptions()):
    """Source step, then an independent split diffusion step per species."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    mesh = state.ions.mesh
    if params.beta == 0.0:
        ti, te = state.ions.T, state.electrons.T
    else:
        ti, te = source_step(state.ions.T, state.electrons.T, params.beta, dt)
    t = state.ions.time
    new_i = step_split(State2D(mesh, ti, t), params.ions, dt, visc_i,
                       mode=mode, newton=newton)
    new_e = step_split(State2D(mesh, te, t), params.electrons, dt, visc_e,
                       mode=mode, newton=newton)
    return CoupledState(new_i, new_e)
