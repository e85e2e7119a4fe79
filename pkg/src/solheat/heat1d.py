"""1D nonlinear parallel heat transport with limiter boundary outflow.

Cell-centred finite volumes: the interior face flux is proportional to the
difference of the 7/2-powers of the adjacent cell values, the boundary flux
models the limiter (+gamma*T at s=0, -gamma*T at s=1).  Three time
discretizations are provided: explicit, fully implicit (Newton with a
tridiagonal Jacobian) and a linearly implicit IMEX scheme whose stiff part
is a constant-coefficient viscous surrogate nu * d2/ds2.

Powers are sign-preserving (sign(T)*|T|^p) so a transient negative iterate
inside Newton keeps the problem well defined; converged physical solutions
stay nonnegative.

The batched sweep functions operate on (m, n) stacks of independent rows;
the 2D split scheme drives them with one row per mesh line.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BlowUpError, DegenerateProblemError, NonConvergenceError
from .linsolve import cyclic_batched, thomas_batched
from .mesh import Mesh1D

__all__ = [
    "Params1D",
    "State1D",
    "ViscosityState",
    "NewtonOptions",
    "parallel_flux",
    "boundary_flux",
    "cfl_dt",
    "step_explicit",
    "step_implicit",
    "step_imex",
    "newton_implicit_sweep",
    "imex_sweep",
    "init_viscosity",
    "update_viscosity",
    "run_explicit_1d",
]


@dataclass(frozen=True)
class Params1D:
    k_par: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.k_par) and self.k_par >= 0):
            raise ValueError("k_par must be finite and >= 0")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and >= 0")


@dataclass
class State1D:
    mesh: Mesh1D
    T: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        if self.T.shape != (self.mesh.n_cells,):
            raise ValueError("field shape does not match mesh")


@dataclass
class ViscosityState:
    """Stiff-surrogate viscosity: a scalar, or one value per independent row
    (the 2D split scheme keeps one viscosity per r-row)."""

    nu: "float | np.ndarray"

    def __post_init__(self):
        if not np.all(np.asarray(self.nu) > 0):
            raise ValueError("viscosity must be positive")


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50


def _pow72(t):
    """Sign-preserving T^(7/2)."""
    t = np.asarray(t, dtype=float)
    return t * t * t * np.sqrt(np.abs(t))


def _pow52(t):
    """|T|^(5/2), the diffusion-coefficient power."""
    t = np.abs(np.asarray(t, dtype=float))
    return t * t * np.sqrt(t)


def parallel_flux(t_left, t_right, w_left, w_right, k_par):
    """Interior face flux (4 K/7) * (P(T_r) - P(T_l)) / (w_l + w_r)."""
    return (4.0 * k_par / 7.0) * float(_pow72(t_right) - _pow72(t_left)) / (w_left + w_right)


def boundary_flux(t_cell, gamma, side):
    """Limiter flux: +gamma*T on the left boundary, -gamma*T on the right."""
    if side == "left":
        return gamma * t_cell
    if side == "right":
        return -gamma * t_cell
    raise ValueError("side must be 'left' or 'right'")


def cfl_dt(mesh, t0_max, params):
    """Explicit stability bound xi^2 ds^2 / max(2 K |T0|^(5/2), gamma ds).

    2 K |T0|^(5/2) is twice the largest linearized diffusivity; the slope of
    the 7/2-power flux reaches (7/2) K |T0|^(5/2) * (4/7), so anything weaker
    lets boundary-layer oscillations grow.
    """
    if t0_max < 0:
        raise ValueError("t0_max must be nonnegative")
    ds = mesh.max_width
    denom = max(2.0 * params.k_par * t0_max ** 2.5, params.gamma * ds)
    if denom == 0.0:
        raise DegenerateProblemError("k_par*|T0|^(5/2) and gamma both vanish; no CFL bound")
    return mesh.xi ** 2 * ds ** 2 / denom


def _explicit_rhs(T, widths, params):
    """(F_{i+1/2} - F_{i-1/2}) / ds_i with limiter boundary fluxes at T."""
    P = _pow72(T)
    F = np.empty(T.size + 1)
    F[1:-1] = (4.0 * params.k_par / 7.0) * (P[1:] - P[:-1]) / (widths[:-1] + widths[1:])
    F[0] = params.gamma * T[0]
    F[-1] = -params.gamma * T[-1]
    return np.diff(F) / widths


def step_explicit(state, params, dt, step_index=None, t0_max=None):
    """One forward-in-time step; caller is responsible for the CFL bound."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    T1 = state.T + dt * _explicit_rhs(state.T, state.mesh.widths, params)
    cap = 10.0 * (t0_max if t0_max is not None else np.abs(state.T).max() + 1.0)
    if not np.all(np.isfinite(T1)) or np.abs(T1).max() > cap:
        raise BlowUpError(
            f"explicit step diverged (step {step_index}); time step likely violates "
            "the CFL bound", step_index=step_index)
    return State1D(state.mesh, T1, state.time + dt)


def newton_implicit_sweep(Tn, widths, params, dt, newton, periodic=False):
    """Batched Newton solve of the implicit scheme for m independent rows.

    ``Tn`` has shape (m, n).  Periodic rows wrap in s (cyclic Jacobian),
    non-periodic rows carry the limiter boundary fluxes.
    """
    Tn = np.asarray(Tn, dtype=float)
    m, n = Tn.shape
    k_par, gamma = params.k_par, params.gamma
    T = Tn.copy()
    scale = 1.0 + np.abs(Tn).max()
    if periodic:
        span = widths + np.roll(widths, -1)     # span[i] belongs to face i+1/2; last wraps
    else:
        span = widths[:-1] + widths[1:]

    res = np.inf
    for _ in range(newton.max_iter):
        P = _pow72(T)
        if periodic:
            F = (4.0 * k_par / 7.0) * (np.roll(P, -1, axis=1) - P) / span
            R = T - Tn - dt / widths * (F - np.roll(F, 1, axis=1))
        else:
            F = np.empty((m, n + 1))
            F[:, 1:-1] = (4.0 * k_par / 7.0) * (P[:, 1:] - P[:, :-1]) / span
            F[:, 0] = gamma * T[:, 0]
            F[:, -1] = -gamma * T[:, -1]
            R = T - Tn - dt / widths * np.diff(F, axis=1)
        res = np.abs(R).max()
        if res <= newton.tol * scale:
            return T
        c = 2.0 * k_par * _pow52(T)             # d/dT of (4K/7) P(T)
        if periodic:
            span_l = np.roll(span, 1)           # face i-1/2 span for row i
            diag = 1.0 + dt / widths * (c / span_l + c / span)
            sup_full = -dt / widths * np.roll(c, -1, axis=1) / span
            sub_full = -dt / widths * np.roll(c, 1, axis=1) / span_l
            delta = cyclic_batched(
                sub_full[:, 1:], diag, sup_full[:, :-1],
                sub_full[:, 0], sup_full[:, -1], -R)
        else:
            diag = np.ones((m, n))
            if n > 1:
                diag[:, :-1] += dt / widths[:-1] * c[:, :-1] / span
                diag[:, 1:] += dt / widths[1:] * c[:, 1:] / span
            diag[:, 0] += dt / widths[0] * gamma
            diag[:, -1] += dt / widths[-1] * gamma
            sup = -dt / widths[:-1] * c[:, 1:] / span
            sub = -dt / widths[1:] * c[:, :-1] / span
            delta = thomas_batched(sub, diag, sup, -R)
        T = T + delta
    raise NonConvergenceError(
        f"Newton did not converge in {newton.max_iter} iterations", residual=float(res))


def step_implicit(state, params, dt, newton=NewtonOptions()):
    """One backward-in-time step, solved by Newton iteration."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    T1 = newton_implicit_sweep(state.T[None, :], state.mesh.widths, params, dt, newton)
    return State1D(state.mesh, T1[0], state.time + dt)


def imex_sweep(Tn, widths, params, dt, nu, periodic=False):
    """Batched IMEX step for m independent rows of shape (m, n).

    Explicit part: face coefficient K*mean(|T^n|^(5/2)) - nu acting on the
    T^n differences.  Implicit part: nu times the discrete Laplacian of
    T^(n+1), with limiter fluxes (non-periodic) taken at T^(n+1).

    ``nu`` is either a scalar shared by every row or an array of m per-row
    viscosities (each row is an independent 1D problem and only needs to
    dominate its own conductivity).
    """
    Tn = np.asarray(Tn, dtype=float)
    m, n = Tn.shape
    k_par, gamma = params.k_par, params.gamma
    nu = np.asarray(nu, dtype=float)
    if nu.ndim:                       # per-row: broadcast down the columns
        nu = nu.reshape(m, 1)
    A52 = _pow52(Tn)
    if periodic:
        span = widths + np.roll(widths, -1)
        coeff = k_par * 0.5 * (np.roll(A52, -1, axis=1) + A52) - nu
        Fexp = 2.0 * coeff * (np.roll(Tn, -1, axis=1) - Tn) / span
        rhs = Tn + dt / widths * (Fexp - np.roll(Fexp, 1, axis=1))
        w = 2.0 * nu / span                     # (n,) or (m, n)
        w_l = np.roll(w, 1, axis=-1)
        diag = 1.0 + dt / widths * (w + w_l)
        sup_full = -dt / widths * w
        sub_full = -dt / widths * w_l
        return cyclic_batched(sub_full[..., 1:], diag, sup_full[..., :-1],
                              sub_full[..., 0], sup_full[..., -1], rhs)
    span = widths[:-1] + widths[1:]
    coeff = k_par * 0.5 * (A52[:, 1:] + A52[:, :-1]) - nu
    Fexp = np.zeros((m, n + 1))
    Fexp[:, 1:-1] = 2.0 * coeff * (Tn[:, 1:] - Tn[:, :-1]) / span
    rhs = Tn + dt / widths * np.diff(Fexp, axis=1)
    w = 2.0 * nu / span                         # (n-1,) or (m, n-1)
    diag = np.ones(n) if w.ndim == 1 else np.ones((m, n))
    if n > 1:
        diag[..., :-1] += dt / widths[:-1] * w
        diag[..., 1:] += dt / widths[1:] * w
    diag[..., 0] += dt / widths[0] * gamma
    diag[..., -1] += dt / widths[-1] * gamma
    sup = -dt / widths[:-1] * w
    sub = -dt / widths[1:] * w
    return thomas_batched(sub, diag, sup, rhs)


def step_imex(state, params, dt, visc):
    """One IMEX step; the tridiagonal implicit system is solved directly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not visc.nu > 0:
        raise ValueError("viscosity must be positive")
    T1 = imex_sweep(state.T[None, :], state.mesh.widths, params, dt, visc.nu)
    return State1D(state.mesh, T1[0], state.time + dt)


def init_viscosity(field, k_par):
    """Initial viscosity 2 K |T0|_inf^(5/2)."""
    nu = 2.0 * k_par * float(np.abs(field).max()) ** 2.5
    return ViscosityState(max(nu, np.finfo(float).tiny))


def update_viscosity(visc, field, k_par):
    """Readjust nu after a step, then clamp to the stability floor.

    The dead band keeps nu within (5/4 b, 4 b) of b = K |T|_inf^(5/2); the
    final clamp restores the floor nu >= b that the energy estimate needs,
    which the bare halving branch would otherwise undercut.
    """
    bound = k_par * float(np.abs(field).max()) ** 2.5
    nu = visc.nu
    if nu <= 1.25 * bound:
        nu = 2.0 * bound
    if nu >= 4.0 * bound:
        nu = 0.5 * bound
    nu = max(nu, bound)
    if nu <= 0.0:
        nu = np.finfo(float).tiny
    return ViscosityState(nu)


@njit(cache=True)
def _explicit_1d_loop(T, ds, k_par, gamma, dt, n_steps, rem_dt, cap):
    n = T.size
    c = 4.0 * k_par / 7.0
    inv2ds = 1.0 / (2.0 * ds)
    buf = np.empty(n)
    total = n_steps + (1 if rem_dt > 0.0 else 0)
    for step in range(total):
        h = dt if step < n_steps else rem_dt
        if n == 1:
            buf[0] = T[0] - h / ds * 2.0 * gamma * T[0]
        else:
            Pprev = T[0] * T[0] * T[0] * np.sqrt(abs(T[0]))
            Fprev = gamma * T[0]
            for i in range(n - 1):
                t = T[i + 1]
                P = t * t * t * np.sqrt(abs(t))
                F = c * (P - Pprev) * inv2ds
                buf[i] = T[i] + h / ds * (F - Fprev)
                Pprev = P
                Fprev = F
            buf[n - 1] = T[n - 1] + h / ds * (-gamma * T[n - 1] - Fprev)
        T, buf = buf, T
        if step % 4096 == 0 or step == total - 1:
            for i in range(n):
                if not np.isfinite(T[i]) or abs(T[i]) > cap:
                    return T, step
    return T, -1


def run_explicit_1d(mesh, T0, params, dt, t_end):
    """Explicit integration to t_end on a uniform mesh (fused numba loop).

    Used for reference-solution generation; agrees step-for-step with
    :func:`step_explicit` (covered by tests).  A shortened final step lands
    exactly on t_end.
    """
    widths = mesh.widths
    if not np.allclose(widths, widths[0], rtol=1e-12, atol=0.0):
        raise ValueError("fused explicit loop requires a uniform mesh")
    n_steps = int(t_end / dt)
    rem = t_end - n_steps * dt
    if rem < 1e-12 * dt:
        rem = 0.0
    T0 = np.asarray(T0, dtype=float)
    cap = 10.0 * (np.abs(T0).max() + 1.0)
    T, bad_step = _explicit_1d_loop(T0.copy(), float(widths[0]), params.k_par,
                                    params.gamma, dt, n_steps, rem, cap)
    if bad_step >= 0:
        raise BlowUpError("explicit reference run diverged", step_index=bad_step)
    return State1D(mesh, T, t_end)
