"""2D anisotropic transport: nonlinear in s, linear in r.

The domain splits at r = 1/2: rows below are the core (periodic in s),
rows above are the SOL (limiter outflow at s = 0, 1).  The r-direction
carries a fixed influx K_perp*Q_perp at r = 0 and a no-flux wall at r = 1.

step_split is the production scheme: a 1D sweep in s for every r-row
(IMEX or implicit-Newton) followed by an implicit linear sweep in r for
every s-column; each line is an independent tridiagonal solve.  The
unsplit variants assemble the five-point operator over the whole grid and
exist for the accuracy/cost comparison against the split scheme.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import BlowUpError, NonConvergenceError
from .heat1d import (NewtonOptions, Params1D, ViscosityState, _pow52, _pow72,
                     cfl_dt, imex_sweep, newton_implicit_sweep)
from .linsolve import SparseSymmetricSystem, solve_sparse_spd, thomas_batched
from .mesh import Mesh2D

__all__ = [
    "Params2D",
    "State2D",
    "row_viscosity",
    "step_split",
    "step_unsplit",
    "step_explicit_2d",
    "explicit_dt_2d",
    "run_explicit_2d",
]


@dataclass(frozen=True)
class Params2D:
    k_par: float
    k_perp: float
    gamma: float
    q_perp: float

    def __post_init__(self):
        for name in ("k_par", "k_perp", "gamma", "q_perp"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")

    def along_s(self):
        return Params1D(self.k_par, self.gamma)


@dataclass
class State2D:
    mesh: Mesh2D
    T: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        if self.T.shape != self.mesh.shape:
            raise ValueError("field shape does not match mesh")


def _s_sweep(T, mesh, params, dt, nu, mode, newton):
    """Stage 1: 1D step along s for every r-row; returns the (ns, nr) result."""
    js = mesh.sol_start_index
    widths = mesh.s_mesh.widths
    p1 = params.along_s()
    rows = np.ascontiguousarray(T.T)           # (nr, ns), one system per row
    out = np.empty_like(rows)
    if mode == "imex":
        nu = np.asarray(nu, dtype=float)
        nu_core = nu if nu.ndim == 0 else nu[:js]
        nu_sol = nu if nu.ndim == 0 else nu[js:]
        if js > 0:
            out[:js] = imex_sweep(rows[:js], widths, p1, dt, nu_core,
                                  periodic=True)
        if js < rows.shape[0]:
            out[js:] = imex_sweep(rows[js:], widths, p1, dt, nu_sol)
    elif mode == "implicit":
        if js > 0:
            out[:js] = newton_implicit_sweep(rows[:js], widths, p1, dt, newton,
                                             periodic=True)
        if js < rows.shape[0]:
            out[js:] = newton_implicit_sweep(rows[js:], widths, p1, dt, newton)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    return out.T


def _r_sweep(T, mesh, params, dt):
    """Stage 2: implicit linear diffusion in r for every s-column."""
    wr = mesh.r_mesh.widths
    nr = wr.size
    rhs = np.ascontiguousarray(T)
    rhs = rhs.copy()
    rhs[:, 0] += dt / wr[0] * params.k_perp * params.q_perp
    if nr == 1:
        return rhs
    span = wr[:-1] + wr[1:]
    w = 2.0 * params.k_perp / span
    diag = np.ones(nr)
    diag[:-1] += dt / wr[:-1] * w
    diag[1:] += dt / wr[1:] * w
    sup = -dt / wr[:-1] * w
    sub = -dt / wr[1:] * w
    return thomas_batched(sub, diag, sup, rhs)


def row_viscosity(T, k_par):
    """Per-row stiff surrogate at the stability floor K*max_s|T(., r)|^(5/2).

    The s-sweeps are independent 1D problems, so each r-row only needs its
    viscosity to dominate its own conductivity; one shared scalar would be
    ruled by the hot core rows and over-damp the cold SOL rows where the
    limiter boundary layers live.  The sweep tridiagonals are rebuilt every
    step regardless (the explicit coefficients move), so tracking the floor
    exactly costs nothing; the scalar dead-band policy only pays off when
    the implicit matrix can be reused.
    """
    nu = k_par * _pow52(np.asarray(T, dtype=float)).max(axis=0)
    return ViscosityState(np.maximum(nu, np.finfo(float).tiny))


def step_split(state, params, dt, visc, mode="imex", newton=NewtonOptions()):
    """Lie splitting: s-sweep (nonlinear) then r-sweep (linear implicit).

    For the IMEX sweep ``visc.nu`` may be a scalar or an array with one
    viscosity per r-row (see :func:`row_viscosity`).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    Tstar = _s_sweep(state.T, state.mesh, params, dt, visc.nu, mode, newton)
    T1 = _r_sweep(Tstar, state.mesh, params, dt)
    return State2D(state.mesh, T1, state.time + dt)


# ---------------------------------------------------------------------------
# Unsplit five-point schemes (comparison against the split scheme).
# Unknowns are raveled C-order from a (ns, nr) field.

_operator_cache = {}


def _laplacian_parts(mesh, params):
    """Sparse pieces of the five-point operator: s-Laplacian (unit
    coefficient, periodic in core rows), gamma boundary diagonal, and
    r-Laplacian, each scaled later by dt and the relevant coefficient."""
    ns, nr = mesh.shape
    js = mesh.sol_start_index
    ws, wr = mesh.s_mesh.widths, mesh.r_mesh.widths
    key = (id(mesh), ns, nr)
    if key in _operator_cache:
        return _operator_cache[key]

    def node(i, j):
        return i * nr + j

    rows, cols, vals = [], [], []     # unit-nu s-Laplacian
    grows, gvals = [], []             # gamma * T boundary diagonal / ds
    span_s = ws[:-1] + ws[1:]
    wrap_span = ws[-1] + ws[0]
    for j in range(nr):
        periodic = j < js
        for i in range(ns):
            # face i+1/2
            if i < ns - 1:
                w = 2.0 / span_s[i]
                rows += [node(i, j), node(i, j), node(i + 1, j), node(i + 1, j)]
                cols += [node(i, j), node(i + 1, j), node(i + 1, j), node(i, j)]
                vals += [w / ws[i], -w / ws[i], w / ws[i + 1], -w / ws[i + 1]]
        if periodic and ns > 1:
            w = 2.0 / wrap_span
            a, b = node(ns - 1, j), node(0, j)
            rows += [a, a, b, b]
            cols += [a, b, b, a]
            vals += [w / ws[-1], -w / ws[-1], w / ws[0], -w / ws[0]]
        if not periodic:
            grows += [node(0, j), node(ns - 1, j)]
            gvals += [1.0 / ws[0], 1.0 / ws[-1]]

    n = ns * nr
    Ls = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    Bg = sp.csr_matrix((gvals, (grows, grows)), shape=(n, n))

    rows, cols, vals = [], [], []
    span_r = wr[:-1] + wr[1:]
    for i in range(ns):
        for j in range(nr - 1):
            w = 2.0 / span_r[j]
            a, b = node(i, j), node(i, j + 1)
            rows += [a, a, b, b]
            cols += [a, b, b, a]
            vals += [w / wr[j], -w / wr[j], w / wr[j + 1], -w / wr[j + 1]]
    Lr = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    parts = (Ls, Bg, Lr)
    _operator_cache[key] = parts
    return parts


def _explicit_divergence(T, mesh, params, include_nonlinear_s=True, nu=0.0,
                         include_r=True):
    """div F(T) with the scheme's boundary fluxes, evaluated at T.

    With ``nu`` nonzero the s-face coefficient is K*mean(|T|^(5/2)) - nu
    (the IMEX explicit part, boundary fluxes excluded); otherwise it is the
    full 7/2-power flux including limiter boundary fluxes.  ``nu`` may be a
    scalar or one value per r-row (length nr).
    """
    ns, nr = mesh.shape
    js = mesh.sol_start_index
    ws, wr = mesh.s_mesh.widths, mesh.r_mesh.widths
    k_par, k_perp, gamma, q_perp = (params.k_par, params.k_perp,
                                    params.gamma, params.q_perp)
    out = np.zeros_like(T)
    nu = np.asarray(nu, dtype=float)
    imex_part = bool(np.any(nu != 0.0))

    if include_nonlinear_s and ns > 1:
        span = ws[:-1] + ws[1:]
        if imex_part:
            A52 = _pow52(T)
            coeff = k_par * 0.5 * (A52[1:, :] + A52[:-1, :]) - nu
            F = 2.0 * coeff * (T[1:, :] - T[:-1, :]) / span[:, None]
        else:
            P = _pow72(T)
            F = (4.0 * k_par / 7.0) * (P[1:, :] - P[:-1, :]) / span[:, None]
        out[:-1, :] += F / ws[:-1, None]
        out[1:, :] -= F / ws[1:, None]
        # wrap faces (core rows), same coefficient convention
        wrap_span = ws[-1] + ws[0]
        if imex_part:
            nu_core = nu[:js] if nu.ndim else nu
            cwrap = k_par * 0.5 * (A52[0, :js] + A52[-1, :js]) - nu_core
            Fw = 2.0 * cwrap * (T[0, :js] - T[-1, :js]) / wrap_span
        else:
            Fw = (4.0 * k_par / 7.0) * (P[0, :js] - P[-1, :js]) / wrap_span
        out[-1, :js] += Fw / ws[-1]
        out[0, :js] -= Fw / ws[0]
        if not imex_part:
            # limiter boundary fluxes on SOL rows (explicit form)
            out[0, js:] -= gamma * T[0, js:] / ws[0]
            out[-1, js:] -= gamma * T[-1, js:] / ws[-1]

    if include_r:
        if nr > 1:
            span = wr[:-1] + wr[1:]
            G = 2.0 * k_perp * (T[:, 1:] - T[:, :-1]) / span[None, :]
            out[:, :-1] += G / wr[:-1][None, :]
            out[:, 1:] -= G / wr[1:][None, :]
        out[:, 0] += k_perp * q_perp / wr[0]
    return out


def step_explicit_2d(state, params, dt, step_index=None, t0_max=None):
    """Fully explicit five-point update (reference-solution generator)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    T1 = state.T + dt * _explicit_divergence(state.T, state.mesh, params)
    cap = 10.0 * (t0_max if t0_max is not None else np.abs(state.T).max() + 1.0)
    if not np.all(np.isfinite(T1)) or np.abs(T1).max() > cap:
        raise BlowUpError(f"explicit 2D step diverged (step {step_index})",
                          step_index=step_index)
    return State2D(state.mesh, T1, state.time + dt)


def explicit_dt_2d(mesh, t_max, params):
    """0.9 * min(s-direction CFL at the current max, xi^2 dr^2 / (2 K_perp))."""
    bounds = []
    p1 = Params1D(params.k_par, params.gamma)
    if params.k_par > 0 or params.gamma > 0:
        bounds.append(cfl_dt(mesh.s_mesh, t_max, p1))
    if params.k_perp > 0:
        dr = mesh.r_mesh.max_width
        bounds.append(mesh.r_mesh.xi ** 2 * dr ** 2 / (2.0 * params.k_perp))
    if not bounds:
        raise ValueError("all transport coefficients vanish")
    return 0.9 * min(bounds)


def _assemble_unsplit_matrix(mesh, dt, nu, params):
    Ls, Bg, Lr = _laplacian_parts(mesh, params)
    ns, nr = mesh.shape
    n = ns * nr
    nu = np.asarray(nu, dtype=float)
    if nu.ndim:
        # per-row viscosity: s-faces join nodes in the same r-row, so a
        # diagonal row scaling of Ls keeps the operator symmetric
        nu_s = sp.diags(np.tile(nu, ns)) @ Ls
    else:
        nu_s = float(nu) * Ls
    A = (sp.identity(n, format="csr")
         + dt * nu_s + dt * params.gamma * Bg + dt * params.k_perp * Lr)
    return A.tocsr()


_unsplit_matrix_cache = {}


def step_unsplit(state, params, dt, mode, visc=None, newton=NewtonOptions(),
                 cg_tol=1e-10):
    """One unsplit five-point step (implicit or IMEX) on the whole grid."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    mesh = state.mesh
    ns, nr = mesh.shape
    Tn = state.T

    if mode == "imex":
        if visc is None or not np.all(np.asarray(visc.nu) > 0):
            raise ValueError("imex mode needs a positive viscosity")
        nu = np.asarray(visc.nu, dtype=float)
        nu_key = nu.tobytes() if nu.ndim else float(nu)
        key = (id(mesh), dt, nu_key, params)
        A = _unsplit_matrix_cache.get(key)
        if A is None:
            A = _assemble_unsplit_matrix(mesh, dt, visc.nu, params)
            _unsplit_matrix_cache.clear()
            _unsplit_matrix_cache[key] = A
        expl = _explicit_divergence(Tn, mesh, params, nu=visc.nu,
                                    include_r=False)
        rhs = (Tn + dt * expl).ravel()
        rhs += dt * _influx_vector(mesh, params)
        x = solve_sparse_spd(SparseSymmetricSystem(A, rhs, tol=cg_tol,
                                                   x0=Tn.ravel()))
        return State2D(mesh, x.reshape(ns, nr), state.time + dt)

    if mode == "implicit":
        T1 = _unsplit_implicit_solve(Tn, mesh, params, dt, newton, cg_tol)
        return State2D(mesh, T1, state.time + dt)

    raise ValueError(f"unknown unsplit mode {mode!r}")


def _influx_vector(mesh, params):
    v = np.zeros(mesh.shape)
    v[:, 0] = params.k_perp * params.q_perp / mesh.r_mesh.widths[0]
    return v.ravel()


def _secant_coefficients(T, mesh, params):
    """Face coefficients a with F = 2a (T_b - T_a)/span, exact for the
    7/2-power flux: a = (4K/7)(P(b)-P(a))/(b-a) / 2 with the derivative
    limit at equal arguments."""
    k_par = params.k_par

    def secant(a, b):
        d = b - a
        pa, pb = _pow72(a), _pow72(b)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(np.abs(d) > 1e-30, (pb - pa) / np.where(d == 0, 1, d),
                         3.5 * _pow52(a))
        return (4.0 * k_par / 7.0) * 0.5 * m

    interior = secant(T[:-1, :], T[1:, :])
    js = mesh.sol_start_index
    wrap = secant(T[-1, :js], T[0, :js])
    return interior, wrap


def _unsplit_implicit_solve(Tn, mesh, params, dt, newton, cg_tol):
    """Secant-slope (Picard) iteration: each pass solves an SPD five-point
    system whose s-face coefficients are exact secants of the 7/2-power
    flux at the current iterate, so the fixed point solves the fully
    nonlinear implicit step."""
    ns, nr = mesh.shape
    js = mesh.sol_start_index
    ws, wr = mesh.s_mesh.widths, mesh.r_mesh.widths
    _, Bg, Lr = _laplacian_parts(mesh, params)
    n = ns * nr
    base = (sp.identity(n, format="csr") + dt * params.gamma * Bg
            + dt * params.k_perp * Lr)
    influx = _influx_vector(mesh, params)
    scale = 1.0 + np.abs(Tn).max()
    rhs = Tn.ravel() + dt * influx
    # the inner CG accuracy bounds the reachable fixed-point residual; the
    # CG stopping test is relative to ||rhs||_2, so the floor must be too
    tol = max(newton.tol * scale, 4.0 * cg_tol * np.linalg.norm(rhs))
    T = Tn.copy()

    for it in range(newton.max_iter):
        R = T - Tn - dt * _explicit_divergence(T, mesh, params)
        res = np.abs(R).max()
        if res <= tol:
            return T
        a_int, a_wrap = _secant_coefficients(T, mesh, params)
        Lnl = _nonlinear_s_matrix(mesh, a_int, a_wrap)
        A = (base + dt * Lnl).tocsr()
        x = solve_sparse_spd(SparseSymmetricSystem(A, rhs, tol=cg_tol,
                                                   x0=T.ravel()))
        T = x.reshape(ns, nr)
    raise NonConvergenceError(
        f"unsplit implicit iteration did not converge in {newton.max_iter} passes",
        residual=float(res))


def _nonlinear_s_matrix(mesh, a_int, a_wrap):
    """-div(a grad .) along s as a sparse matrix from face coefficients."""
    ns, nr = mesh.shape
    js = mesh.sol_start_index
    ws = mesh.s_mesh.widths
    n = ns * nr

    def node(i, j):
        return i * nr + j

    rows, cols, vals = [], [], []
    span = ws[:-1] + ws[1:]
    for i in range(ns - 1):
        w = 2.0 * a_int[i, :] / span[i]          # length nr
        for j in range(nr):
            A, B = node(i, j), node(i + 1, j)
            rows += [A, A, B, B]
            cols += [A, B, B, A]
            wj = w[j]
            vals += [wj / ws[i], -wj / ws[i], wj / ws[i + 1], -wj / ws[i + 1]]
    if ns > 1:
        wrap_span = ws[-1] + ws[0]
        for j in range(js):
            w = 2.0 * a_wrap[j] / wrap_span
            A, B = node(ns - 1, j), node(0, j)
            rows += [A, A, B, B]
            cols += [A, B, B, A]
            vals += [w / ws[-1], -w / ws[-1], w / ws[0], -w / ws[0]]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@njit(cache=True)
def _explicit_2d_loop(T, ds, dr, js, k_par, k_perp, gamma, q_perp,
                      t_end, dt_r_bound, cfl_factor, cap, dt_fixed):
    """Fused explicit reference integration with an adaptive time step
    0.9*min(ds^2/(2 K max|T|^{5/2}), dr^2/(2 K_perp)), shortened to land
    exactly on t_end.  Returns (field, time, n_steps, ok)."""
    ns, nr = T.shape
    P = np.empty((ns, nr))
    out = np.empty((ns, nr))
    t = 0.0
    steps = 0
    inv2ds = 1.0 / (2.0 * ds)
    inv2dr = 1.0 / (2.0 * dr)
    c = 4.0 * k_par / 7.0
    while t < t_end - 1e-14:
        tmax = 0.0
        for i in range(ns):
            for j in range(nr):
                a = abs(T[i, j])
                if a > tmax:
                    tmax = a
                x = T[i, j]
                P[i, j] = x * x * x * np.sqrt(abs(x))
        if not np.isfinite(tmax) or tmax > cap:
            return T, t, steps, False
        if dt_fixed > 0.0:
            dt = dt_fixed
        else:
            denom = 2.0 * k_par * tmax * tmax * np.sqrt(tmax)
            gds = gamma * ds
            if gds > denom:
                denom = gds
            dt_s = ds * ds / denom if denom > 0.0 else 1e300
            dt = cfl_factor * min(dt_s, dt_r_bound)
        if t + dt > t_end:
            dt = t_end - t
        for i in range(ns):
            for j in range(nr):
                # s-direction flux difference
                if i < ns - 1:
                    Fr = c * (P[i + 1, j] - P[i, j]) * inv2ds
                elif j < js:
                    Fr = c * (P[0, j] - P[ns - 1, j]) * inv2ds
                else:
                    Fr = -gamma * T[i, j]
                if i > 0:
                    Fl = c * (P[i, j] - P[i - 1, j]) * inv2ds
                elif j < js:
                    Fl = c * (P[0, j] - P[ns - 1, j]) * inv2ds
                else:
                    Fl = gamma * T[i, j]
                # r-direction flux difference
                if j < nr - 1:
                    Gu = 2.0 * k_perp * (T[i, j + 1] - T[i, j]) * inv2dr
                else:
                    Gu = 0.0
                if j > 0:
                    Gd = 2.0 * k_perp * (T[i, j] - T[i, j - 1]) * inv2dr
                else:
                    Gd = -k_perp * q_perp
                out[i, j] = T[i, j] + dt * ((Fr - Fl) / ds + (Gu - Gd) / dr)
        T, out = out, T
        t += dt
        steps += 1
    return T, t, steps, True


def run_explicit_2d(mesh, T0, params, t_end, cfl_factor=0.9, dt_override=None):
    """Explicit reference integration on a uniform mesh (fused numba loop).

    Agrees step-for-step with :func:`step_explicit_2d` for a fixed dt
    (covered by tests); the adaptive step follows :func:`explicit_dt_2d`.
    """
    ws, wr = mesh.s_mesh.widths, mesh.r_mesh.widths
    if not (np.allclose(ws, ws[0], rtol=1e-12, atol=0) and
            np.allclose(wr, wr[0], rtol=1e-12, atol=0)):
        raise ValueError("fused explicit loop requires a uniform mesh")
    T0 = np.asarray(T0, dtype=float)
    cap = 10.0 * (np.abs(T0).max() + 1.0)
    dr = float(wr[0])
    dt_r = dr * dr / (2.0 * params.k_perp) if params.k_perp > 0 else 1e300
    dt_fixed = 0.0 if dt_override is None else float(dt_override)
    T, t, steps, ok = _explicit_2d_loop(
        T0.copy(), float(ws[0]), dr, mesh.sol_start_index,
        params.k_par, params.k_perp, params.gamma, params.q_perp,
        t_end, dt_r, cfl_factor, cap, dt_fixed)
    if not ok:
        raise BlowUpError("explicit 2D reference run diverged", step_index=steps)
    return State2D(mesh, T, t), steps
