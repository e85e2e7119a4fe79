"""Norms, reference-error measurement, energy accounting and order fits."""

from dataclasses import dataclass, field

import numpy as np

from .heat1d import _pow52
from .mesh import (Mesh1D, Mesh2D, restrict_cell_averages,
                   restrict_cell_averages_2d)

__all__ = [
    "EnergyBreakdown",
    "RunReport",
    "discrete_l2_norm",
    "total_mass",
    "h1_seminorm_sq",
    "viscous_energy",
    "relative_error",
    "energy_breakdown",
    "convergence_order",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Volumetric dissipation (e1 <= 0), limiter outflow (e2), core influx (e3)."""

    e1: float
    e2: float
    e3: float


@dataclass
class RunReport:
    """Everything one run produces: final field, per-step series, timing."""

    final: np.ndarray
    times: list = field(default_factory=list)
    l2_norms: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    e1: list = field(default_factory=list)
    e2: list = field(default_factory=list)
    e3: list = field(default_factory=list)
    nu: list = field(default_factory=list)
    wall_seconds: float = 0.0
    relative_error: float = None

    def record(self, time, l2, mass, energy=None, nu=None):
        if self.times and time <= self.times[-1]:
            raise ValueError("time series must be strictly increasing")
        self.times.append(time)
        self.l2_norms.append(l2)
        self.masses.append(mass)
        self.e1.append(energy.e1 if energy else 0.0)
        self.e2.append(energy.e2 if energy else 0.0)
        self.e3.append(energy.e3 if energy else 0.0)
        self.nu.append(nu if nu is not None else 0.0)


def _measures(mesh):
    if isinstance(mesh, Mesh1D):
        return mesh.widths
    return mesh.cell_areas()


def discrete_l2_norm(values, mesh):
    """sqrt(sum of cell measure times value squared)."""
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(_measures(mesh) * values ** 2)))


def total_mass(values, mesh):
    return float(np.sum(_measures(mesh) * np.asarray(values, dtype=float)))


def h1_seminorm_sq(values, mesh, periodic=False):
    """Sum over interior faces of (face measure) * (difference quotient)^2.

    The quotient at face i+1/2 is 2*(T_{i+1}-T_i)/(ds_i+ds_{i+1}) and the
    face measure is half that span, matching the viscous energy term of the
    linearly implicit scheme.  1D fields only.
    """
    T = np.asarray(values, dtype=float)
    w = mesh.widths
    if periodic:
        span = w + np.roll(w, -1)
        diff = np.roll(T, -1) - T
    else:
        span = w[:-1] + w[1:]
        diff = T[1:] - T[:-1]
    D = 2.0 * diff / span
    return float(np.sum(0.5 * span * D ** 2))


def viscous_energy(values, mesh, nu, dt, periodic=False):
    """0.5*||T||^2 + (nu*dt/2)*|T|^2_H1: the quantity the linearly implicit
    scheme dissipates when the viscosity floor holds."""
    return (0.5 * discrete_l2_norm(values, mesh) ** 2
            + 0.5 * nu * dt * h1_seminorm_sq(values, mesh, periodic))


def relative_error(candidate, candidate_mesh, reference, reference_mesh):
    """Relative discrete L2 distance to a reference on a finer nested mesh.

    The reference is restricted to the candidate mesh by exact cell
    averaging before comparing.
    """
    if isinstance(candidate_mesh, Mesh2D):
        ref = restrict_cell_averages_2d(reference, reference_mesh, candidate_mesh)
    else:
        ref = restrict_cell_averages(reference, reference_mesh, candidate_mesh)
    ref_norm = discrete_l2_norm(ref, candidate_mesh)
    if ref_norm == 0.0:
        raise ValueError("reference norm vanishes; relative error undefined")
    return discrete_l2_norm(np.asarray(candidate, dtype=float) - ref,
                            candidate_mesh) / ref_norm


def energy_breakdown(state, params):
    """E1/E2/E3 of the 2D energy balance.

    E1: minus the volumetric dissipation, with the face value of T^(5/2)
    taken as the arithmetic mean of the adjacent cells (the linearly
    implicit flux convention); wrap faces of the periodic core included.
    E2: limiter outflow through s = 0, 1 over the SOL rows.
    E3: influx Q_perp K_perp through r = 0.
    """
    mesh, T = state.mesh, state.T
    ws, wr = mesh.s_mesh.widths, mesh.r_mesh.widths
    js = mesh.sol_start_index
    A52 = _pow52(T)

    e1 = 0.0
    if T.shape[0] > 1:
        span = ws[:-1] + ws[1:]
        D = 2.0 * (T[1:, :] - T[:-1, :]) / span[:, None]
        coef = params.k_par * 0.5 * (A52[1:, :] + A52[:-1, :])
        e1 -= np.sum((0.5 * span[:, None] * wr[None, :]) * coef * D ** 2)
        wspan = ws[-1] + ws[0]
        Dw = 2.0 * (T[0, :js] - T[-1, :js]) / wspan
        cw = params.k_par * 0.5 * (A52[0, :js] + A52[-1, :js])
        e1 -= np.sum(0.5 * wspan * wr[:js] * cw * Dw ** 2)
    if T.shape[1] > 1:
        span = wr[:-1] + wr[1:]
        D = 2.0 * (T[:, 1:] - T[:, :-1]) / span[None, :]
        e1 -= np.sum((0.5 * span[None, :] * ws[:, None]) * params.k_perp * D ** 2)

    e2 = -params.gamma * float(np.sum(wr[js:] * (T[0, js:] ** 2 + T[-1, js:] ** 2)))
    e3 = params.q_perp * params.k_perp * float(np.sum(ws * T[:, 0]))
    return EnergyBreakdown(float(e1), e2, e3)


def convergence_order(points):
    """Least-squares slope of log(error) against log(h or dt)."""
    pts = [(float(h), float(e)) for h, e in points]
    if len(pts) < 2:
        raise ValueError("order fit needs at least two points")
    if any(h <= 0 or e <= 0 for h, e in pts):
        raise ValueError("order fit needs positive parameters and errors")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    return float(np.polyfit(x, y, 1)[0])
