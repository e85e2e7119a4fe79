import numpy as np
import pytest

from solheat.diagnostics import (RunReport, convergence_order,
                                 discrete_l2_norm, energy_breakdown,
                                 h1_seminorm_sq, relative_error, total_mass)
from solheat.heat2d import Params2D, State2D
from solheat.mesh import build_mesh_2d, build_uniform_mesh_1d


def test_l2_norm_and_mass():
    m = build_uniform_mesh_1d(4)
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.isclose(discrete_l2_norm(v, m), np.sqrt(0.25 * 30.0))
    assert np.isclose(total_mass(v, m), 2.5)


def test_h1_seminorm_linear_field():
    # T = s has unit difference quotients: seminorm^2 = sum of face measures
    n = 8
    m = build_uniform_mesh_1d(n)
    T = m.centers.copy()
    assert np.isclose(h1_seminorm_sq(T, m), (n - 1) / n)


def test_relative_error_identity_and_constants():
    fine = build_uniform_mesh_1d(30)
    coarse = build_uniform_mesh_1d(10)
    rng = np.random.default_rng(3)
    ref = rng.random(30)
    restricted = ref.reshape(10, 3).mean(axis=1)
    assert relative_error(restricted, coarse, ref, fine) < 1e-15
    assert np.isclose(relative_error(np.ones(10), coarse, np.full(30, 2.0),
                                     fine), 0.5)


def test_relative_error_scale_invariant():
    fine = build_uniform_mesh_1d(20)
    coarse = build_uniform_mesh_1d(10)
    rng = np.random.default_rng(5)
    c, r = 1.0 + rng.random(10), 1.0 + rng.random(20)
    assert np.isclose(relative_error(c, coarse, r, fine),
                      relative_error(3.0 * c, coarse, 3.0 * r, fine))


def test_relative_error_zero_reference():
    fine = build_uniform_mesh_1d(20)
    coarse = build_uniform_mesh_1d(10)
    with pytest.raises(ValueError):
        relative_error(np.ones(10), coarse, np.zeros(20), fine)


def test_relative_error_2d():
    fine = build_mesh_2d(6, 4)
    coarse = build_mesh_2d(3, 2)
    assert np.isclose(relative_error(np.ones((3, 2)), coarse,
                                     np.full((6, 4), 2.0), fine), 0.5)


def test_energy_breakdown_constant_field():
    mesh = build_mesh_2d(10, 8)
    st = State2D(mesh, np.full(mesh.shape, 3.0))
    eb = energy_breakdown(st, Params2D(1.0, 0.01, 2.0, 10.0))
    assert eb.e1 == 0.0
    assert np.isclose(eb.e2, -18.0)
    assert np.isclose(eb.e3, 0.3)


def test_energy_breakdown_signs_random():
    mesh = build_mesh_2d(12, 8)
    rng = np.random.default_rng(7)
    params = Params2D(1.0, 0.01, 2.0, 10.0)
    for _ in range(10):
        st = State2D(mesh, 3.0 * rng.random(mesh.shape))
        eb = energy_breakdown(st, params)
        assert eb.e1 <= 0.0
        assert eb.e2 <= 0.0
        assert eb.e3 >= 0.0


def test_convergence_order_exact_slopes():
    assert np.isclose(convergence_order([(0.1, 0.1), (0.05, 0.05)]), 1.0)
    assert np.isclose(convergence_order([(0.1, 0.01), (0.05, 0.0025)]), 2.0)


def test_convergence_order_validation():
    with pytest.raises(ValueError):
        convergence_order([(0.1, 0.1)])
    with pytest.raises(ValueError):
        convergence_order([(0.1, 0.1), (0.05, -1.0)])


def test_run_report_monotone_times():
    rep = RunReport(final=np.zeros(3))
    rep.record(0.0, 1.0, 1.0)
    rep.record(0.5, 0.9, 1.0)
    with pytest.raises(ValueError):
        rep.record(0.5, 0.8, 1.0)
