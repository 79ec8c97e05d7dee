import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepc_lds.errors import NumericalError, ValidationError
from deepc_lds.grid import build_descriptor, build_laplacian
from deepc_lds.setpoint import compute_setpoint, share_generation
from deepc_lds.simulate import simulate


def test_zero_demand(grid, system):
    sp = compute_setpoint(grid, system, np.zeros(9))
    assert not np.any(sp.u_s) and not np.any(sp.x_s) and not np.any(sp.y_s)


def test_uniform_load_demand_equal_sharing(grid, system):
    d = 0.8
    p = np.zeros(9)
    p[[grid.internal_index(b) for b in (5, 6, 8)]] = d
    sp = compute_setpoint(grid, system, p)
    np.testing.assert_allclose(sp.u_s, [d, d, d], atol=1e-12)
    assert sp.stationarity_residual(system) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 3), min_size=9, max_size=9), st.sampled_from(["equal", "inertia"]))
def test_setpoint_invariants(grid, system, qw, demand, sharing):
    p = np.array(demand)
    sp = compute_setpoint(grid, system, p, sharing)
    assert sp.stationarity_residual(system) <= 1e-9 * max(1.0, p.max())
    np.testing.assert_allclose(sp.y_s, system.C @ sp.x_s, atol=1e-12)
    assert sp.u_s.sum() == pytest.approx(p.sum(), abs=1e-9)
    assert not np.any(sp.x_s[: grid.g]) and sp.x_s[grid.g] == 0.0
    assert np.all(sp.u_s >= 0)
    injection = -p.copy()
    injection[: grid.g] += sp.u_s
    assert abs(injection.sum()) <= 1e-9 * max(1.0, p.sum())
    theta = sp.x_s[grid.g:]
    np.testing.assert_allclose(build_laplacian(grid) @ theta, injection, atol=1e-9)
    traj = simulate(system, qw, sp.x_s, np.tile(sp.u_s, (20, 1)), np.tile(p, (20, 1)))
    np.testing.assert_allclose(traj.x, np.tile(sp.x_s, (20, 1)), atol=1e-9)


def test_angle_shift_leaves_residual_unchanged(grid, system, schedule):
    sp = compute_setpoint(grid, system, schedule.demand_at(0))
    shifted = sp.x_s.copy()
    shifted[grid.g:] += 0.37
    r = (system.E - system.A) @ shifted - system.B @ sp.u_s - system.F @ sp.w_s
    assert np.linalg.norm(r) == pytest.approx(sp.stationarity_residual(system), abs=1e-12)


def test_inertia_sharing(grid):
    u = share_generation(grid, 3.0, "inertia")
    np.testing.assert_allclose(u, 3.0 * grid.inertia / grid.inertia.sum())
    with pytest.raises(ValidationError, match="sharing"):
        share_generation(grid, 1.0, "merit")


def test_invalid_demands(grid, system):
    bad = np.zeros(9)
    bad[5] = -0.1
    with pytest.raises(ValidationError, match="bus 6"):
        compute_setpoint(grid, system, bad)
    with pytest.raises(ValidationError, match="length"):
        compute_setpoint(grid, system, np.zeros(4))


def test_literal_matrices_are_rejected(grid, schedule):
    sys = build_descriptor(grid, convention="literal")
    with pytest.raises(NumericalError, match="physical"):
        compute_setpoint(grid, sys, schedule.demand_at(0))
