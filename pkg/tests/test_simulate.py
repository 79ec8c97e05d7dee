import csv
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepc_lds.errors import ValidationError
from deepc_lds.grid import DescriptorSystem, build_descriptor, nine_bus
from deepc_lds.pencil import quasi_weierstrass
from deepc_lds.setpoint import compute_setpoint
from deepc_lds.simulate import Plant, Trajectory, make_consistent, simulate
from oracles import random_pencil

_sys = build_descriptor(nine_bus())
NINE_BUS = (_sys, quasi_weierstrass(_sys.E, _sys.A))


def test_zero_in_zero_out(system, qw):
    traj = simulate(system, qw, np.zeros(12), np.zeros((30, 3)), np.zeros((30, 9)))
    assert not np.any(traj.x) and not np.any(traj.y)


def test_setpoint_is_a_fixed_point(grid, system, qw, schedule):
    sp = compute_setpoint(grid, system, schedule.demand_at(0))
    T = 100
    traj = simulate(system, qw, sp.x_s, np.tile(sp.u_s, (T, 1)), np.tile(sp.w_s, (T, 1)))
    np.testing.assert_allclose(traj.x, np.tile(sp.x_s, (T, 1)), atol=1e-9)
    assert np.abs(traj.x[:, :3]).max() < 1e-9
    np.testing.assert_allclose(traj.y, np.tile(sp.y_s, (T, 1)), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_superposition(seed):
    sys, qw = NINE_BUS
    rng = np.random.default_rng(seed)
    T = 25
    u1, u2 = rng.standard_normal((2, T, 3))
    w1, w2 = rng.standard_normal((2, T, 9))
    x0 = make_consistent(sys, qw, rng.standard_normal(12), u1[0], w1[0])
    a = simulate(sys, qw, x0, u1, w1)
    b = simulate(sys, qw, None, u2, w2)
    ab = simulate(sys, qw, x0, u1 + u2, w1 + w2)
    np.testing.assert_allclose(a.x + b.x, ab.x, atol=1e-9)
    np.testing.assert_allclose(a.y + b.y, ab.y, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_index_one_systems_satisfy_descriptor_equation(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 5))
    alg = int(rng.integers(1, 4))
    E, A, *_ = random_pencil(rng, q, [1] * alg)
    n = E.shape[0]
    sys = DescriptorSystem(E, A, rng.standard_normal((n, 2)), rng.standard_normal((n, 1)), rng.standard_normal((1, n)))
    qw = quasi_weierstrass(E, A)
    T = 40
    traj = simulate(sys, qw, None, rng.uniform(-1, 1, (T, 2)), rng.uniform(-1, 1, (T, 1)))
    res = traj.descriptor_residuals(sys)
    assert res.max() <= 1e-9 * traj.residual_scale(sys)
    np.testing.assert_allclose(traj.y, traj.x @ sys.C.T, atol=1e-12)


def test_make_consistent_examples(grid, system, qw):
    assert not np.any(make_consistent(system, qw, np.zeros(12), np.zeros(3), np.zeros(9)))
    rng = np.random.default_rng(3)
    x = make_consistent(system, qw, rng.standard_normal(12), np.zeros(3), np.zeros(9))
    z = np.linalg.solve(qw.P, x)
    assert np.abs(z[qw.q:]).max() < 1e-12
    sp = compute_setpoint(grid, system, np.r_[np.zeros(3), np.ones(6)])
    np.testing.assert_allclose(make_consistent(system, qw, sp.x_s, sp.u_s, sp.w_s), sp.x_s, atol=1e-10)


def test_make_consistent_keeps_dynamic_part_and_solves_algebraic_rows(system, qw):
    rng = np.random.default_rng(4)
    guess = rng.standard_normal(12)
    u, w = rng.standard_normal(3), rng.standard_normal(9)
    x = make_consistent(system, qw, guess, u, w)
    np.testing.assert_allclose(np.linalg.solve(qw.P, x)[: qw.q], np.linalg.solve(qw.P, guess)[: qw.q], atol=1e-10)
    # the first step from x applies the same (u, w) and keeps x unchanged
    plant = Plant(system, qw, x)
    np.testing.assert_allclose(plant.state(u, w), x, atol=1e-10)


def test_inconsistent_start_is_projected_with_a_warning(system, qw, caplog):
    with caplog.at_level(logging.WARNING, logger="deepc_lds.simulate"):
        traj = simulate(system, qw, np.arange(12.0), np.zeros((3, 3)), np.zeros((3, 9)))
    assert "projected" in caplog.text
    assert traj.descriptor_residuals(system).max() < 1e-12


def test_higher_index_is_refused():
    rng = np.random.default_rng(0)
    E, A, *_ = random_pencil(rng, 2, [2])
    qw = quasi_weierstrass(E, A)
    assert qw.s == 2
    sys = DescriptorSystem(E, A, np.ones((4, 1)), np.ones((4, 1)), np.ones((1, 4)))
    with pytest.raises(ValidationError, match="s=2"):
        simulate(sys, qw, None, np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(ValidationError):
        make_consistent(sys, qw, np.zeros(4), np.zeros(1), np.zeros(1))


def test_length_mismatch(system, qw):
    with pytest.raises(ValidationError, match="length"):
        simulate(system, qw, None, np.zeros((3, 3)), np.zeros((4, 9)))
    with pytest.raises(ValidationError):
        Trajectory(np.zeros((3, 1)), np.zeros((2, 1)), np.zeros((3, 1)))


def test_csv_header_and_round_trip(system, qw, tmp_path):
    rng = np.random.default_rng(5)
    traj = simulate(system, qw, None, rng.standard_normal((5, 3)), rng.standard_normal((5, 9)))
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    rows = list(csv.reader(open(path)))
    expected = ["t"] + [f"u_{i}" for i in range(1, 4)] + [f"w_{i}" for i in range(1, 10)]
    expected += [f"y_{i}" for i in range(1, 4)] + [f"x_{i}" for i in range(1, 13)]
    assert rows[0] == expected
    assert len(rows) == 6
    back = np.array([[float(v) for v in r] for r in rows[1:]])
    np.testing.assert_array_equal(back[:, 1:4], traj.u)  # repr round-trips exactly


def test_plant_exposes_dynamic_state_before_input(system, qw):
    plant = Plant(system, qw)
    rng = np.random.default_rng(6)
    for _ in range(5):
        pre = plant.dynamic_state()
        u, w = rng.standard_normal(3), rng.standard_normal(9)
        x, _ = plant.step(u, w)
        # frequencies are dynamic: unaffected by the current input
        np.testing.assert_allclose(x[:3], pre[:3], atol=1e-12)
