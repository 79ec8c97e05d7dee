import importlib.util
import logging
from pathlib import Path

import numpy as np
import pytest

from deepc_lds.droop import DEFAULT_GAIN, DroopConfig, droop_input, run_droop
from deepc_lds.errors import ValidationError
from deepc_lds.metrics import compute_metrics
from deepc_lds.schedule import DemandSchedule
from deepc_lds.setpoint import compute_setpoint

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def setpoints(grid, system, schedule):
    return [compute_setpoint(grid, system, d) for _, d in schedule.segments]


@pytest.fixture(autouse=True)
def quiet_clips():
    logging.getLogger("deepc_lds.droop").setLevel(logging.ERROR)


def test_open_loop_equilibrium(grid, system, qw, setpoints):
    sp = setpoints[0]
    cfg = DroopConfig.uniform(0.0, sp.u_s)
    res = run_droop(grid, system, qw, cfg, DemandSchedule.constant(sp.w_s), 60)
    np.testing.assert_allclose(res.trajectory.x, np.tile(sp.x_s, (60, 1)), atol=1e-9)
    assert res.clip_events == 0


def test_no_feedback_does_not_settle(grid, system, qw, setpoints, schedule):
    cfg = DroopConfig.uniform(0.0, setpoints[0].u_s)
    steps = 250
    res = run_droop(grid, system, qw, cfg, schedule, steps)
    m = compute_metrics(res.trajectory, schedule, res.setpoints, grid.g)
    assert m.segments[0].settled and not m.segments[1].settled
    assert np.abs(res.trajectory.x[-1, : grid.g]).max() > 1e-3


def test_steady_offset_without_retargeting(grid, system, qw, setpoints, droop_run):
    # power balance at rest: sum(p_tilde) - (sum D + g k) omega = sum(p_d)
    omega = droop_run.trajectory.x[249, : grid.g]
    expected = (setpoints[0].u_s.sum() - setpoints[1].w_s.sum()) / (grid.damping.sum() + grid.g * DEFAULT_GAIN)
    np.testing.assert_allclose(omega, expected, rtol=1e-3)


def test_retargeted_offset_settles(grid, system, qw, setpoints, schedule):
    short = DemandSchedule(schedule.segments[:2])
    cfg = DroopConfig.uniform(DEFAULT_GAIN, setpoints[1].u_s)
    res = run_droop(grid, system, qw, cfg, short, 250)
    omega = np.abs(res.trajectory.x[:, : grid.g]).max(axis=1)
    assert omega[-20:].max() < 1e-3


def test_replay_is_deterministic(grid, system, qw, setpoints, schedule, droop_run):
    cfg = DroopConfig.uniform(DEFAULT_GAIN, setpoints[0].u_s)
    again = run_droop(grid, system, qw, cfg, schedule, len(droop_run.trajectory))
    assert np.array_equal(again.trajectory.u, droop_run.trajectory.u)
    assert np.array_equal(again.trajectory.x, droop_run.trajectory.x)


def test_shipped_run_never_clips(droop_run):
    assert droop_run.clip_events == 0
    assert droop_run.trajectory.u.min() >= 0


def test_clipping_is_counted_and_respected(grid, system, qw, setpoints, schedule, caplog):
    cfg = DroopConfig.uniform(8.0, setpoints[0].u_s)
    with caplog.at_level(logging.WARNING, logger="deepc_lds.droop"):
        logging.getLogger("deepc_lds.droop").setLevel(logging.WARNING)
        res = run_droop(grid, system, qw, cfg, schedule, 120)
    assert res.clip_events > 0
    assert res.trajectory.u.min() >= 0
    assert caplog.text.count("clipped") == 1


def test_droop_input():
    cfg = DroopConfig(np.diag([1.0, 2.0]), [1.0, 1.0])
    p, clipped = droop_input(cfg, np.array([0.5, 0.75]))
    np.testing.assert_allclose(p, [0.5, 0.0])
    assert clipped


def test_config_validation(grid, system, qw, schedule):
    with pytest.raises(ValidationError, match="diagonal"):
        DroopConfig(np.ones((2, 2)), [1.0, 1.0])
    with pytest.raises(ValidationError, match="nonnegative"):
        DroopConfig(np.diag([1.0, -1.0]), [1.0, 1.0])
    with pytest.raises(ValidationError, match="length"):
        DroopConfig(np.eye(2), [1.0])
    with pytest.raises(ValidationError, match="generators"):
        run_droop(grid, system, qw, DroopConfig.uniform(1.0, [1.0, 1.0]), schedule, 10)
    with pytest.raises(ValidationError, match="steps"):
        run_droop(grid, system, qw, DroopConfig.uniform(1.0, [1.0] * 3), schedule, 0)


def test_tuning_script_selects_the_shipped_gain(capsys):
    spec = importlib.util.spec_from_file_location("tune_droop", ROOT / "scripts" / "tune_droop.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    assert mod.main([]) == pytest.approx(DEFAULT_GAIN)
    assert "selected gain: 0.7" in capsys.readouterr().out
