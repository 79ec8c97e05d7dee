import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepc_lds.errors import ValidationError
from deepc_lds.metrics import (
    RunMetrics,
    compare,
    compute_metrics,
    settles_no_later,
    settling_index,
    SegmentMetrics,
)
from deepc_lds.schedule import DemandSchedule
from deepc_lds.setpoint import compute_setpoint
from deepc_lds.simulate import Trajectory


def test_geometric_decay_settles_at_seven():
    sig = 0.1 * 0.5 ** np.arange(40)
    assert settling_index(sig, 1e-3) == 7
    assert 0.1 * 0.5**6 >= 1e-3 > 0.1 * 0.5**7


def test_constant_zero_settles_immediately():
    assert settling_index(np.zeros(30)) == 0


def test_unsettled_cases():
    assert settling_index(np.ones(30)) is None
    # below threshold only for the last 5 samples: not enough to confirm
    sig = np.r_[np.ones(25), np.zeros(5)]
    assert settling_index(sig) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.integers(1, 50))
def test_appending_settled_samples_keeps_settling_time(values, extra):
    sig = np.array(values + [0.0] * 20)
    k = settling_index(sig, 1e-3)
    assert k is not None
    assert settling_index(np.r_[sig, np.zeros(extra)], 1e-3) == k


def _at_setpoint(grid, system, demand, T):
    sp = compute_setpoint(grid, system, demand)
    return sp, Trajectory(
        np.tile(sp.u_s, (T, 1)), np.tile(sp.w_s, (T, 1)), np.tile(sp.y_s, (T, 1)), np.tile(sp.x_s, (T, 1))
    )


def test_equilibrium_metrics_are_zero(grid, system, schedule):
    sp, traj = _at_setpoint(grid, system, schedule.demand_at(0), 60)
    sched = DemandSchedule.constant(sp.w_s)
    m = compute_metrics(traj, sched, [sp], grid.g)
    assert len(m.segments) == 1
    seg = m.segments[0]
    assert (seg.t_start, seg.t_end, seg.settling_time) == (0, 60, 0)
    assert seg.peak_frequency == seg.ise_frequency == seg.control_effort == 0.0


def test_metrics_are_nonnegative_and_bounded(deepc_run, droop_run, schedule, grid):
    for run in (deepc_run, droop_run):
        m = compute_metrics(run.trajectory, schedule, run.setpoints, grid.g)
        assert len(m.segments) == 3
        for seg in m.segments:
            assert seg.peak_frequency >= 0 and seg.ise_frequency >= 0 and seg.control_effort >= 0
            assert seg.settling_time is None or 0 <= seg.settling_time <= seg.t_end - seg.t_start


def test_compare_with_itself_is_identical(deepc_run, schedule, grid):
    m = compute_metrics(deepc_run.trajectory, schedule, deepc_run.setpoints, grid.g)
    report = compare(m, m)
    rows = list(report.rows())
    for a, b in zip(rows[::2], rows[1::2]):
        assert a[1:] == b[1:]
    text = report.report()
    assert text.splitlines()[0] == "controller," + ",".join(RunMetrics.HEADER)
    assert len(text.splitlines()) == 1 + 2 * 3


def test_settles_no_later():
    def seg(k):
        return SegmentMetrics(0, 10, k, 0.0, 0.0, 0.0)

    assert settles_no_later(seg(3), seg(5)) and not settles_no_later(seg(5), seg(3))
    assert settles_no_later(seg(3), seg(None)) and not settles_no_later(seg(None), seg(3))
    assert settles_no_later(seg(None), seg(None))
    assert seg(None).as_row()[2] == "unsettled"


def test_errors(grid, system, schedule, deepc_run):
    sp, traj = _at_setpoint(grid, system, schedule.demand_at(0), 10)
    with pytest.raises(ValidationError, match="latent"):
        compute_metrics(Trajectory(traj.u, traj.w, traj.y), schedule, [sp], grid.g)
    with pytest.raises(ValidationError, match="setpoints"):
        compute_metrics(deepc_run.trajectory, schedule, [sp], grid.g)
    with pytest.raises(ValidationError, match="threshold"):
        compute_metrics(traj, schedule, [sp], grid.g, threshold=0.0)
    m1 = compute_metrics(traj, schedule, [sp], grid.g)
    m3 = compute_metrics(deepc_run.trajectory, schedule, deepc_run.setpoints, grid.g)
    with pytest.raises(ValidationError, match="segments"):
        compare(m1, m3)
