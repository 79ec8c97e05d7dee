import numpy as np
import pytest
import yaml

from deepc_lds.errors import ValidationError
from deepc_lds.schedule import DemandSchedule, load_schedule, schedule_from_dict


def test_shipped_schedule(grid, schedule):
    assert schedule.starts == [0, 50, 250]
    d0 = schedule.demand_at(0)
    assert d0[grid.internal_index(5)] == 1.25 and d0[grid.internal_index(1)] == 0.0
    np.testing.assert_allclose(schedule.demand_at(50), 1.1 * d0)
    np.testing.assert_allclose(schedule.demand_at(399), 0.9 * d0)
    assert schedule.segment_index(49) == 0 and schedule.segment_index(50) == 1


def test_bounds_truncate_to_steps(schedule):
    assert schedule.bounds(400) == [(0, 50), (50, 250), (250, 400)]
    assert schedule.bounds(100) == [(0, 50), (50, 100)]
    assert schedule.bounds(30) == [(0, 30)]


def test_list_and_mapping_forms_agree(grid):
    a = schedule_from_dict({"segments": [{"t_start": 0, "demand": {5: 1.0, 9: 0.5}}]}, grid)
    lst = [0.0] * 9
    lst[4], lst[8] = 1.0, 0.5
    b = schedule_from_dict({"segments": [{"t_start": 0, "demand": lst}]}, grid)
    np.testing.assert_array_equal(a.demand_at(0), b.demand_at(0))
    again = schedule_from_dict(a.to_dict(grid), grid)
    np.testing.assert_array_equal(again.demand_at(0), a.demand_at(0))


@pytest.mark.parametrize(
    "segments, msg",
    [
        ([], "at least one"),
        ([(1, [1.0])], "t=0"),
        ([(0, [1.0]), (0, [1.0])], "increasing"),
        ([(0, [1.0]), (5, [1.0, 2.0])], "one length"),
        ([(0, [-1.0])], "nonnegative"),
        ([(0, [np.nan])], "finite"),
    ],
)
def test_invalid_schedules(segments, msg):
    with pytest.raises(ValidationError, match=msg):
        DemandSchedule(tuple(segments))


def test_bad_documents(grid, tmp_path):
    with pytest.raises(ValidationError, match="segments"):
        schedule_from_dict({"steps": []}, grid)
    with pytest.raises(ValidationError, match="unknown bus"):
        schedule_from_dict({"segments": [{"t_start": 0, "demand": {42: 1.0}}]}, grid)
    with pytest.raises(ValidationError, match="9 entries"):
        schedule_from_dict({"segments": [{"t_start": 0, "demand": [1.0]}]}, grid)
    with pytest.raises(ValidationError, match="malformed"):
        schedule_from_dict({"segments": [{"demand": [0.0] * 9}]}, grid)
    with pytest.raises(ValidationError, match="not found"):
        load_schedule(tmp_path / "none.yaml", grid)
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump({"segments": [{"t_start": 0, "demand": [0.5] * 9}]}))
    assert load_schedule(p, grid).n == 9
