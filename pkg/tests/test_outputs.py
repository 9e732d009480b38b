import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnssdosim.errors import ConfigError, SchedulingError
from gnssdosim.outputs import (
    GRID_HALF_PS,
    OutputConfig,
    PulseMode,
    PulseModeKind,
    divided_edges,
    grid_error_half_ps,
    mark_following_edge,
    periodic_pulse_times,
    schedule_pulse,
)
from gnssdosim.timebase import TimeInstant, TimeSpan

T0 = TimeInstant(0)


def test_target_on_grid_schedules_exactly():
    target = TimeInstant(625_000)  # 1000 grid steps x 312.5 ps
    ev = schedule_pulse(target, T0)
    assert ev.grid_index == 2000
    assert ev.scheduled_local_time == target
    assert grid_error_half_ps(ev, target) == 0


def test_target_off_grid_rounds_to_nearest():
    base = TimeInstant(625_000)
    target = TimeInstant(base.ps + 100)  # 100 ps past a grid point
    ev = schedule_pulse(target, T0)
    assert ev.grid_index == 2000
    assert grid_error_half_ps(ev, target) == 200  # 100 ps in half-ps units


def test_past_target_rejected():
    with pytest.raises(SchedulingError):
        schedule_pulse(TimeInstant(100), TimeInstant(200))


@given(st.integers(0, 10**15))
def test_grid_error_never_exceeds_half_step(target_ps):
    ev = schedule_pulse(TimeInstant(target_ps), T0)
    assert grid_error_half_ps(ev, TimeInstant(target_ps)) <= GRID_HALF_PS // 2 + (GRID_HALF_PS % 2)
    # exact bound: 156.25 ps = 312.5 half-ps, integer cap 312 after rounding to grid
    assert grid_error_half_ps(ev, TimeInstant(target_ps)) <= 312


def test_many_random_targets_meet_worst_case_bound():
    rng = np.random.Generator(np.random.PCG64(5))
    targets = rng.integers(0, 10**13, size=100_000)
    worst = 0
    for t in targets.tolist():
        ev = schedule_pulse(TimeInstant(int(t)), T0)
        worst = max(worst, grid_error_half_ps(ev, TimeInstant(int(t))))
    assert worst <= 312  # 156 ps < 156.25 ps bound


def test_sysref_periodic_spacing():
    mode = PulseMode(PulseModeKind.SYSREF_PERIODIC, TimeSpan.from_us(1))
    times = periodic_pulse_times(mode, (TimeInstant(0), TimeInstant(10**7)))
    assert len(times) == 10
    diffs = {b.ps - a.ps for a, b in zip(times, times[1:])}
    assert diffs == {10**6}


def test_sysref_period_must_be_clock_multiple():
    with pytest.raises(ConfigError):
        PulseMode(PulseModeKind.SYSREF_PERIODIC, TimeSpan(15_000))


def test_mark_following_edge_cases():
    # already on a 10 MHz edge
    edge = mark_following_edge(TimeInstant(100_000), 10)
    assert edge == TimeInstant(100_000)
    # 3 ns past a 100 MHz edge: next edge comes 7 ns later
    edge = mark_following_edge(TimeInstant(50_000 + 3_000), 1)
    assert edge == TimeInstant(60_000)
    # idempotent
    assert mark_following_edge(edge, 1) == edge


def test_divided_edges_subset_and_counts():
    w = (TimeInstant(0), TimeInstant(100_000))
    e1 = divided_edges(1, w)
    e10 = divided_edges(10, w)
    assert len(e1) == 10
    assert set(t.ps for t in e10) <= set(t.ps for t in e1)
    # divisor 5 -> 20 MHz -> 50 ns period
    e5 = divided_edges(5, (TimeInstant(0), TimeInstant(200_000)))
    assert e5[1].ps - e5[0].ps == 50_000


def test_every_10mhz_edge_retimes_onto_100mhz_edge():
    for ps in (1, 4_999, 75_321):
        slow = mark_following_edge(TimeInstant(ps), 10)
        assert slow.ps % 10_000 == 0  # also a 100 MHz edge


def test_output_config_validation():
    with pytest.raises(ConfigError):
        OutputConfig(clock_divisor=3)
    with pytest.raises(ConfigError):
        OutputConfig(channels=(PulseMode(PulseModeKind.OFF),) * 4)
