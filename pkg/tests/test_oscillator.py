import math

import pytest

from gnssdosim.errors import ContractError
from gnssdosim.oscillator import (
    ClockState,
    Oscillator,
    OscillatorParams,
    efc_to_frequency,
    local_to_true,
    phase_at,
)
from gnssdosim.timebase import FractionalFrequency, TimeInstant, TimeSpan

DT = TimeSpan.from_ms(10)
NO_ACCEL = (0.0, 0.0, 0.0)


def _run(params, n_steps, efc=None, accel=NO_ACCEL, dt=DT):
    osc = Oscillator(params, n_steps, dt)
    if efc is None:
        efc = params.efc_midscale
    st = osc.initial_state()
    for _ in range(n_steps):
        st = osc.step(st, efc, accel, dt)
    return st


def test_efc_map_anchors():
    p = OscillatorParams()
    assert efc_to_frequency(p, 5.0) == FractionalFrequency(0)
    assert efc_to_frequency(p, 10.0) == FractionalFrequency.from_ppm(2)
    assert efc_to_frequency(p, 0.0) == FractionalFrequency.from_ppm(-2)
    assert efc_to_frequency(p, 7.5) == FractionalFrequency.from_ppm(1)


def test_efc_map_rejects_out_of_range():
    with pytest.raises(ContractError):
        efc_to_frequency(OscillatorParams(), 10.5)


def test_ideal_clock_stays_at_zero():
    st = _run(OscillatorParams(), 1000)
    assert st.phase_error_ps == 0


def test_one_g_along_axis_for_100s():
    # 0.2 ppb * 100 s = 20 ns
    st = _run(OscillatorParams(), 10_000, accel=(0.0, 0.0, 1.0))
    assert st.phase_error_ps == 20_000
    assert st.y_femto == 200_000  # 0.2 ppb, exact


def test_full_scale_efc_for_1s():
    st = _run(OscillatorParams(), 100, efc=10.0)
    assert st.phase_error_ps == 2_000_000  # 2 us


def test_acceleration_linearity():
    # frequency response doubles exactly for any accel
    st1 = _run(OscillatorParams(), 500, accel=(0.0, 0.0, 0.7))
    st2 = _run(OscillatorParams(), 500, accel=(0.0, 0.0, 1.4))
    assert st2.y_femto == 2 * st1.y_femto
    assert abs(st2.phase_error_ps - 2 * st1.phase_error_ps) <= 500  # ps rounding
    # phase ramp doubles exactly when per-step increments are integral ps
    st1 = _run(OscillatorParams(), 500, accel=(0.0, 0.0, 1.0))
    st2 = _run(OscillatorParams(), 500, accel=(0.0, 0.0, 2.0))
    assert st2.phase_error_ps == 2 * st1.phase_error_ps


def test_orthogonal_acceleration_is_inert():
    st = _run(OscillatorParams(), 500, accel=(3.0, -2.0, 0.0))
    assert st.phase_error_ps == 0
    assert st.y_femto == 0


def test_non_finite_acceleration_rejected():
    osc = Oscillator(OscillatorParams(), 1, DT)
    with pytest.raises(ContractError):
        osc.step(osc.initial_state(), 5.0, (math.nan, 0.0, 0.0), DT)


def test_deterministic_sum_matches_closed_form_within_rounding():
    p = OscillatorParams(initial_frequency_error=FractionalFrequency.from_ppb(3.7))
    n = 5000
    st = _run(p, n)
    closed_form = 3.7e-9 * n * 0.01 * 1e12  # ps
    assert abs(st.phase_error_ps - closed_form) <= n


def test_substep_splitting_changes_phase_by_at_most_k_ps():
    p = OscillatorParams(initial_frequency_error=FractionalFrequency(123_456))
    whole = _run(p, 100, dt=DT)
    osc = Oscillator(p, 400, DT)
    st = osc.initial_state()
    quarter = TimeSpan(DT.ps // 4)
    for _ in range(400):
        st = osc.step(st, 5.0, NO_ACCEL, quarter)
    assert abs(st.phase_error_ps - whole.phase_error_ps) <= 400


def test_step_rejects_oversized_dt():
    osc = Oscillator(OscillatorParams(), 1, DT)
    with pytest.raises(ContractError):
        osc.step(osc.initial_state(), 5.0, NO_ACCEL, TimeSpan(DT.ps + 1))


def test_phase_at_ideal_clock():
    st = _run(OscillatorParams(), 10)
    t = TimeInstant(st.elapsed_ps - 5_000_000)
    assert phase_at(st, t) == t


def test_phase_at_interpolates_constant_offset():
    # constant +1 ppm, query 0.5 s into a 1 s step starting from zero phase
    p = OscillatorParams(initial_frequency_error=FractionalFrequency.from_ppm(1))
    osc = Oscillator(p, 1, TimeSpan.from_s(1))
    st = osc.step(osc.initial_state(), 5.0, NO_ACCEL, TimeSpan.from_s(1))
    local = phase_at(st, TimeInstant(500_000_000_000))
    assert local.ps - 500_000_000_000 == 500_000  # 0.5 us
    # at the boundary the stored phase error is returned exactly
    assert phase_at(st, TimeInstant(st.elapsed_ps)).ps == st.elapsed_ps + st.phase_error_ps


def test_phase_at_rejects_outside_window():
    st = _run(OscillatorParams(), 2)
    with pytest.raises(ContractError):
        phase_at(st, TimeInstant(st.window_start_ps - 1))


def test_local_to_true_inverts_phase_at():
    p = OscillatorParams(initial_frequency_error=FractionalFrequency.from_ppm(-1.5))
    osc = Oscillator(p, 1, TimeSpan.from_s(1))
    st = osc.step(osc.initial_state(), 5.0, NO_ACCEL, TimeSpan.from_s(1))
    # targets within the step's local reading range (clock runs 1.5 ppm slow)
    for local_target in (100_000_000_000, 999_998_000_000, 500_000_000_001):
        t = local_to_true(st, local_target)
        assert abs(phase_at(st, TimeInstant(t)).ps - local_target) <= 1
