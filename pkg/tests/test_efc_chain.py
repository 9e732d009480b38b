import math

import pytest
from hypothesis import given, strategies as st

from gnssdosim.efc_chain import (
    EfcChainParams,
    EfcCommand,
    command_to_target_voltage,
    dither_level,
    enob_bits,
    lowpass_step,
    quantize_voltage,
    simulate_stage_noise,
)
from gnssdosim.errors import ContractError
from gnssdosim.timebase import TimeSpan

P = EfcChainParams()


def test_code_endpoints():
    assert command_to_target_voltage(P, EfcCommand(0, 0.0)) == 0.0
    assert command_to_target_voltage(P, EfcCommand(65535, 0.0)) == 10.0


def test_half_scale_with_dither_is_exact_midpoint():
    # 10 * 32767.5 / 65535 = 5 V exactly
    v = command_to_target_voltage(P, EfcCommand(32767, 0.5))
    assert v == pytest.approx(5.0, abs=1e-6)


def test_command_validation():
    with pytest.raises(ContractError):
        command_to_target_voltage(P, EfcCommand(65536, 0.0))
    with pytest.raises(ContractError):
        command_to_target_voltage(P, EfcCommand(65535, 0.25))
    with pytest.raises(ContractError):
        command_to_target_voltage(P, EfcCommand(10, 1.0))


@given(st.integers(0, 65534), st.integers(0, 65534), st.integers(0, 15), st.integers(0, 15))
def test_monotonic_in_code_plus_fraction(c1, c2, k1, k2):
    cmd1, cmd2 = EfcCommand(c1, k1 / 16), EfcCommand(c2, k2 / 16)
    v1, v2 = command_to_target_voltage(P, cmd1), command_to_target_voltage(P, cmd2)
    if (c1 + k1 / 16) < (c2 + k2 / 16):
        assert v1 < v2


def test_quantize_voltage_round_trip_and_clamp():
    cmd, clamped = quantize_voltage(P, 5.0)
    assert not clamped
    assert abs(command_to_target_voltage(P, cmd) - 5.0) < P.full_scale / P.max_code / P.dither_period
    lo, c_lo = quantize_voltage(P, -1.0)
    hi, c_hi = quantize_voltage(P, 11.0)
    assert c_lo and c_hi
    assert lo == EfcCommand(0, 0.0)
    assert hi == EfcCommand(65535, 0.0)


def test_dither_duty_matches_fraction():
    cmd = EfcCommand(100, 5 / 16)
    highs = sum(dither_level(P, cmd, i) - cmd.code for i in range(16))
    assert highs == 5


def test_lowpass_fixed_point():
    assert lowpass_step(3.3, 3.3, TimeSpan.from_us(10), P) == 3.3


def test_lowpass_step_response():
    # analytic: 1 - e^-1 at t = tau, >= 1 - e^-5 at 5 tau
    tau_s = 1.0 / (2 * math.pi * 100.0)
    dt = TimeSpan(round(tau_s * 1e12 / 1000))
    v = 0.0
    for _ in range(1000):
        v = lowpass_step(v, 1.0, dt, P)
    assert v == pytest.approx(1 - math.exp(-1), abs=1e-4)
    for _ in range(4000):
        v = lowpass_step(v, 1.0, dt, P)
    assert v >= 0.9932


def test_lowpass_dc_gain_unity():
    v = 0.7
    for _ in range(10000):
        v = lowpass_step(v, 0.7, TimeSpan.from_us(100), P)
    assert abs(v - 0.7) < 1e-9


def test_dither_average_settles_to_target():
    # post-filter mean over whole frames equals commanded voltage within 1 LSB / 2^6
    cmd = EfcCommand(12345, 7 / 16)
    params = EfcChainParams(stage_noise_rms=0.0)
    target = command_to_target_voltage(params, cmd)
    v = target
    acc = []
    for i in range(160_000):
        v = lowpass_step(v, dither_level(params, cmd, i) * params.full_scale / params.max_code, params.update_interval, params)
        acc.append(v)
    mean = sum(acc[16_000:]) / len(acc[16_000:])
    assert abs(mean - target) < (params.full_scale / params.max_code) / 2**6


def test_quiet_chain_has_zero_rms():
    params = EfcChainParams(stage_noise_rms=0.0)
    rms = simulate_stage_noise(params, TimeSpan.from_s(10), seed=0, command=EfcCommand(40000, 0.0))
    assert rms < 1e-12


def test_default_chain_rms_and_enob():
    rms = simulate_stage_noise(P, TimeSpan.from_s(10), seed=11)
    assert rms == pytest.approx(2.75e-6, rel=0.15)
    assert enob_bits(P.full_scale, rms) == pytest.approx(21.8, abs=0.3)


def test_enob_from_quoted_rms():
    assert enob_bits(10.0, 2.75e-6) == pytest.approx(21.79, abs=0.01)
