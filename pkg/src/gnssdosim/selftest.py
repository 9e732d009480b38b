"""Fast built-in property checks behind the `selftest` CLI command.

Each check is named; a failure reports the violated property. The optional
fault argument injects a known defect into the simulated plant (not into the
expectations), so the suite can demonstrate that it catches real modeling
errors, e.g. a mis-signed acceleration sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .discipline import ControllerParams, controller_step, initial_state
from .efc_chain import EfcChainParams, EfcCommand, command_to_target_voltage, simulate_stage_noise
from .noisegen import (
    NoiseKind,
    NoiseSpec,
    fit_loglog_slope,
    generate_fractional_frequency_series,
    overlapping_allan_deviation,
)
from .oscillator import ClockState, Oscillator, OscillatorParams
from .outputs import schedule_pulse, grid_error_half_ps
from .tagging import TaggingParams, TagSource, tag_event
from .timebase import FractionalFrequency, TimeInstant, TimeSpan


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_noise_slope(kind: NoiseKind, expected: float, n=200_000) -> CheckResult:
    dt = TimeSpan.from_ms(10)
    y = generate_fractional_frequency_series(NoiseSpec(kind, 1e-24, seed=17), n, dt)
    taus = [TimeSpan.from_ms(10 * m) for m in (10, 20, 50, 100, 200, 500)]
    curve = overlapping_allan_deviation(y, dt, taus)
    slope = fit_loglog_slope(
        np.array([t.ps / 1e12 for t, _ in curve]), np.array([a for _, a in curve])
    )
    ok = abs(slope - expected) < 0.1
    return CheckResult(
        f"noise_slope_{kind.value}", ok, f"slope {slope:+.3f}, expected {expected:+.1f} +/- 0.1"
    )


def _closed_loop(osc_params: OscillatorParams, accel_fn, seconds: int, plant_params=None):
    """Minimal plant/controller loop at 10 ms steps, perfect measurements."""
    chain = EfcChainParams(stage_noise_rms=0.0)
    cp = ControllerParams()
    dt = TimeSpan.from_ms(10)
    n = seconds * 100
    osc = Oscillator(plant_params or osc_params, n, dt)
    st = osc.initial_state()
    ctrl = initial_state(chain)
    v = command_to_target_voltage(chain, ctrl.last_command)
    residuals = []
    for k in range(n):
        st = osc.step(st, v, accel_fn(k * 0.01), dt)
        if (k + 1) % 100 == 0:
            cmd, ctrl = controller_step(
                ctrl, cp, TimeSpan(st.phase_error_ps), (k + 1) / 100.0, osc_params, chain
            )
            v = command_to_target_voltage(chain, cmd)
            residuals.append(st.phase_error_ps)
    return residuals


def _check_controller_lock() -> CheckResult:
    osc_params = OscillatorParams(initial_frequency_error=FractionalFrequency.from_ppm(1))
    residuals = _closed_loop(osc_params, lambda t: (0.0, 0.0, 0.0), 600)
    tail = residuals[-30:]
    worst = max(abs(r) for r in tail)
    return CheckResult(
        "controller_lock", worst < 1000, f"residual {worst} ps after 600 s, bound 1000 ps"
    )


def _check_lock_under_circles(fault: str | None) -> CheckResult:
    """Closed-loop stability under alternating lateral g, plus drift-sign audit.

    The sign audit drives +1 g along the configured sensitivity axis open-loop
    and requires the phase drift to match the sign the profile promises; a
    plant with a flipped sensitivity axis fails here.
    """
    osc_params = OscillatorParams()  # 0.2 ppb/g along +z
    plant = osc_params
    if fault == "flip_g_sign":
        plant = replace(osc_params, g_axis=(0.0, 0.0, -1.0))

    dt = TimeSpan.from_ms(10)
    osc = Oscillator(plant, 1000, dt)
    st = osc.initial_state()
    for _ in range(1000):
        st = osc.step(st, osc_params.efc_midscale, (0.0, 0.0, 1.0), dt)
    expected = 2000  # +0.2 ppb for 10 s
    sign_ok = st.phase_error_ps * expected > 0 and abs(st.phase_error_ps - expected) <= 200
    if not sign_ok:
        return CheckResult(
            "lock_under_circles", False,
            f"open-loop drift {st.phase_error_ps} ps under +1 g, expected about +{expected} ps",
        )

    def circles(t_s):
        lateral = 0.45 if (int(t_s) // 30) % 2 == 0 else -0.45
        return (0.0, 0.0, lateral)  # sensitivity axis is z

    residuals = _closed_loop(osc_params, circles, 300, plant_params=plant)
    worst = max(abs(r) for r in residuals[60:])
    return CheckResult(
        "lock_under_circles", worst < 10_000, f"residual {worst} ps under circling, bound 10 ns"
    )


def _check_coarse_quantization() -> CheckResult:
    params = TaggingParams(fine_enabled=False)
    rng = np.random.Generator(np.random.PCG64(23))
    state = ClockState(phase_error_ps=0, y_femto=0, elapsed_ps=10**10, window_start_ps=0)
    errs = []
    for off in rng.integers(0, 10**10, 20_000).tolist():
        t = TimeInstant(int(off))
        tag = tag_event(t, state, params, rng, TagSource.GNSS_PULSE)
        errs.append(tag.local_timestamp.ps - t.ps)
    std = float(np.std(errs))
    target = 10_000 / math.sqrt(12)
    ok = abs(std - target) / target < 0.15
    return CheckResult("coarse_quantization_stats", ok, f"std {std:.0f} ps vs {target:.0f} ps")


def _check_fine_stage() -> CheckResult:
    params = TaggingParams()
    rng = np.random.Generator(np.random.PCG64(29))
    state = ClockState(phase_error_ps=0, y_femto=0, elapsed_ps=10**10, window_start_ps=0)
    t = TimeInstant(5_000_000_123)
    errs = [
        tag_event(t, state, params, rng, TagSource.GNSS_PULSE).local_timestamp.ps - t.ps
        for _ in range(20_000)
    ]
    std = float(np.std(errs))
    ok = abs(std - 35.0) / 35.0 < 0.15
    return CheckResult("fine_stage_stats", ok, f"std {std:.1f} ps vs 35 ps")


def _check_pulse_grid() -> CheckResult:
    rng = np.random.Generator(np.random.PCG64(31))
    worst = 0
    for target in rng.integers(0, 10**13, 20_000).tolist():
        ev = schedule_pulse(TimeInstant(int(target)), TimeInstant(0))
        worst = max(worst, grid_error_half_ps(ev, TimeInstant(int(target))))
    return CheckResult("pulse_grid", worst <= 312, f"worst error {worst / 2} ps, bound 156.25 ps")


def _check_efc_chain() -> CheckResult:
    rms = simulate_stage_noise(EfcChainParams(), TimeSpan.from_s(10), seed=37)
    ok = abs(rms - 2.75e-6) / 2.75e-6 < 0.2
    return CheckResult("efc_chain_rms", ok, f"output rms {rms * 1e6:.2f} uV vs 2.75 uV")


def run_checks(fault: str | None = None) -> list[CheckResult]:
    checks = [
        _check_noise_slope(NoiseKind.WHITE_FM, -0.5),
        _check_noise_slope(NoiseKind.FLICKER_FM, 0.0),
        _check_noise_slope(NoiseKind.RANDOM_WALK_FM, +0.5),
        _check_controller_lock(),
        _check_lock_under_circles(fault),
        _check_coarse_quantization(),
        _check_fine_stage(),
        _check_pulse_grid(),
        _check_efc_chain(),
    ]
    return checks
