"""Digital disciplining loop steering the oscillator's EFC toward GNSS time.

A discrete PI controller acts once per update interval on the averaged
time-tag residual. Startup pre-loads the integrator from a linear regression
over the first residual windows, so lock does not wait for the integral term
to wind up. Loss of measurements freezes the integrator and holds the last
DAC command (holdover); commands that clamp at the DAC rails are recorded as
saturation events and suspend integrator growth (anti-windup).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .efc_chain import EfcChainParams, EfcCommand, quantize_voltage
from .errors import ConfigError
from .oscillator import OscillatorParams
from .timebase import TimeSpan, span_to_seconds


class ControllerMode(enum.Enum):
    ACQUIRING = "acquiring"
    LOCKED = "locked"
    HOLDOVER = "holdover"


@dataclass(frozen=True)
class ControllerParams:
    # Fractional frequency correction per second of residual (1/s), and per
    # second of accumulated residual-seconds (1/s^2). Defaults give a
    # critically damped loop with a ~30 s time constant: fast enough to track
    # sub-ppb acceleration steps, slow enough to average receiver jitter.
    proportional_gain: float = 1.0 / 15.0
    integral_gain: float = 1.0 / 900.0
    update_interval: TimeSpan = TimeSpan.from_s(1)
    integrator_limit: float = 2e-6
    acquire_windows: int = 5

    def __post_init__(self):
        if self.proportional_gain < 0 or self.integral_gain < 0:
            raise ConfigError("controller.gains", "gains must be >= 0")
        if self.acquire_windows < 2:
            raise ConfigError("controller.acquire_windows", "need >= 2 windows")
        if self.update_interval.ps <= 0:
            raise ConfigError("controller.update_interval", "must be positive")


@dataclass(frozen=True)
class ControllerState:
    integrator: float = 0.0  # fractional frequency
    last_command: EfcCommand = EfcCommand(0, 0.0)
    mode: ControllerMode = ControllerMode.ACQUIRING
    saturated_since_s: float | None = None
    saturation_events: tuple[tuple[float, float], ...] = ()  # (start_s, duration_s)
    acquire_buffer: tuple[tuple[float, float], ...] = ()  # (t_s, residual_s)


def initial_state(chain: EfcChainParams) -> ControllerState:
    midscale, _ = quantize_voltage(chain, 0.5 * (chain.gain_output_min + chain.gain_output_max))
    return ControllerState(last_command=midscale)


def _command_for(
    u: float, osc: OscillatorParams, chain: EfcChainParams
) -> tuple[EfcCommand, bool]:
    """Map a frequency correction through the inverse EFC map to a DAC word."""
    half_span = osc.efc_voltage_max - osc.efc_midscale
    full_scale = osc.efc_full_scale_offset.femto / 1e15
    volts = osc.efc_midscale + (u / full_scale) * half_span
    return quantize_voltage(chain, volts)


def _track_saturation(state: ControllerState, clamped: bool, now_s: float) -> ControllerState:
    if clamped and state.saturated_since_s is None:
        return replace(state, saturated_since_s=now_s)
    if not clamped and state.saturated_since_s is not None:
        event = (state.saturated_since_s, now_s - state.saturated_since_s)
        return replace(
            state,
            saturated_since_s=None,
            saturation_events=state.saturation_events + (event,),
        )
    return state


def acquire(
    state: ControllerState, params: ControllerParams, residuals: list[tuple[float, float]]
) -> ControllerState:
    """Pre-load the integrator from the slope of the first valid residuals.

    The residual ramp rate over the first windows is the free-running
    frequency offset; seeding the integrator with its negation makes lock
    immediate instead of waiting on integral windup.
    """
    if len(residuals) < 2:
        return state
    t = np.array([r[0] for r in residuals])
    r = np.array([r[1] for r in residuals])
    slope = float(np.polyfit(t, r, 1)[0])
    integrator = float(np.clip(-slope, -params.integrator_limit, params.integrator_limit))
    return replace(state, integrator=integrator, mode=ControllerMode.LOCKED, acquire_buffer=())


def controller_step(
    state: ControllerState,
    params: ControllerParams,
    residual: TimeSpan | None,
    now_s: float,
    osc: OscillatorParams,
    chain: EfcChainParams,
) -> tuple[EfcCommand, ControllerState]:
    """One update-interval step; residual None means no measurement arrived."""
    if residual is None:
        if state.mode is ControllerMode.ACQUIRING:
            return state.last_command, state
        return state.last_command, replace(state, mode=ControllerMode.HOLDOVER)

    r = span_to_seconds(residual)

    if state.mode is ControllerMode.ACQUIRING:
        buf = state.acquire_buffer + ((now_s, r),)
        if len(buf) < params.acquire_windows:
            return state.last_command, replace(state, acquire_buffer=buf)
        state = acquire(replace(state, acquire_buffer=buf), params, list(buf))
        # fall through: issue the first steering command immediately

    dt_s = span_to_seconds(TimeSpan(params.update_interval.ps))
    candidate = state.integrator - params.integral_gain * r * dt_s
    candidate = float(np.clip(candidate, -params.integrator_limit, params.integrator_limit))
    u = candidate - params.proportional_gain * r
    command, clamped = _command_for(u, osc, chain)
    if clamped:
        # No integrator growth toward the active rail while the output clamps.
        deeper = abs(candidate) > abs(state.integrator)
        integrator = state.integrator if deeper else candidate
    else:
        integrator = candidate
    state = _track_saturation(state, clamped, now_s)
    state = replace(state, integrator=integrator, last_command=command, mode=ControllerMode.LOCKED)
    return command, state


def close_saturation(state: ControllerState, end_s: float) -> ControllerState:
    """Close an open saturation interval at scenario end."""
    if state.saturated_since_s is None:
        return state
    event = (state.saturated_since_s, end_s - state.saturated_since_s)
    return replace(
        state, saturated_since_s=None, saturation_events=state.saturation_events + (event,)
    )
