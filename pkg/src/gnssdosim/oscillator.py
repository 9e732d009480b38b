"""Ovenized-oscillator model: EFC steering, acceleration pull, aging, noise.

The clock's instantaneous fractional frequency is the sum of a manufacturing
offset, the affine EFC response, the projection of proper acceleration onto
the crystal's sensitivity axis, an aging ramp, and pre-generated power-law
noise. Phase error integrates that frequency on the exact picosecond grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .noisegen import NoiseSpec, generate_fractional_frequency_series
from .timebase import (
    FEMTO_PER_UNIT,
    PS_PER_SECOND,
    FractionalFrequency,
    TimeInstant,
    TimeSpan,
    accumulate_phase_ps,
    round_div,
)

_PS_PER_DAY = 86_400 * PS_PER_SECOND


@dataclass(frozen=True)
class OscillatorParams:
    nominal_frequency_hz: float = 100e6
    # Frequency offset reached at the maximum EFC voltage, relative to the
    # midscale anchor (midscale voltage steers zero offset).
    efc_full_scale_offset: FractionalFrequency = FractionalFrequency.from_ppm(2)
    efc_voltage_min: float = 0.0
    efc_voltage_max: float = 10.0
    g_sensitivity_ppb_per_g: float = 0.2
    g_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    aging_per_day: FractionalFrequency = FractionalFrequency(0)
    noise: tuple[NoiseSpec, ...] = ()
    initial_frequency_error: FractionalFrequency = FractionalFrequency(0)

    def __post_init__(self):
        if self.efc_voltage_min >= self.efc_voltage_max:
            raise ConfigError("oscillator.efc_voltage", "voltage range must be non-empty")
        if self.g_sensitivity_ppb_per_g < 0:
            raise ConfigError("oscillator.g_sensitivity", "magnitude must be >= 0")
        norm = math.sqrt(sum(c * c for c in self.g_axis))
        if norm == 0.0 and self.g_sensitivity_ppb_per_g != 0.0:
            raise ConfigError("oscillator.g_axis", "axis must be a nonzero vector")
        if norm > 0.0 and abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "g_axis", tuple(c / norm for c in self.g_axis))

    @property
    def efc_midscale(self) -> float:
        return 0.5 * (self.efc_voltage_min + self.efc_voltage_max)


@dataclass(frozen=True)
class ClockState:
    """Clock phase and frequency at the end of the most recent step."""

    phase_error_ps: int = 0
    y_femto: int = 0  # instantaneous fractional frequency over the last step
    elapsed_ps: int = 0
    window_start_ps: int = 0
    noise_index: int = 0


def efc_to_frequency(params: OscillatorParams, efc_volts: float) -> FractionalFrequency:
    """Affine EFC map: midscale -> 0, max voltage -> +full-scale offset."""
    if not params.efc_voltage_min <= efc_volts <= params.efc_voltage_max:
        raise ContractError(
            f"EFC voltage {efc_volts} outside "
            f"[{params.efc_voltage_min}, {params.efc_voltage_max}]; clamp upstream"
        )
    half_span = params.efc_voltage_max - params.efc_midscale
    frac = (efc_volts - params.efc_midscale) / half_span
    return FractionalFrequency(round(params.efc_full_scale_offset.femto * frac))


def _efc_femto(params: OscillatorParams, efc_volts: float) -> int:
    if not params.efc_voltage_min <= efc_volts <= params.efc_voltage_max:
        raise ContractError(f"EFC voltage {efc_volts} out of range; clamp upstream")
    half_span = params.efc_voltage_max - params.efc_midscale
    return round(params.efc_full_scale_offset.femto * (efc_volts - params.efc_midscale) / half_span)


class Oscillator:
    """Owns the pre-generated noise realization for one clock over one run."""

    def __init__(
        self,
        params: OscillatorParams,
        n_steps: int,
        step_dt: TimeSpan,
        extra_y_femto: np.ndarray | None = None,
    ):
        """extra_y_femto: optional per-step frequency contribution (femto parts)
        computed ahead of time, e.g. the projection of a known acceleration
        profile; added on top of the generated noise."""
        self.params = params
        self.step_dt = step_dt
        total = np.zeros(n_steps)
        for spec in params.noise:
            total += generate_fractional_frequency_series(spec, n_steps, step_dt)
        self._noise_femto = np.rint(total * FEMTO_PER_UNIT).astype(np.int64)
        if extra_y_femto is not None:
            if extra_y_femto.shape != (n_steps,):
                raise ConfigError("oscillator.extra_y", "must provide one value per step")
            self._noise_femto = self._noise_femto + extra_y_femto.astype(np.int64)
        # Hoisted constants for the per-step hot path.
        self._g_femto_axis = tuple(
            params.g_sensitivity_ppb_per_g * c * 1e6 for c in params.g_axis
        )
        self._init_femto = params.initial_frequency_error.femto
        self._aging_femto_per_day = params.aging_per_day.femto

    def initial_state(self) -> ClockState:
        return ClockState()

    def step(
        self,
        state: ClockState,
        efc_volts: float,
        accel_g: tuple[float, float, float],
        dt: TimeSpan,
    ) -> ClockState:
        """Advance one step: integrate frequency into phase, consume one noise sample."""
        if dt.ps <= 0 or dt.ps > self.step_dt.ps:
            raise ContractError(f"dt must be in (0, {self.step_dt.ps}] ps")
        ax, ay, az = accel_g
        if not (math.isfinite(ax) and math.isfinite(ay) and math.isfinite(az)):
            raise ContractError("acceleration must be finite")
        gx, gy, gz = self._g_femto_axis
        y = self._init_femto + _efc_femto(self.params, efc_volts) + round(gx * ax + gy * ay + gz * az)
        if self._aging_femto_per_day:
            y += round_div(self._aging_femto_per_day * state.elapsed_ps, _PS_PER_DAY)
        if state.noise_index < self._noise_femto.size:
            y += int(self._noise_femto[state.noise_index])
        return ClockState(
            phase_error_ps=state.phase_error_ps + accumulate_phase_ps(y, dt.ps),
            y_femto=y,
            elapsed_ps=state.elapsed_ps + dt.ps,
            window_start_ps=state.elapsed_ps,
            noise_index=state.noise_index + 1,
        )


def phase_at(state: ClockState, true_time: TimeInstant) -> TimeInstant:
    """Local clock reading at a true-time instant inside the current step.

    Linear interpolation backward from the end-of-step phase using the step's
    instantaneous frequency; exact at the step boundary.
    """
    t = true_time.ps
    if not state.window_start_ps <= t <= state.elapsed_ps:
        raise ContractError(
            f"query {t} ps outside step window [{state.window_start_ps}, {state.elapsed_ps}]"
        )
    back = state.elapsed_ps - t
    phase = state.phase_error_ps - round_div(state.y_femto * back, FEMTO_PER_UNIT)
    return TimeInstant(t + phase)


def local_to_true(state: ClockState, local_target_ps: int) -> int:
    """True-time instant at which this clock's reading equals local_target_ps.

    Inverse of phase_at on the current step window, exact integer rounding.
    """
    num = (state.elapsed_ps + state.phase_error_ps - local_target_ps) * FEMTO_PER_UNIT
    back = round_div(num, FEMTO_PER_UNIT + state.y_femto)
    return state.elapsed_ps - back
