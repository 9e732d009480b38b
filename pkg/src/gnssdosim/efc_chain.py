"""Actuation path from controller word to oscillator steering voltage.

A 16-bit DAC is dithered between adjacent codes (deterministic PWM over a
fixed frame), amplified to the 0..10 V steering range, and smoothed by a
first-order 100 Hz low-pass that also band-limits the stage's thermal noise.
Time-averaged dithering raises the effective resolution well past the DAC's
native 16 bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, ContractError
from .timebase import PS_PER_SECOND, TimeSpan

# Calibrated so the default chain (stage noise + worst-case dither ripple)
# totals 2.75 uV RMS at the output; see simulate_stage_noise.
STAGE_NOISE_RMS_DEFAULT = 2.51e-6


@dataclass(frozen=True)
class EfcChainParams:
    dac_bits: int = 16
    dither_period: int = 16  # DAC updates per dither frame
    gain_output_min: float = 0.0
    gain_output_max: float = 10.0
    lowpass_cutoff_hz: float = 100.0
    # Output-referred RMS of the stage's additive noise after the low-pass.
    stage_noise_rms: float = STAGE_NOISE_RMS_DEFAULT
    update_interval: TimeSpan = TimeSpan.from_us(10)

    def __post_init__(self):
        if self.dac_bits < 1:
            raise ConfigError("efc.dac_bits", "need at least one bit")
        if self.lowpass_cutoff_hz <= 0:
            raise ConfigError("efc.lowpass_cutoff_hz", "cutoff must be positive")
        if self.gain_output_min >= self.gain_output_max:
            raise ConfigError("efc.gain_output", "output range must be non-empty")
        if self.dither_period < 1:
            raise ConfigError("efc.dither_period", "dither frame needs >= 1 step")

    @property
    def max_code(self) -> int:
        return (1 << self.dac_bits) - 1

    @property
    def full_scale(self) -> float:
        return self.gain_output_max - self.gain_output_min


@dataclass(frozen=True)
class EfcCommand:
    """DAC code plus the fraction of each dither frame spent at code + 1."""

    code: int
    dither_fraction: float = 0.0


def _check_command(params: EfcChainParams, cmd: EfcCommand) -> None:
    if not 0 <= cmd.code <= params.max_code:
        raise ContractError(f"DAC code {cmd.code} outside 0..{params.max_code}")
    if not 0.0 <= cmd.dither_fraction < 1.0:
        raise ContractError(f"dither fraction {cmd.dither_fraction} outside [0,1)")
    if cmd.code == params.max_code and cmd.dither_fraction != 0.0:
        raise ContractError("top code cannot dither upward")


def command_to_target_voltage(params: EfcChainParams, cmd: EfcCommand) -> float:
    """Time-averaged output voltage commanded by a dithered DAC word."""
    _check_command(params, cmd)
    return params.gain_output_min + params.full_scale * (cmd.code + cmd.dither_fraction) / params.max_code


def quantize_voltage(params: EfcChainParams, volts: float) -> EfcCommand:
    """Nearest dithered command for a target voltage; clamps to the DAC range.

    Returns (command, clamped); achievable dither fractions are multiples of
    1/dither_period.
    """
    units = (volts - params.gain_output_min) / params.full_scale * params.max_code
    q = round(units * params.dither_period)
    clamped = False
    if q < 0:
        q, clamped = 0, True
    top = params.max_code * params.dither_period
    if q > top:
        q, clamped = top, True
    return EfcCommand(q // params.dither_period, (q % params.dither_period) / params.dither_period), clamped


def dither_level(params: EfcChainParams, cmd: EfcCommand, step_index: int) -> int:
    """DAC code actually driven at a given update step of the PWM frame."""
    high_steps = round(cmd.dither_fraction * params.dither_period)
    return cmd.code + (1 if step_index % params.dither_period < high_steps else 0)


def lowpass_alpha(params: EfcChainParams, dt: TimeSpan) -> float:
    """Per-step gain of the exact discretization of the RC low-pass."""
    tau_s = 1.0 / (2.0 * math.pi * params.lowpass_cutoff_hz)
    return 1.0 - math.exp(-(dt.ps / PS_PER_SECOND) / tau_s)


def lowpass_step(v: float, v_target: float, dt: TimeSpan, params: EfcChainParams) -> float:
    """One exact step of the first-order low-pass toward v_target."""
    if dt.ps <= 0:
        raise ContractError("lowpass_step requires dt > 0")
    return v + lowpass_alpha(params, dt) * (v_target - v)


def simulate_stage_noise(
    params: EfcChainParams,
    duration: TimeSpan,
    seed: int,
    command: EfcCommand | None = None,
) -> float:
    """Run the chain at its native update rate, return output RMS about the mean.

    The probe command defaults to midscale at 50% duty, the worst case for
    dither ripple. Additive stage noise enters before the low-pass, scaled so
    its filtered contribution alone has RMS = stage_noise_rms.
    """
    if duration.ps < 10 * PS_PER_SECOND:
        raise ContractError("stage-noise simulation needs >= 10 s")
    if command is None:
        command = EfcCommand(params.max_code // 2, 0.5)
    _check_command(params, command)
    n = duration.ps // params.update_interval.ps
    lsb = params.full_scale / params.max_code
    steps = np.arange(n)
    levels = params.gain_output_min + lsb * (
        command.code + (steps % params.dither_period < round(command.dither_fraction * params.dither_period))
    )
    a = lowpass_alpha(params, params.update_interval)
    if params.stage_noise_rms > 0.0:
        # var_out = var_in * a / (2 - a) for white input through this filter
        sigma_in = params.stage_noise_rms * math.sqrt((2.0 - a) / a)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        levels = levels + sigma_in * rng.standard_normal(n)
    v0 = command_to_target_voltage(params, command)
    out, _ = lfilter([a], [1.0, -(1.0 - a)], levels, zi=[(1.0 - a) * v0])
    settle = min(n // 10, 5 * round(1.0 / a))
    out = out[settle:]
    return float(np.sqrt(np.mean((out - out.mean()) ** 2)))


def enob_bits(full_scale: float, rms: float) -> float:
    """Effective resolution in bits for a given output noise floor."""
    return math.log2(full_scale / rms)
