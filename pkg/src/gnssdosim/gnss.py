"""Stochastic GNSS timing-receiver model with environment-dependent error.

Each receiver emits one timing pulse per interval on the exact epoch grid; the
pulse's physical emission errs from the true epoch by

    bias(env) + sigma_slow(env) * (cmf * C + (1 - cmf) * P) + white(env)

where C is a slowly wandering process shared by every receiver in the scenario
(ionosphere, orbits), P is the receiver's private slow process, and cmf is the
common-mode fraction. Differential operation subtracts a stationary open-sky
base receiver's systematic error, cancelling the shared part.

Error magnitudes per environment are calibration parameters, not datasheet
values; the bundled defaults separate a multi-band timing receiver from a
single-band one mainly through multipath-dominated environments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .timebase import PS_PER_SECOND, TimeInstant, TimeSpan


class EnvironmentClass(enum.Enum):
    OPEN_SKY = "open_sky"
    URBAN_CANYON = "urban_canyon"
    RURAL = "rural"
    HIGHWAY = "highway"
    NO_FIX = "no_fix"


class GnssMode(enum.Enum):
    SINGLE_BAND = "single_band"
    MULTI_BAND = "multi_band"
    MULTI_BAND_DIFFERENTIAL = "multi_band_differential"


@dataclass(frozen=True)
class EnvErrorModel:
    bias_ns: float
    white_sigma_ns: float
    slow_sigma_ns: float
    slow_tau_s: float
    availability: float

    def __post_init__(self):
        if not 0.0 <= self.availability <= 1.0:
            raise ConfigError("gnss.availability", "must be within [0, 1]")
        if self.slow_tau_s <= 0:
            raise ConfigError("gnss.slow_tau_s", "must be positive")


def _table(rows) -> dict[EnvironmentClass, EnvErrorModel]:
    return {env: EnvErrorModel(*vals) for env, vals in rows.items()}


DEFAULT_MULTI_BAND = _table({
    EnvironmentClass.OPEN_SKY: (2.0, 3.0, 5.0, 100.0, 1.0),
    EnvironmentClass.HIGHWAY: (3.0, 4.0, 8.0, 100.0, 0.98),
    EnvironmentClass.RURAL: (3.0, 4.0, 8.0, 100.0, 0.95),
    EnvironmentClass.URBAN_CANYON: (8.0, 8.0, 15.0, 80.0, 0.75),
    EnvironmentClass.NO_FIX: (0.0, 0.0, 0.0, 100.0, 0.0),
})

DEFAULT_SINGLE_BAND = _table({
    EnvironmentClass.OPEN_SKY: (5.0, 8.0, 12.0, 100.0, 1.0),
    EnvironmentClass.HIGHWAY: (8.0, 10.0, 20.0, 100.0, 0.95),
    EnvironmentClass.RURAL: (8.0, 10.0, 20.0, 100.0, 0.90),
    EnvironmentClass.URBAN_CANYON: (25.0, 15.0, 45.0, 80.0, 0.60),
    EnvironmentClass.NO_FIX: (0.0, 0.0, 0.0, 100.0, 0.0),
})


@dataclass(frozen=True)
class GnssReceiverParams:
    mode: GnssMode = GnssMode.MULTI_BAND_DIFFERENTIAL
    pulse_interval: TimeSpan = TimeSpan.from_ms(100)
    env_models: dict[EnvironmentClass, EnvErrorModel] = field(
        default_factory=lambda: dict(DEFAULT_MULTI_BAND)
    )
    common_mode_fraction: float = 0.8
    # Constant per-receiver offset (antenna placement, cabling).
    antenna_bias_ns: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.common_mode_fraction <= 1.0:
            raise ConfigError("gnss.common_mode_fraction", "must be within [0, 1]")
        missing = [e.value for e in EnvironmentClass if e not in self.env_models]
        if missing:
            raise ConfigError("gnss.env_models", f"missing environments: {missing}")
        if self.env_models[EnvironmentClass.NO_FIX].availability != 0.0:
            raise ConfigError("gnss.env_models", "no_fix availability must be 0")
        if self.pulse_interval.ps <= 0:
            raise ConfigError("gnss.pulse_interval", "must be positive")


@dataclass(frozen=True)
class GnssPulse:
    true_time: TimeInstant  # exact epoch, multiple of the pulse interval
    receiver_error: TimeSpan  # physical emission error vs. the epoch
    valid: bool
    # Systematic (bias + slow) share of receiver_error; the quantity a base
    # station's correction stream removes in differential mode.
    slow_error: TimeSpan = TimeSpan(0)


@dataclass(frozen=True)
class CommonModeStream:
    """Scenario-shared slow error realization, unit variance, read-only."""

    values: np.ndarray
    dt: TimeSpan


def make_common_stream(seed: int, n: int, dt: TimeSpan, tau_s: float = 100.0) -> CommonModeStream:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    phi = math.exp(-(dt.ps / PS_PER_SECOND) / tau_s)
    w = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = w[0]
    drive = math.sqrt(1.0 - phi * phi)
    for k in range(1, n):
        x[k] = phi * x[k - 1] + drive * w[k]
    return CommonModeStream(values=x, dt=dt)


def generate_pulses(
    params: GnssReceiverParams,
    env_timeline: Callable[[TimeInstant], EnvironmentClass],
    duration: TimeSpan,
    seed: int,
    common_stream: CommonModeStream,
) -> list[GnssPulse]:
    """One pulse per interval over (0, duration], deterministic given seeds."""
    if duration.ps <= 0:
        raise ConfigError("gnss.duration", "must be positive")
    if common_stream.dt.ps != params.pulse_interval.ps:
        raise ConfigError("gnss.common_stream", "stream rate must match the pulse interval")
    n = duration.ps // params.pulse_interval.ps
    if common_stream.values.size < n:
        raise ConfigError("gnss.common_stream", "stream shorter than the scenario")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    white_draws = rng.standard_normal(n)
    avail_draws = rng.random(n)
    private_draws = rng.standard_normal(n)
    dt_s = params.pulse_interval.ps / PS_PER_SECOND
    cmf = params.common_mode_fraction
    pulses = []
    p = private_draws[0]
    for k in range(n):
        epoch = (k + 1) * params.pulse_interval.ps
        env = env_timeline(TimeInstant(epoch))
        model = params.env_models[env]
        if k > 0:
            phi = math.exp(-dt_s / model.slow_tau_s)
            p = phi * p + math.sqrt(1.0 - phi * phi) * private_draws[k]
        slow_ns = (
            model.bias_ns
            + params.antenna_bias_ns
            + model.slow_sigma_ns * (cmf * common_stream.values[k] + (1.0 - cmf) * p)
        )
        err_ns = slow_ns + model.white_sigma_ns * white_draws[k]
        valid = avail_draws[k] < model.availability
        pulses.append(
            GnssPulse(
                true_time=TimeInstant(epoch),
                receiver_error=TimeSpan(round(err_ns * 1000.0)),
                valid=valid,
                slow_error=TimeSpan(round(slow_ns * 1000.0)),
            )
        )
    return pulses


def apply_differential(
    rover_params: GnssReceiverParams,
    base_pulses: list[GnssPulse],
    rover_pulses: list[GnssPulse],
) -> list[GnssPulse]:
    """Subtract the base station's systematic error from a rover's pulses.

    The base is assumed stationary under open sky; epochs must line up. Rover
    white jitter is untouched. Epochs where the base has no fix pass through
    uncorrected.
    """
    if rover_params.mode is not GnssMode.MULTI_BAND_DIFFERENTIAL:
        raise ConfigError("gnss.mode", "differential correction requires multi_band_differential mode")
    if len(base_pulses) != len(rover_pulses):
        raise ConfigError("gnss.differential", "base and rover pulse counts differ")
    out = []
    for base, rover in zip(base_pulses, rover_pulses):
        if base.true_time != rover.true_time:
            raise ConfigError("gnss.differential", "base and rover epochs differ")
        if not base.valid:
            out.append(rover)
            continue
        out.append(
            GnssPulse(
                true_time=rover.true_time,
                receiver_error=rover.receiver_error - base.slow_error,
                valid=rover.valid,
                slow_error=rover.slow_error - base.slow_error,
            )
        )
    return out
