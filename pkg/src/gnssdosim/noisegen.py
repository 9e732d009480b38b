"""Seedable power-law clock-noise synthesis and Allan deviation estimation.

Fractional-frequency noise is parameterized by the usual power-law PSD
coefficients h_alpha, S_y(f) = h_alpha * f^alpha:

    white FM        alpha = 0    sigma_y(tau)^2 = h0 / (2 tau)
    flicker FM      alpha = -1   sigma_y(tau)^2 = 2 ln(2) h_-1
    random-walk FM  alpha = -2   sigma_y(tau)^2 = (2 pi^2 / 3) h_-2 tau

White FM is sampled directly, random-walk FM is the cumulative sum of white
increments, and flicker FM is synthesized by fractional integration of white
noise (discrete 1/f^(1/2) filter, expanded to the full series length), so the
spectrum is correct at any length and the output is a pure function of
(spec, n, dt).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError
from .timebase import PS_PER_SECOND, TimeSpan


class NoiseKind(enum.Enum):
    WHITE_FM = "white_fm"
    FLICKER_FM = "flicker_fm"
    RANDOM_WALK_FM = "random_walk_fm"


@dataclass(frozen=True)
class NoiseSpec:
    """One power-law noise process: kind, h-coefficient, RNG seed."""

    kind: NoiseKind
    amplitude: float
    seed: int

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("noise.amplitude", "h coefficient must be >= 0")


def _fractional_integration_kernel(n: int, alpha: float) -> np.ndarray:
    """Impulse response of 1/(1 - z^-1)^(alpha/2), recurrence per Kasdin-Walker."""
    h = np.empty(n)
    h[0] = 1.0
    for i in range(1, n):
        h[i] = h[i - 1] * (0.5 * alpha + i - 1) / i
    return h


def generate_fractional_frequency_series(spec: NoiseSpec, n: int, dt: TimeSpan) -> np.ndarray:
    """Generate n fractional-frequency samples at sample interval dt.

    Returns a float array; identical (spec, n, dt) always yields a
    bit-identical sequence.
    """
    if n < 1:
        raise ConfigError("noise.n", "need at least one sample")
    if dt.ps <= 0:
        raise ConfigError("noise.dt", "sample interval must be positive")
    dt_s = dt.ps / PS_PER_SECOND
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    if spec.amplitude == 0.0:
        return np.zeros(n)
    if spec.kind is NoiseKind.WHITE_FM:
        sigma = math.sqrt(spec.amplitude / (2.0 * dt_s))
        return sigma * rng.standard_normal(n)
    if spec.kind is NoiseKind.RANDOM_WALK_FM:
        # Increment variance anchored on sigma_y(tau)^2 = (2 pi^2/3) h tau.
        q = math.pi * math.sqrt(2.0 * spec.amplitude * dt_s)
        return np.cumsum(q * rng.standard_normal(n))
    if spec.kind is NoiseKind.FLICKER_FM:
        # Input scale anchored on the flat sigma_y(tau)^2 = 2 ln(2) h.
        sigma_w = math.sqrt(math.pi * spec.amplitude)
        kernel = _fractional_integration_kernel(n, 1.0)
        white = sigma_w * rng.standard_normal(n)
        return fftconvolve(kernel, white)[:n]
    raise ConfigError("noise.kind", f"unsupported noise kind {spec.kind!r}")


def overlapping_allan_deviation(
    series: np.ndarray, dt: TimeSpan, taus: list[TimeSpan]
) -> list[tuple[TimeSpan, float]]:
    """Overlapping Allan deviation of a fractional-frequency series.

    Each tau must be an integer multiple m*dt with 2m <= len(series).
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    # The statistic is offset-invariant; removing the mean keeps the cumsum
    # well conditioned for long, strongly biased series.
    cum = np.concatenate(([0.0], np.cumsum(y - y.mean())))
    out = []
    for tau in taus:
        if tau.ps <= 0 or tau.ps % dt.ps != 0:
            raise ConfigError("adev.tau", f"tau {tau.ps} ps is not a multiple of dt {dt.ps} ps")
        m = tau.ps // dt.ps
        if 2 * m > n:
            raise ConfigError("adev.tau", f"tau {tau.ps} ps needs 2*{m} samples, have {n}")
        block = cum[m:] - cum[:-m]  # sums of m consecutive samples
        d = block[m:] - block[:-m]
        avar = np.mean(d * d) / (2.0 * m * m)
        out.append((tau, float(np.sqrt(avar))))
    return out


def fit_loglog_slope(taus_s: np.ndarray, adevs: np.ndarray) -> float:
    """Least-squares slope of log10(adev) vs log10(tau)."""
    return float(np.polyfit(np.log10(taus_s), np.log10(adevs), 1)[0])
