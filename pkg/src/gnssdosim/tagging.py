"""Two-stage event timestamping: coarse counter capture plus fine interpolation.

The coarse stage counts whole reference periods (rounds down), the fine stage
recovers the sub-period remainder with a Gaussian error. Control loops average
tags over a pulse window to shrink jitter by roughly sqrt(N).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .oscillator import ClockState, phase_at
from .timebase import TimeInstant, TimeSpan, round_div


class TagSource(enum.Enum):
    GNSS_PULSE = "gnss_pulse"
    EXTERNAL_PULSE = "external_pulse"


@dataclass(frozen=True)
class TaggingParams:
    coarse_resolution: TimeSpan = TimeSpan.from_ns(10)
    fine_sigma: TimeSpan = TimeSpan(35)
    fine_enabled: bool = True
    # Longest interval the fine stage can cover; one coarse period by default.
    fine_range: TimeSpan | None = None
    averaging_window: int = 10
    cable_delay: TimeSpan = TimeSpan(0)  # applied by the caller to external pulses

    def __post_init__(self):
        if self.coarse_resolution.ps <= 0:
            raise ConfigError("tagging.coarse_resolution", "must be positive")
        if self.fine_sigma.ps < 0:
            raise ConfigError("tagging.fine_sigma", "must be >= 0")
        if self.averaging_window < 1:
            raise ConfigError("tagging.averaging_window", "need >= 1 pulse")
        if self.fine_range is None:
            object.__setattr__(self, "fine_range", self.coarse_resolution)


@dataclass(frozen=True)
class TimeTag:
    local_timestamp: TimeInstant
    valid: bool
    source: TagSource


def tag_event(
    event_true_time: TimeInstant,
    clock: ClockState,
    params: TaggingParams,
    rng: np.random.Generator,
    source: TagSource,
) -> TimeTag:
    """Timestamp an event against the node's own time base.

    The event must fall inside the clock state's current step window.
    """
    local = phase_at(clock, event_true_time).ps
    coarse = (local // params.coarse_resolution.ps) * params.coarse_resolution.ps
    if not params.fine_enabled:
        return TimeTag(TimeInstant(coarse), True, source)
    remainder = local - coarse
    if remainder > params.fine_range.ps:
        raise ContractError("fine stage range exceeded")
    fine = remainder
    if params.fine_sigma.ps > 0:
        fine += round(rng.normal(0.0, params.fine_sigma.ps))
    return TimeTag(TimeInstant(coarse + fine), True, source)


def average_residuals(
    tags: list[TimeTag], expected_epochs: list[TimeInstant]
) -> tuple[TimeSpan | None, int]:
    """Mean of (tag - expected epoch) over valid tags.

    Returns (residual, count_used); residual is None when the window holds no
    valid tag, which is a distinct no-measurement signal, not a zero.
    """
    if len(tags) != len(expected_epochs):
        raise ContractError("tags and expected epochs must pair up")
    total = 0
    used = 0
    for tag, epoch in zip(tags, expected_epochs):
        if not tag.valid:
            continue
        total += tag.local_timestamp.ps - epoch.ps
        used += 1
    if used == 0:
        return None, 0
    return TimeSpan(round_div(total, used)), used
