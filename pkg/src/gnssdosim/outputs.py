"""Exported signals: divided reference clocks and grid-scheduled pulses.

Pulses are placed on the high-resolution timer grid of (10 ns)/32 = 312.5 ps,
anchored to the node's timer epoch. A pulse is not itself the time reference:
downstream equipment treats the first divided-clock edge at or after the pulse
as the synchronization point, so that retiming contract is modeled explicitly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError, SchedulingError
from .timebase import PS_PER_SECOND, TimeInstant, TimeSpan, round_div

ALLOWED_DIVISORS = (1, 2, 5, 10)
REF_PERIOD_PS = 10_000  # 100 MHz reference clock period
GRID_HALF_PS = 625  # 312.5 ps pulse grid, held in half-picosecond units
N_CHANNELS = 5


class PulseModeKind(enum.Enum):
    OFF = "off"
    ONE_PPS = "one_pps"
    SYSREF_PERIODIC = "sysref_periodic"


@dataclass(frozen=True)
class PulseMode:
    kind: PulseModeKind
    period: TimeSpan | None = None  # SYSREF only

    def __post_init__(self):
        if self.kind is PulseModeKind.SYSREF_PERIODIC:
            if self.period is None or self.period.ps <= 0:
                raise ConfigError("outputs.pulse_mode", "periodic mode needs a period")
            if self.period.ps % REF_PERIOD_PS != 0:
                raise ConfigError(
                    "outputs.pulse_mode",
                    "period must be an integer multiple of the reference clock period",
                )


OFF = PulseMode(PulseModeKind.OFF)
ONE_PPS = PulseMode(PulseModeKind.ONE_PPS)


@dataclass(frozen=True)
class OutputConfig:
    clock_divisor: int = 1
    channels: tuple[PulseMode, ...] = (ONE_PPS,) + (OFF,) * (N_CHANNELS - 1)

    def __post_init__(self):
        if self.clock_divisor not in ALLOWED_DIVISORS:
            raise ConfigError(
                "outputs.clock_divisor", f"must be one of {ALLOWED_DIVISORS}"
            )
        if len(self.channels) != N_CHANNELS:
            raise ConfigError("outputs.channels", f"exactly {N_CHANNELS} channels")


@dataclass(frozen=True)
class PulseEvent:
    """A scheduled output pulse, exact in grid units.

    grid_index is the exact multiple of 312.5 ps; odd indices fall between
    picosecond ticks, so scheduled_local_time rounds the half-ps to the
    nearest ps (ties away from zero).
    """

    grid_index: int
    scheduled_local_time: TimeInstant
    channel: int


def schedule_pulse(
    target_local_time: TimeInstant, now_local_time: TimeInstant, channel: int = 0
) -> PulseEvent:
    """Place a pulse on the nearest grid point to the target local time.

    The worst-case placement error is half a grid step, 156.25 ps.
    """
    if target_local_time.ps < now_local_time.ps:
        raise SchedulingError(
            f"target {target_local_time.ps} ps is in the past of {now_local_time.ps} ps"
        )
    idx = round_div(2 * target_local_time.ps, GRID_HALF_PS)
    return PulseEvent(
        grid_index=idx,
        scheduled_local_time=TimeInstant(round_div(idx * GRID_HALF_PS, 2)),
        channel=channel,
    )


def grid_error_half_ps(event: PulseEvent, target_local_time: TimeInstant) -> int:
    """Exact |scheduled - target| in half-picoseconds."""
    return abs(event.grid_index * GRID_HALF_PS - 2 * target_local_time.ps)


def mark_following_edge(pulse_local_time: TimeInstant, clock_divisor: int) -> TimeInstant:
    """Earliest divided-clock rising edge at or after the pulse.

    This edge, not the pulse itself, is what downstream equipment locks to.
    """
    if clock_divisor not in ALLOWED_DIVISORS:
        raise ConfigError("outputs.clock_divisor", f"must be one of {ALLOWED_DIVISORS}")
    period = clock_divisor * REF_PERIOD_PS
    return TimeInstant(-(-pulse_local_time.ps // period) * period)


def divided_edges(clock_divisor: int, window: tuple[TimeInstant, TimeInstant]) -> list[TimeInstant]:
    """Rising edges of the divided clock in [start, end), from the timer epoch."""
    if clock_divisor not in ALLOWED_DIVISORS:
        raise ConfigError("outputs.clock_divisor", f"must be one of {ALLOWED_DIVISORS}")
    start, end = window
    period = clock_divisor * REF_PERIOD_PS
    first = -(-start.ps // period)
    return [TimeInstant(k * period) for k in range(first, -(-end.ps // period))]


def periodic_pulse_times(mode: PulseMode, window: tuple[TimeInstant, TimeInstant]) -> list[TimeInstant]:
    """Local-time instants at which a channel fires within [start, end)."""
    if mode.kind is PulseModeKind.OFF:
        return []
    period = PS_PER_SECOND if mode.kind is PulseModeKind.ONE_PPS else mode.period.ps
    start, end = window
    first = -(-start.ps // period)
    return [TimeInstant(k * period) for k in range(first, -(-end.ps // period))]
