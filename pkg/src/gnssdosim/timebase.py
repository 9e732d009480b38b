"""Integer-picosecond time arithmetic and fractional-frequency quantities.

All simulation state evolves on an exact integer picosecond grid. Fractional
frequencies are stored as integer femto-parts (parts in 10^15), so phase
accumulation reduces to exact integer multiply/divide with a single, fixed
rounding rule: nearest, ties away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

PS_PER_SECOND = 10**12
FEMTO_PER_UNIT = 10**15

# Sanity rail for accumulated phase: +/- 10^7 seconds in ps. Anything beyond
# is a configuration mistake, reported instead of silently degrading.
_MAX_SPAN_PS = 10**19


def round_div(num: int, den: int) -> int:
    """Integer num/den rounded to nearest, ties away from zero. den > 0."""
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and num > 0):
        q += 1
    return q


@dataclass(frozen=True, order=True)
class TimeSpan:
    """Signed duration in integer picoseconds."""

    ps: int

    @classmethod
    def from_s(cls, seconds) -> "TimeSpan":
        if isinstance(seconds, int):
            return cls(seconds * PS_PER_SECOND)
        return cls(round(seconds * PS_PER_SECOND))

    @classmethod
    def from_ms(cls, ms: int) -> "TimeSpan":
        return cls(ms * 10**9)

    @classmethod
    def from_us(cls, us: int) -> "TimeSpan":
        return cls(us * 10**6)

    @classmethod
    def from_ns(cls, ns: int) -> "TimeSpan":
        return cls(ns * 10**3)

    def __add__(self, other: "TimeSpan") -> "TimeSpan":
        return TimeSpan(self.ps + other.ps)

    def __sub__(self, other: "TimeSpan") -> "TimeSpan":
        return TimeSpan(self.ps - other.ps)

    def __neg__(self) -> "TimeSpan":
        return TimeSpan(-self.ps)

    def __abs__(self) -> "TimeSpan":
        return TimeSpan(abs(self.ps))


@dataclass(frozen=True, order=True)
class TimeInstant:
    """Absolute time as integer picoseconds since the scenario epoch."""

    ps: int

    def __sub__(self, other):
        if isinstance(other, TimeInstant):
            return TimeSpan(self.ps - other.ps)
        return TimeInstant(self.ps - other.ps)

    def __add__(self, span: TimeSpan) -> "TimeInstant":
        return TimeInstant(self.ps + span.ps)


@dataclass(frozen=True, order=True)
class FractionalFrequency:
    """Dimensionless frequency ratio stored as integer parts in 10^15."""

    femto: int

    @classmethod
    def from_ppm(cls, ppm) -> "FractionalFrequency":
        return cls(round(ppm * 10**9))

    @classmethod
    def from_ppb(cls, ppb) -> "FractionalFrequency":
        return cls(round(ppb * 10**6))

    @classmethod
    def from_float(cls, value: float) -> "FractionalFrequency":
        return cls(round(value * FEMTO_PER_UNIT))

    @property
    def ppm(self) -> float:
        return self.femto / 10**9

    @property
    def ppb(self) -> float:
        return self.femto / 10**6

    def as_float(self) -> float:
        return self.femto / FEMTO_PER_UNIT

    def __add__(self, other: "FractionalFrequency") -> "FractionalFrequency":
        return FractionalFrequency(self.femto + other.femto)

    def __neg__(self) -> "FractionalFrequency":
        return FractionalFrequency(-self.femto)


def accumulate_phase_ps(f_femto: int, dt_ps: int) -> int:
    """Raw-int core of accumulate_phase, shared with the simulation hot path."""
    out = round_div(f_femto * dt_ps, FEMTO_PER_UNIT)
    if out > _MAX_SPAN_PS or out < -_MAX_SPAN_PS:
        from .errors import PsOverflowError

        raise PsOverflowError(
            f"phase increment {out} ps exceeds the supported +/-10^7 s range"
        )
    return out


def accumulate_phase(f: FractionalFrequency, dt: TimeSpan) -> TimeSpan:
    """Phase accrued by a clock running at fractional offset f for dt.

    Exact when f*dt is an integer picosecond count; otherwise rounded to the
    nearest picosecond, ties away from zero. dt must be non-negative.
    """
    if dt.ps < 0:
        from .errors import ContractError

        raise ContractError("accumulate_phase requires dt >= 0")
    return TimeSpan(accumulate_phase_ps(f.femto, dt.ps))


def span_to_seconds(d: TimeSpan) -> float:
    """Float seconds for reporting. Never used in state evolution."""
    return d.ps / PS_PER_SECOND
