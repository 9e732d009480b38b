"""Vehicle trajectory input: proper acceleration and GNSS environment vs time.

The delimited input carries sparse breakpoints; acceleration interpolates
linearly between samples while the environment class holds until the next
sample. Acceleration is total proper acceleration in the vehicle frame
(gravity included), so device mounting orientation decides how much of it
the crystal's sensitive axis sees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gnss import EnvironmentClass
from .timebase import PS_PER_SECOND, TimeInstant

TRAJECTORY_HEADER = ["t_s", "ax_g", "ay_g", "az_g", "env"]


def rotation_matrix_rpy(roll_deg: float, pitch_deg: float, yaw_deg: float) -> np.ndarray:
    """Proper rotation from vehicle frame to device frame, Rz(yaw)Ry(pitch)Rx(roll)."""
    r, p, y = (math.radians(a) for a in (roll_deg, pitch_deg, yaw_deg))
    cr, sr, cp, sp, cy, sy = math.cos(r), math.sin(r), math.cos(p), math.sin(p), math.cos(y), math.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class Trajectory:
    t_ps: np.ndarray  # strictly increasing sample times
    accel_g: np.ndarray  # (n, 3) vehicle-frame proper acceleration
    env: list[EnvironmentClass]  # piecewise constant, holds until next sample

    def __post_init__(self):
        if self.t_ps.size < 1:
            raise ConfigError("trajectory", "needs at least one sample")
        if np.any(np.diff(self.t_ps) <= 0):
            raise ConfigError("trajectory.t_s", "sample times must be strictly increasing")
        if self.accel_g.shape != (self.t_ps.size, 3):
            raise ConfigError("trajectory", "acceleration must be an (n, 3) table")
        if len(self.env) != self.t_ps.size:
            raise ConfigError("trajectory", "one environment class per sample required")

    @property
    def end_ps(self) -> int:
        return int(self.t_ps[-1])

    def covers(self, duration_ps: int) -> bool:
        return int(self.t_ps[0]) <= 0 and self.end_ps >= duration_ps

    def accel_series(self, times_ps: np.ndarray) -> np.ndarray:
        """Linearly interpolated (len(times), 3) acceleration."""
        out = np.empty((times_ps.size, 3))
        for c in range(3):
            out[:, c] = np.interp(times_ps, self.t_ps, self.accel_g[:, c])
        return out

    def accel_at(self, t: TimeInstant) -> tuple[float, float, float]:
        row = self.accel_series(np.array([t.ps], dtype=float))[0]
        return (float(row[0]), float(row[1]), float(row[2]))

    def env_at(self, t: TimeInstant) -> EnvironmentClass:
        idx = int(np.searchsorted(self.t_ps, t.ps, side="right")) - 1
        return self.env[max(idx, 0)]


def load_trajectory(path: str) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("trajectory", f"{path} is empty") from None
        if [h.strip() for h in header] != TRAJECTORY_HEADER:
            raise ConfigError(
                "trajectory.header", f"expected {','.join(TRAJECTORY_HEADER)}, got {','.join(header)}"
            )
        t, acc, env = [], [], []
        for ln, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise ConfigError("trajectory", f"{path}:{ln}: expected 5 columns")
            try:
                t.append(round(float(row[0]) * PS_PER_SECOND))
                acc.append([float(row[1]), float(row[2]), float(row[3])])
            except ValueError as exc:
                raise ConfigError("trajectory", f"{path}:{ln}: {exc}") from None
            try:
                env.append(EnvironmentClass(row[4].strip()))
            except ValueError:
                allowed = ",".join(e.value for e in EnvironmentClass)
                raise ConfigError(
                    "trajectory.env", f"{path}:{ln}: {row[4]!r} not one of {allowed}"
                ) from None
    return Trajectory(np.array(t, dtype=np.int64), np.array(acc), env)
