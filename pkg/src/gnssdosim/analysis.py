"""Post-processing of node logs into pairwise relative timing error.

For two devices tagging the same physical pulse train, the relative timing
error is the difference of their local timestamps per pulse, corrected by the
constant offset measured over the stationary calibration window (the analog
of determining device offsets on the bench before a campaign). Samples before
the calibration window start are treated as warm-up and excluded: devices
begin the scenario unsettled, while a real campaign reports settled devices.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .engine import NodeLog
from .errors import ConfigError
from .timebase import TimeSpan, round_div


@dataclass(frozen=True)
class RelativeErrorSeries:
    pair: tuple[str, str]
    t_ps: np.ndarray  # emitter true time per sample, strictly increasing
    dt_ps: np.ndarray  # calibrated tag_b - tag_a, int64 ps
    calibration_offset: TimeSpan
    n_pulses_total: int  # before dropping invalid/warm-up samples
    invalid_fraction: float


@dataclass(frozen=True)
class SeriesSummary:
    pair: tuple[str, str]
    n_samples: int
    invalid_fraction: float
    max_abs: TimeSpan
    rms_ps: float
    p99_abs_ps: float
    saturation_events: int


def relative_timing_error(
    log_a: NodeLog,
    log_b: NodeLog,
    calibration_window: tuple[TimeSpan, TimeSpan],
    drop_warmup: bool = True,
) -> RelativeErrorSeries:
    """Offset-calibrated timestamp differences, sample times from pulse truth."""
    tags_a = {p.pulse_idx: p for p in log_a.pulses}
    n_total = 0
    rows = []
    for pb in log_b.pulses:
        pa = tags_a.get(pb.pulse_idx)
        if pa is None:
            continue
        n_total += 1
        if not (pa.valid and pb.valid):
            continue
        rows.append((pa.emit_true_ps, pb.tag_local_ps - pa.tag_local_ps))
    if not rows:
        raise ConfigError("analysis/pair", f"no overlapping valid pulses for {log_a.name}:{log_b.name}")
    t = np.array([r[0] for r in rows], dtype=np.int64)
    raw = np.array([r[1] for r in rows], dtype=np.int64)
    cal_lo, cal_hi = calibration_window
    in_cal = (t >= cal_lo.ps) & (t <= cal_hi.ps)
    n_cal = int(np.count_nonzero(in_cal))
    if n_cal == 0:
        raise ConfigError("analysis/calibration", "no valid samples inside the calibration window")
    offset = round_div(int(raw[in_cal].sum(dtype=object)), n_cal)
    dt = raw - offset
    if drop_warmup:
        keep = t >= cal_lo.ps
        t, dt = t[keep], dt[keep]
    invalid_fraction = 1.0 - len(rows) / n_total if n_total else 0.0
    return RelativeErrorSeries(
        pair=(log_a.name, log_b.name),
        t_ps=t,
        dt_ps=dt,
        calibration_offset=TimeSpan(offset),
        n_pulses_total=n_total,
        invalid_fraction=invalid_fraction,
    )


def summarize(series: RelativeErrorSeries, saturation_events: int = 0) -> SeriesSummary:
    if series.dt_ps.size == 0:
        raise ConfigError("analysis/summary", "empty series")
    abs_dt = np.abs(series.dt_ps)
    return SeriesSummary(
        pair=series.pair,
        n_samples=int(series.dt_ps.size),
        invalid_fraction=series.invalid_fraction,
        max_abs=TimeSpan(int(abs_dt.max())),
        rms_ps=float(np.sqrt(np.mean(series.dt_ps.astype(float) ** 2))),
        p99_abs_ps=float(np.percentile(abs_dt, 99.0)),
        saturation_events=saturation_events,
    )


def time_deviation(
    series: RelativeErrorSeries, taus: list[TimeSpan], pulse_interval: TimeSpan
) -> tuple[list[tuple[TimeSpan, float]], list[str]]:
    """Standard TDEV estimator over the longest gapless stretch of the series.

    Taus must be multiples of the pulse interval; taus needing more samples
    than available are omitted and reported in the notices list.
    """
    t = series.t_ps
    # locate the longest run with near-uniform spacing (no dropped pulses)
    gaps = np.flatnonzero(np.diff(t) > round(1.5 * pulse_interval.ps))
    bounds = np.concatenate(([0], gaps + 1, [t.size]))
    lengths = np.diff(bounds)
    best = int(np.argmax(lengths))
    lo, hi = int(bounds[best]), int(bounds[best] + lengths[best])
    x = series.dt_ps[lo:hi].astype(float) / 1e12  # seconds
    notices = []
    if hi - lo < t.size:
        notices.append(f"gaps present: estimating on {hi - lo} of {t.size} samples")
    curve = []
    n = x.size
    for tau in taus:
        if tau.ps % pulse_interval.ps != 0:
            raise ConfigError("analysis/tdev", f"tau {tau.ps} ps not a multiple of the pulse interval")
        m = tau.ps // pulse_interval.ps
        if 3 * m >= n:
            notices.append(f"tau {tau.ps} ps omitted: needs {3 * m + 1} samples, have {n}")
            continue
        cum = np.concatenate(([0.0], np.cumsum(x)))
        block = cum[m:] - cum[:-m]  # running sums of m samples
        second = block[2 * m:] - 2.0 * block[m:-m] + block[:-2 * m]
        tvar = np.mean(second**2) / (6.0 * m * m)
        curve.append((tau, float(math.sqrt(tvar))))
    return curve, notices


def _format_t_s(ps: int) -> str:
    sign = "-" if ps < 0 else ""
    ps = abs(ps)
    return f"{sign}{ps // 10**12}.{ps % 10**12:012d}"


def _format_ns(ps: int) -> str:
    sign = "-" if ps < 0 else ""
    ps = abs(ps)
    return f"{sign}{ps // 1000}.{ps % 1000:03d}"


def write_series_csv(series: RelativeErrorSeries, path: str) -> None:
    """Delimited output, exact to 1 ps (decimal strings, not floats)."""
    with open(path, "w") as fh:
        fh.write("t_s,dt_ns\n")
        for t, dt in zip(series.t_ps.tolist(), series.dt_ps.tolist()):
            fh.write(f"{_format_t_s(t)},{_format_ns(dt)}\n")


def read_series_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of write_series_csv, returning (t_ps, dt_ps)."""
    ts, dts = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t_s,dt_ns":
            raise ConfigError("analysis/csv", f"unexpected header {header!r}")
        for line in fh:
            t_str, dt_str = line.strip().split(",")
            ts.append(_parse_scaled(t_str, 10**12))
            dts.append(_parse_scaled(dt_str, 1000))
    return np.array(ts, dtype=np.int64), np.array(dts, dtype=np.int64)


def _parse_scaled(text: str, scale: int) -> int:
    neg = text.startswith("-")
    if neg:
        text = text[1:]
    if "." in text:
        whole, frac = text.split(".", 1)
    else:
        whole, frac = text, ""
    digits = len(str(scale)) - 1
    frac = (frac + "0" * digits)[:digits]
    value = int(whole) * scale + int(frac or 0)
    return -value if neg else value


def summary_table(summaries: list[SeriesSummary]) -> str:
    lines = [
        f"{'pair':<14} {'samples':>8} {'invalid%':>9} {'max|dt|_ns':>11} "
        f"{'rms_ns':>9} {'p99_ns':>9} {'saturations':>12}"
    ]
    for s in summaries:
        pair = f"{s.pair[0]}:{s.pair[1]}"
        lines.append(
            f"{pair:<14} {s.n_samples:>8} {100 * s.invalid_fraction:>9.3f} "
            f"{s.max_abs.ps / 1000:>11.3f} {s.rms_ps / 1000:>9.3f} "
            f"{s.p99_abs_ps / 1000:>9.3f} {s.saturation_events:>12}"
        )
    return "\n".join(lines) + "\n"


def render_pair_figure(
    series: RelativeErrorSeries,
    path: str,
    saturation_times_s: list[float] | None = None,
) -> None:
    """Relative timing error vs time as a self-contained vector graphic."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "gnssdosim"
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(series.t_ps / 1e12, series.dt_ps / 1000.0, lw=0.6, color="#1f77b4")
    for k, ts in enumerate(saturation_times_s or []):
        ax.axvline(ts, color="#d62728", lw=0.8, alpha=0.6,
                   label="EFC saturation" if k == 0 else None)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("relative timing error (ns)")
    ax.set_title(f"{series.pair[0]} vs {series.pair[1]}")
    ax.grid(alpha=0.3)
    if saturation_times_s:
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def export_report(
    series_list: list[RelativeErrorSeries],
    out_dir: str,
    fmt: str = "both",
    saturations: dict[tuple[str, str], list[float]] | None = None,
) -> list[str]:
    """Write per-pair CSVs, a summary table, and per-pair figures.

    fmt: 'csv', 'svg', or 'both'. Returns the written paths.
    """
    if not series_list:
        raise ConfigError("analysis/report", "no pairs to report")
    if fmt not in ("csv", "svg", "both"):
        raise ConfigError("analysis/format", f"unknown format {fmt!r}")
    saturations = saturations or {}
    os.makedirs(out_dir, exist_ok=True)
    written = []
    summaries = []
    for series in series_list:
        stem = f"dt_{series.pair[0]}_{series.pair[1]}"
        sat_times = saturations.get(series.pair, [])
        if fmt in ("csv", "both"):
            csv_path = os.path.join(out_dir, stem + ".csv")
            write_series_csv(series, csv_path)
            written.append(csv_path)
        if fmt in ("svg", "both"):
            fig_path = os.path.join(out_dir, stem + ".svg")
            render_pair_figure(series, fig_path, sat_times)
            written.append(fig_path)
        summaries.append(summarize(series, saturation_events=len(sat_times)))
    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w") as fh:
        fh.write(summary_table(summaries))
    written.append(summary_path)
    return written
