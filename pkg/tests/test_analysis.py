import numpy as np
import pytest

from gnssdosim.analysis import (
    RelativeErrorSeries,
    read_series_csv,
    relative_timing_error,
    summarize,
    summary_table,
    time_deviation,
    write_series_csv,
    export_report,
)
from gnssdosim.config import NodeRole
from gnssdosim.engine import NodeLog, PulseRecord
from gnssdosim.errors import ConfigError
from gnssdosim.timebase import TimeSpan

INTERVAL = TimeSpan.from_ms(100)
CAL = (TimeSpan.from_s(0), TimeSpan.from_s(10))


def _log(name, offsets_ps, valid=None, role=NodeRole.LISTENER):
    """Log with tag = emit truth + per-pulse offset."""
    valid = valid or [True] * len(offsets_ps)
    pulses = [
        PulseRecord(k, (k + 1) * INTERVAL.ps, (k + 1) * INTERVAL.ps + off, v)
        for k, (off, v) in enumerate(zip(offsets_ps, valid))
    ]
    return NodeLog(name=name, role=role, pulses=pulses)


def test_identical_logs_give_zero_series():
    a = _log("a", [100] * 200)
    series = relative_timing_error(a, a, CAL)
    assert series.calibration_offset == TimeSpan(0)
    assert np.all(series.dt_ps == 0)


def test_constant_offset_removed_exactly():
    a = _log("a", [0] * 200)
    b = _log("b", [37_000] * 200)  # +37 ns everywhere
    series = relative_timing_error(a, b, CAL)
    assert series.calibration_offset == TimeSpan(37_000)
    assert np.all(series.dt_ps == 0)


def test_ramp_after_quiet_calibration_window():
    # zero during the 10 s window, then 1 ns/s of drift
    offsets = [0] * 100 + [round((k + 1) * 0.1 * 1000) for k in range(2000)]
    a = _log("a", [0] * 2100)
    b = _log("b", offsets)
    series = relative_timing_error(a, b, CAL)
    assert series.calibration_offset == TimeSpan(0)
    # 100 s into the ramp: 100 ns
    t_target = (100 + 1000) * INTERVAL.ps
    idx = int(np.where(series.t_ps == t_target)[0][0])
    assert series.dt_ps[idx] == pytest.approx(100_000, abs=100)


def test_antisymmetry_is_exact():
    rng = np.random.Generator(np.random.PCG64(1))
    a = _log("a", rng.integers(-(10**5), 10**5, 500).tolist())
    b = _log("b", rng.integers(-(10**5), 10**5, 500).tolist())
    ab = relative_timing_error(a, b, CAL)
    ba = relative_timing_error(b, a, CAL)
    assert np.array_equal(ab.dt_ps, -ba.dt_ps)
    assert ab.calibration_offset == -ba.calibration_offset


def test_transitivity_residual_within_2ps():
    rng = np.random.Generator(np.random.PCG64(2))
    logs = [_log(n, rng.integers(-(10**5), 10**5, 400).tolist()) for n in "abc"]
    ab = relative_timing_error(logs[0], logs[1], CAL)
    bc = relative_timing_error(logs[1], logs[2], CAL)
    ac = relative_timing_error(logs[0], logs[2], CAL)
    residual = ac.dt_ps - (ab.dt_ps + bc.dt_ps)
    assert np.abs(residual).max() <= 2


def test_calibration_idempotence():
    rng = np.random.Generator(np.random.PCG64(3))
    noise = rng.integers(-1000, 1000, 600).tolist()
    a = _log("a", [0] * 600)
    b = _log("b", [n + 5000 for n in noise])
    first = relative_timing_error(a, b, CAL)
    rebased = _log("b", (first.dt_ps).tolist())
    second = relative_timing_error(_log("a", [0] * len(first.dt_ps)), rebased, CAL)
    # second-pass offset is only the residual window mean, ~sigma/sqrt(n)
    assert abs(second.calibration_offset.ps) <= 200


def test_missing_calibration_window_rejected():
    a = _log("a", [0] * 50)  # series ends at 5 s
    with pytest.raises(ConfigError):
        relative_timing_error(a, a, (TimeSpan.from_s(60), TimeSpan.from_s(90)))


def test_invalid_tags_are_gaps_not_zeros():
    valid = [True] * 150 + [False] * 20 + [True] * 30
    a = _log("a", [0] * 200)
    b = _log("b", [10_000] * 200, valid=valid)
    series = relative_timing_error(a, b, CAL)
    assert series.dt_ps.size == 180
    assert series.invalid_fraction == pytest.approx(0.1)


def test_summarize_stats():
    mk = lambda arr: RelativeErrorSeries(
        ("a", "b"), np.arange(1, len(arr) + 1) * INTERVAL.ps,
        np.array(arr, dtype=np.int64), TimeSpan(0), len(arr), 0.0)
    zero = summarize(mk([0, 0, 0]))
    assert zero.max_abs == TimeSpan(0) and zero.rms_ps == 0.0
    two = summarize(mk([-5000, 3000]))
    assert two.max_abs == TimeSpan(5000)


def _series(arr):
    return RelativeErrorSeries(
        ("a", "b"),
        np.arange(1, len(arr) + 1, dtype=np.int64) * INTERVAL.ps,
        np.asarray(arr, dtype=np.int64),
        TimeSpan(0),
        len(arr),
        0.0,
    )


def test_tdev_constant_is_zero():
    curve, notices = time_deviation(_series([1234] * 500), [INTERVAL], INTERVAL)
    assert curve[0][1] < 1e-18
    assert not notices


def test_tdev_white_noise_monte_carlo():
    # frozen oracle: standard estimator on white PM gives sigma at tau0 and
    # sigma/sqrt(3) at 3*tau0 (measured 999.5 and 577.6 for sigma = 1000 ps)
    rng = np.random.Generator(np.random.PCG64(3))
    v1, v3 = [], []
    for _ in range(10):
        x = np.round(rng.normal(0, 1000, 20000)).astype(np.int64)
        curve, _ = time_deviation(_series(x), [INTERVAL, TimeSpan.from_ms(300)], INTERVAL)
        v1.append(curve[0][1] * 1e12)
        v3.append(curve[1][1] * 1e12)
    assert np.mean(v1) == pytest.approx(1000.0, rel=0.15)
    assert np.mean(v3) == pytest.approx(1000.0 / np.sqrt(3), rel=0.15)


def test_tdev_ramp_is_removed():
    ramp = (np.arange(2000) * 17).astype(np.int64)
    curve, _ = time_deviation(_series(ramp), [INTERVAL, TimeSpan.from_s(1)], INTERVAL)
    for _, v in curve:
        assert v < 1e-15


def test_tdev_skips_oversized_taus_with_notice():
    curve, notices = time_deviation(_series([0] * 50), [TimeSpan.from_s(10)], INTERVAL)
    assert not curve
    assert any("omitted" in n for n in notices)


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.Generator(np.random.PCG64(4))
    arr = rng.integers(-(10**7), 10**7, 1000).tolist()
    series = _series(arr)
    path = str(tmp_path / "pair.csv")
    write_series_csv(series, path)
    t, dt = read_series_csv(path)
    assert np.array_equal(t, series.t_ps)
    assert np.array_equal(dt, series.dt_ps)


def test_export_report_writes_all_artifacts(tmp_path):
    series = _series(list(range(-500, 500)))
    out = str(tmp_path / "report")
    written = export_report([series], out, fmt="both", saturations={("a", "b"): [5.0]})
    names = sorted(float_free.split("/")[-1] for float_free in written)
    assert names == ["dt_a_b.csv", "dt_a_b.svg", "summary.txt"]
    table = open(f"{out}/summary.txt").read()
    assert "a:b" in table and "max|dt|_ns" in table


def test_export_report_rejects_empty_and_bad_format(tmp_path):
    with pytest.raises(ConfigError):
        export_report([], str(tmp_path), "csv")
    with pytest.raises(ConfigError):
        export_report([_series([1, 2, 3])], str(tmp_path), "pdf")
