import numpy as np
import pytest
from hypothesis import given, strategies as st

from gnssdosim.oscillator import ClockState, phase_at
from gnssdosim.tagging import TaggingParams, TagSource, TimeTag, average_residuals, tag_event
from gnssdosim.timebase import TimeInstant, TimeSpan

# a clock 1 ms into a 10 ms step, running 0.8 us fast with +2.5e-7 offset
STATE = ClockState(
    phase_error_ps=800_000_000,
    y_femto=250_000_000,
    elapsed_ps=10_000_000_000,
    window_start_ps=0,
)


def _rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def test_noiseless_two_stage_is_lossless():
    params = TaggingParams(fine_sigma=TimeSpan(0))
    t = TimeInstant(3_333_333_333)
    tag = tag_event(t, STATE, params, _rng(), TagSource.EXTERNAL_PULSE)
    assert tag.local_timestamp == phase_at(STATE, t)
    assert tag.valid


def test_fine_noise_std_is_35ps():
    params = TaggingParams()
    rng = _rng(7)
    t = TimeInstant(5_000_000_123)
    truth = phase_at(STATE, t).ps
    errs = np.array(
        [tag_event(t, STATE, params, rng, TagSource.GNSS_PULSE).local_timestamp.ps - truth for _ in range(100_000)]
    )
    assert np.std(errs) == pytest.approx(35.0, rel=0.10)
    assert abs(np.mean(errs)) < 3.5  # < fine_sigma / 10


def test_coarse_only_quantization_statistics():
    params = TaggingParams(fine_enabled=False)
    rng = _rng(3)
    offsets = rng.integers(0, STATE.elapsed_ps, size=100_000)
    errs = []
    for off in offsets:
        t = TimeInstant(int(off))
        truth = phase_at(STATE, t).ps
        errs.append(tag_event(t, STATE, params, rng, TagSource.GNSS_PULSE).local_timestamp.ps - truth)
    errs = np.array(errs, dtype=float)
    assert np.all(errs <= 0) and np.all(errs > -10_000)  # floor quantization
    assert np.std(errs) == pytest.approx(10_000 / np.sqrt(12), rel=0.10)


def test_later_event_never_tags_earlier_noise_off():
    params = TaggingParams(fine_sigma=TimeSpan(0))
    rng = _rng(1)
    prev = None
    for off in sorted(rng.integers(0, STATE.elapsed_ps, size=500).tolist()):
        tag = tag_event(TimeInstant(int(off)), STATE, params, rng, TagSource.GNSS_PULSE)
        if prev is not None:
            assert tag.local_timestamp.ps >= prev
        prev = tag.local_timestamp.ps


def _mk_tags(residuals_ps, valid=None):
    valid = valid or [True] * len(residuals_ps)
    epochs = [TimeInstant(10**9 * (k + 1)) for k in range(len(residuals_ps))]
    tags = [
        TimeTag(TimeInstant(e.ps + r), v, TagSource.GNSS_PULSE)
        for e, r, v in zip(epochs, residuals_ps, valid)
    ]
    return tags, epochs


def test_average_of_equal_residuals():
    tags, epochs = _mk_tags([42] * 10)
    res, n = average_residuals(tags, epochs)
    assert res == TimeSpan(42) and n == 10


def test_average_uses_only_valid_tags():
    tags, epochs = _mk_tags([10, 20, 30, 999, 999, 999, 999, 999, 999, 999],
                            valid=[True] * 3 + [False] * 7)
    res, n = average_residuals(tags, epochs)
    assert res == TimeSpan(20) and n == 3


def test_no_valid_tags_is_distinct_signal():
    tags, epochs = _mk_tags([5, 5], valid=[False, False])
    res, n = average_residuals(tags, epochs)
    assert res is None and n == 0


def test_averaging_shrinks_jitter_by_sqrt_n():
    rng = _rng(9)
    sigma = 1000.0
    means = []
    for _ in range(3000):
        tags, epochs = _mk_tags([round(x) for x in rng.normal(0, sigma, 10)])
        res, n = average_residuals(tags, epochs)
        means.append(res.ps)
    assert np.std(means) == pytest.approx(sigma / np.sqrt(10), rel=0.15)


@given(st.lists(st.tuples(st.integers(-1000, 1000), st.booleans()), min_size=1, max_size=30))
def test_average_is_mean_over_valid_subset(pairs):
    residuals = [p[0] for p in pairs]
    valid = [p[1] for p in pairs]
    tags, epochs = _mk_tags(residuals, valid)
    res, n = average_residuals(tags, epochs)
    chosen = [r for r, v in zip(residuals, valid) if v]
    assert n == len(chosen)
    if not chosen:
        assert res is None
    else:
        mean = sum(chosen) / len(chosen)
        assert abs(res.ps - mean) <= 0.5
