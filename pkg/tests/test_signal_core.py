"""Filtering, resampling, and normalization contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal as sps

from aadkit import (
    EDGE_SECONDS,
    ConstantChannel,
    FilterSpec,
    InvalidFilterSpec,
    InvalidRate,
    NonFiniteInput,
    TimeSeries,
    UnknownChannel,
    UpsamplingUnsupported,
    bandpass_filter,
    normalize,
    notch_filter,
    resample,
)


def sine(freq, rate, seconds, amp=1.0):
    t = np.arange(int(rate * seconds)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


def interior(ts):
    """Samples outside the flagged edge transients."""
    k = int(round(ts.edge_seconds * ts.rate))
    return ts.data[:, k:-k] if k else ts.data


def tone_amplitude(x):
    """Steady-state amplitude of a single sinusoid."""
    return np.sqrt(2.0) * np.sqrt(np.mean(x**2))


def band_power(x, rate, freq, halfwidth=1.0):
    f, p = sps.periodogram(x, fs=rate)
    return p[(f >= freq - halfwidth) & (f <= freq + halfwidth)].sum()


class TestTimeSeries:
    def test_fields_and_shape(self):
        ts = TimeSeries(np.zeros((3, 10)), 100.0, ("a", "b", "c"))
        assert ts.n_channels == 3
        assert ts.n_samples == 10
        assert ts.duration == pytest.approx(0.1)
        assert ts.data.dtype == np.float64

    def test_vector_input_becomes_one_channel(self):
        ts = TimeSeries(np.arange(5.0), 10.0, ("x",))
        assert ts.data.shape == (1, 5)

    def test_rate_must_be_positive(self):
        with pytest.raises(InvalidRate):
            TimeSeries(np.zeros((1, 4)), 0.0, ("x",))
        with pytest.raises(InvalidRate):
            TimeSeries(np.zeros((1, 4)), -5.0, ("x",))

    def test_rejects_non_finite(self):
        bad = np.zeros((1, 4))
        bad[0, 2] = np.nan
        with pytest.raises(NonFiniteInput):
            TimeSeries(bad, 10.0, ("x",))
        bad[0, 2] = np.inf
        with pytest.raises(NonFiniteInput):
            TimeSeries(bad, 10.0, ("x",))

    def test_label_count_must_match(self):
        with pytest.raises(ValueError):
            TimeSeries(np.zeros((2, 4)), 10.0, ("only_one",))

    def test_select_reorders(self):
        ts = TimeSeries(np.array([[1.0, 2.0], [3.0, 4.0]]), 10.0, ("a", "b"))
        sub = ts.select(["b", "a"])
        assert sub.labels == ("b", "a")
        np.testing.assert_array_equal(sub.data, [[3.0, 4.0], [1.0, 2.0]])

    def test_unknown_channel(self):
        ts = TimeSeries(np.zeros((1, 4)), 10.0, ("a",))
        with pytest.raises(UnknownChannel):
            ts.channel_index("nope")


class TestFilterSpec:
    def test_kind_checked(self):
        with pytest.raises(InvalidFilterSpec):
            FilterSpec("highpass", (1.0, 20.0))

    def test_bandpass_edges_against_rate(self):
        spec = FilterSpec("bandpass", (1.0, 30.0))
        with pytest.raises(InvalidFilterSpec):
            spec.validate_against(50.0)  # 30 Hz >= Nyquist of 50 Hz
        spec.validate_against(100.0)

    def test_bandpass_edge_order(self):
        with pytest.raises(InvalidFilterSpec):
            FilterSpec("bandpass", (20.0, 1.0)).validate_against(100.0)

    def test_notch_center_inside_band(self):
        with pytest.raises(InvalidFilterSpec):
            FilterSpec("notch", (60.0, 30.0)).validate_against(100.0)

    def test_wrong_kind_routed(self):
        ts = TimeSeries(np.zeros((1, 100)), 100.0, ("x",))
        with pytest.raises(InvalidFilterSpec):
            bandpass_filter(ts, FilterSpec("notch", (50.0, 30.0)))
        with pytest.raises(InvalidFilterSpec):
            notch_filter(ts, FilterSpec("bandpass", (1.0, 20.0)))


class TestBandpass:
    SPEC = FilterSpec("bandpass", (1.0, 20.0))

    def test_white_noise_stopband_attenuation(self):
        rng = np.random.default_rng(7)
        ts = TimeSeries(rng.standard_normal(20 * 500), 500.0, ("x",))
        out = bandpass_filter(ts, self.SPEC)
        x = interior(out)[0]
        p10 = band_power(x, 500.0, 10.0)
        p50 = band_power(x, 500.0, 50.0)
        assert 10 * np.log10(p10 / p50) >= 20.0

    def test_dc_rejected(self):
        ts = TimeSeries(np.full((1, 10 * 500), 3.0), 500.0, ("x",))
        out = bandpass_filter(ts, self.SPEC)
        assert np.max(np.abs(interior(out))) < 1e-3 * 3.0

    def test_passband_tone_within_1db(self):
        ts = TimeSeries(sine(10.0, 500.0, 20.0), 500.0, ("x",))
        out = bandpass_filter(ts, self.SPEC)
        amp = tone_amplitude(interior(out)[0])
        assert 10 ** (-1 / 20) <= amp <= 10 ** (1 / 20)

    def test_shape_rate_labels_preserved(self):
        ts = TimeSeries(np.random.default_rng(0).standard_normal((3, 2000)),
                        500.0, ("a", "b", "c"))
        out = bandpass_filter(ts, self.SPEC)
        assert out.data.shape == ts.data.shape
        assert out.rate == ts.rate
        assert out.labels == ts.labels
        assert out.edge_seconds == EDGE_SECONDS

    def test_repeated_application_stable(self):
        # The residual between one and two passes is transition-band
        # reshaping, so idempotence is near-exact for in-band content and
        # looser for raw white noise.
        rng = np.random.default_rng(3)
        ts = TimeSeries(rng.standard_normal(60 * 500), 500.0, ("x",))
        inband = bandpass_filter(ts, FilterSpec("bandpass", (2.0, 15.0)))
        once = bandpass_filter(inband, self.SPEC)
        twice = bandpass_filter(once, self.SPEC)
        a, b = once.data[0, 1000:-1000], twice.data[0, 1000:-1000]
        assert np.corrcoef(a, b)[0, 1] >= 0.999

        once_w = bandpass_filter(ts, self.SPEC)
        twice_w = bandpass_filter(once_w, self.SPEC)
        a, b = once_w.data[0, 1000:-1000], twice_w.data[0, 1000:-1000]
        assert np.corrcoef(a, b)[0, 1] >= 0.98

    def test_linearity(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(4000)
        y = rng.standard_normal(4000)
        fx = bandpass_filter(TimeSeries(x, 500.0, ("x",)), self.SPEC).data
        fy = bandpass_filter(TimeSeries(y, 500.0, ("x",)), self.SPEC).data
        fz = bandpass_filter(
            TimeSeries(2.0 * x - 3.0 * y, 500.0, ("x",)), self.SPEC
        ).data
        np.testing.assert_allclose(fz, 2.0 * fx - 3.0 * fy, atol=1e-9)


class TestNotch:
    SPEC = FilterSpec("notch", (50.0, 30.0))

    def test_line_tone_removed(self):
        ts = TimeSeries(sine(50.0, 500.0, 20.0), 500.0, ("x",))
        out = notch_filter(ts, self.SPEC)
        assert tone_amplitude(interior(out)[0]) <= 0.0316

    def test_passband_tone_kept(self):
        ts = TimeSeries(sine(10.0, 500.0, 20.0), 500.0, ("x",))
        out = notch_filter(ts, self.SPEC)
        amp = tone_amplitude(interior(out)[0])
        assert 10 ** (-0.5 / 20) <= amp <= 10 ** (0.5 / 20)

    def test_zero_in_zero_out(self):
        ts = TimeSeries(np.zeros((2, 1000)), 500.0, ("a", "b"))
        out = notch_filter(ts, self.SPEC)
        np.testing.assert_array_equal(out.data, 0.0)


class TestResample:
    def test_sample_count(self):
        ts = TimeSeries(np.random.default_rng(0).standard_normal(5000),
                        500.0, ("x",))
        out = resample(ts, 50.0)
        assert out.n_samples == 500
        assert out.rate == 50.0

    def test_tone_fidelity(self):
        ts = TimeSeries(sine(5.0, 500.0, 10.0), 500.0, ("x",))
        out = resample(ts, 50.0)
        k = int(round(out.edge_seconds * out.rate))
        t = np.arange(out.n_samples) / 50.0
        ref = np.sin(2 * np.pi * 5.0 * t)
        r = np.corrcoef(out.data[0, k:-k], ref[k:-k])[0, 1]
        assert r >= 0.999

    def test_non_integer_ratio(self):
        ts = TimeSeries(sine(5.0, 120.0, 10.0), 120.0, ("x",))
        out = resample(ts, 50.0)
        assert out.rate == 50.0
        assert abs(out.duration - ts.duration) <= 1.0 / out.rate
        t = np.arange(out.n_samples) / 50.0
        ref = np.sin(2 * np.pi * 5.0 * t)
        r = np.corrcoef(out.data[0, 50:-50], ref[50:-50])[0, 1]
        assert r >= 0.999

    def test_identity_at_same_rate(self):
        ts = TimeSeries(np.random.default_rng(1).standard_normal(100),
                        50.0, ("x",))
        out = resample(ts, 50.0)
        np.testing.assert_array_equal(out.data, ts.data)

    def test_upsampling_refused(self):
        ts = TimeSeries(np.zeros((1, 100)), 50.0, ("x",))
        with pytest.raises(UpsamplingUnsupported):
            resample(ts, 100.0)

    def test_bad_target_rate(self):
        ts = TimeSeries(np.zeros((1, 100)), 50.0, ("x",))
        with pytest.raises(InvalidRate):
            resample(ts, 0.0)

    def test_round_trip_recovers_bandlimited_signal(self):
        # The package only downsamples; the return leg uses scipy directly.
        rng = np.random.default_rng(5)
        raw = TimeSeries(rng.standard_normal(20 * 500), 500.0, ("x",))
        band = bandpass_filter(raw, FilterSpec("bandpass", (1.0, 20.0)))
        down = resample(band, 50.0)
        up = sps.resample_poly(down.data, 10, 1, axis=1)
        n = min(up.shape[1], band.n_samples)
        a = band.data[0, 500:n - 500]
        b = up[0, 500:n - 500]
        assert np.corrcoef(a, b)[0, 1] >= 0.99


class TestNormalize:
    def test_hand_example(self):
        ts = TimeSeries(np.array([1.0, 2.0, 3.0]), 10.0, ("x",))
        out = normalize(ts)
        np.testing.assert_allclose(
            out.data[0], [-1.22474487, 0.0, 1.22474487], atol=1e-8
        )
        # population sigma of [1,2,3]
        assert np.std([1.0, 2.0, 3.0]) == pytest.approx(0.81649658, abs=1e-8)

    def test_moments(self):
        rng = np.random.default_rng(2)
        ts = TimeSeries(rng.standard_normal((4, 1000)) * 7 + 3, 50.0,
                        ("a", "b", "c", "d"))
        out = normalize(ts)
        assert np.all(np.abs(out.data.mean(axis=1)) < 1e-10)
        assert np.all(np.abs(out.data.std(axis=1) - 1.0) < 1e-10)

    def test_constant_channel_named(self):
        data = np.vstack([np.ones(10) * 5, np.arange(10.0)])
        ts = TimeSeries(data, 10.0, ("flat", "ok"))
        with pytest.raises(ConstantChannel, match="flat"):
            normalize(ts)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.standard_normal((2, 64)) * rng.uniform(0.5, 10)
        once = normalize(TimeSeries(data, 10.0, ("a", "b")))
        twice = normalize(once)
        np.testing.assert_allclose(twice.data, once.data, atol=1e-10)
