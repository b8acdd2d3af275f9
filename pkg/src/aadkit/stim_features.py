"""Stimulus representations: gammatone spectrogram, envelope, and acoustic onsets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import InvalidBand, InvalidRate, InvalidWindow, MonoRequired, NonFiniteInput
from .signal_core import EDGE_SECONDS, FilterSpec, TimeSeries, bandpass_filter
from .signal_core import normalize as _normalize
from .signal_core import resample as _resample

# Cochlear magnitude estimation: half-wave rectified band output smoothed by
# this lowpass before frame averaging.
ENVELOPE_LOWPASS_HZ = 150.0
FEATURE_RATE = 50.0
FEATURE_BAND = (1.0, 20.0)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Nonnegative band energies (bands x frames) on an ERB-spaced axis."""

    energy: np.ndarray
    center_freqs: np.ndarray
    frame_rate: float

    def __post_init__(self):
        energy = np.atleast_2d(np.asarray(self.energy, dtype=np.float64))
        freqs = np.asarray(self.center_freqs, dtype=np.float64)
        object.__setattr__(self, "energy", energy)
        object.__setattr__(self, "center_freqs", freqs)
        if energy.shape[0] != freqs.size:
            raise ValueError(
                f"{freqs.size} center frequencies for {energy.shape[0]} bands"
            )
        if np.any(np.diff(freqs) <= 0):
            raise InvalidBand("center frequencies must be strictly increasing")

    @property
    def n_bands(self) -> int:
        return self.energy.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """Single stimulus feature x(k): envelope or onsets."""

    values: np.ndarray
    rate: float
    kind: str
    source_id: str = ""
    edge_seconds: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", values)
        if not self.rate > 0:
            raise InvalidRate(f"rate must be positive, got {self.rate}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("feature series contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.values.size

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    def with_values(self, values, rate=None, edge_seconds=None) -> "FeatureSeries":
        return dataclasses.replace(
            self,
            values=values,
            rate=self.rate if rate is None else rate,
            edge_seconds=self.edge_seconds if edge_seconds is None else edge_seconds,
        )


def erb_rate(freq_hz):
    """Frequency in Hz mapped onto the equivalent-rectangular-bandwidth scale."""
    return 21.4 * np.log10(0.00437 * np.asarray(freq_hz, dtype=np.float64) + 1.0)


def erb_rate_inverse(rate):
    return (10.0 ** (np.asarray(rate, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_space(f_lo: float, f_hi: float, n: int) -> np.ndarray:
    """n center frequencies equally spaced on the ERB scale from f_lo to f_hi."""
    if not 0 < f_lo < f_hi:
        raise InvalidBand(f"need 0 < f_lo < f_hi, got ({f_lo}, {f_hi})")
    return erb_rate_inverse(np.linspace(erb_rate(f_lo), erb_rate(f_hi), n))


def _gammatone_sos(fc: float, rate: float) -> np.ndarray:
    """Fourth-order gammatone as four cascaded biquads.

    Same poles/zeros/gain as the classic expanded 8th-order IIR design, but
    the expanded polynomial is numerically unstable for low fc/rate (its
    4-fold repeated pole pair drifts outside the unit circle in double
    precision), so the factored cascade is used instead.
    """
    T = 1.0 / rate
    erb = 24.7 * (4.37 * fc / 1000.0 + 1.0)
    bw_t = 2.0 * np.pi * 1.019 * erb * T
    fr = 2.0 * np.pi * fc * T
    decay = np.exp(-bw_t)
    cos, sin = np.cos(fr), np.sin(fr)
    spread = (np.sqrt(3.0 + 2.0**1.5), np.sqrt(3.0 - 2.0**1.5))
    zeros = (cos - spread[0] * sin, cos + spread[0] * sin,
             cos - spread[1] * sin, cos + spread[1] * sin)
    den = (1.0, -2.0 * cos * decay, decay * decay)
    w = np.exp(1j * fr)
    resp = np.prod([
        (T - T * z * decay / w) / (1.0 - 2.0 * cos * decay / w + decay**2 / w**2)
        for z in zeros
    ])
    k = (1.0 / np.abs(resp)) ** 0.25
    return np.array([[k * T, -k * T * z * decay, 0.0, *den] for z in zeros])


def gammatone_spectrogram(audio: TimeSeries, bands: int = 128,
                          f_lo: float = 80.0, f_hi: float = 15000.0,
                          frame_step: float = 0.001) -> Spectrogram:
    """Fourth-order gammatone filterbank magnitudes, frame-averaged.

    Band magnitude is half-wave rectified filter output smoothed at 150 Hz,
    then averaged over non-overlapping frames of frame_step seconds.
    """
    if audio.n_channels != 1:
        raise MonoRequired(
            f"gammatone analysis expects mono audio, got {audio.n_channels} channels"
        )
    if bands < 2:
        raise InvalidBand("need at least two bands")
    if f_hi >= audio.rate / 2:
        raise InvalidBand(
            f"f_hi {f_hi} Hz reaches Nyquist ({audio.rate / 2} Hz)"
        )
    x = audio.data[0]
    centers = erb_space(f_lo, f_hi, bands)
    sos_env = signal.butter(4, ENVELOPE_LOWPASS_HZ, btype="lowpass",
                            fs=audio.rate, output="sos")
    step = int(round(frame_step * audio.rate))
    if step < 1:
        raise InvalidBand(f"frame step {frame_step}s is below one sample")
    n_frames = x.size // step
    energy = np.empty((bands, n_frames))
    for b_i, fc in enumerate(centers):
        y = signal.sosfilt(_gammatone_sos(fc, audio.rate), x)
        mag = signal.sosfilt(sos_env, np.maximum(y, 0.0))
        energy[b_i] = np.maximum(mag[: n_frames * step], 0.0) \
            .reshape(n_frames, step).mean(axis=1)
    return Spectrogram(energy, centers, audio.rate / step)


def envelope(spec: Spectrogram, source_id: str = "") -> FeatureSeries:
    """Acoustic envelope: band-summed magnitude per frame."""
    values = np.abs(spec.energy).sum(axis=0)
    return FeatureSeries(values, spec.frame_rate, "envelope", source_id)


def onsets(spec: Spectrogram, smooth_window: int = 11, poly_order: int = 2,
           source_id: str = "") -> FeatureSeries:
    """Acoustic onsets: half-wave rectified smoothed derivative, band-summed."""
    if smooth_window % 2 == 0 or smooth_window <= poly_order:
        raise InvalidWindow(
            f"smoothing window must be odd and above the polynomial order, "
            f"got window={smooth_window}, order={poly_order}"
        )
    deriv = signal.savgol_filter(spec.energy, smooth_window, poly_order,
                                 deriv=1, axis=1)
    values = np.maximum(deriv, 0.0).sum(axis=0)
    return FeatureSeries(values, spec.frame_rate, "onset", source_id)


def prepare_feature(f: FeatureSeries) -> FeatureSeries:
    """1-20 Hz bandpass, downsample to 50 Hz, z-score."""
    if f.rate < 100.0:
        raise InvalidRate(
            f"feature rate {f.rate} Hz below the 100 Hz minimum for preparation"
        )
    ts = TimeSeries(f.values[np.newaxis], f.rate, (f.kind or "feature",),
                    edge_seconds=f.edge_seconds)
    ts = bandpass_filter(ts, FilterSpec("bandpass", FEATURE_BAND))
    ts = _resample(ts, FEATURE_RATE)
    ts = _normalize(ts)
    return f.with_values(ts.data[0], rate=FEATURE_RATE,
                         edge_seconds=max(f.edge_seconds, EDGE_SECONDS))
