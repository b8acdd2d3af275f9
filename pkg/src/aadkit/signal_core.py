"""Sampled-signal container and filtering/resampling/normalization primitives."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal

from .errors import (
    ConstantChannel,
    InvalidFilterSpec,
    InvalidRate,
    NonFiniteInput,
    UpsamplingUnsupported,
)

# Filter transients are confined to roughly this long at either end; the value
# is carried as metadata so evaluation code can exclude those samples.
EDGE_SECONDS = 1.0


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Multichannel sampled signal (channels x samples) with labels."""

    data: np.ndarray
    rate: float
    labels: tuple[str, ...]
    edge_seconds: float = 0.0

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        if not self.rate > 0:
            raise InvalidRate(f"rate must be positive, got {self.rate}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteInput("time series contains non-finite values")
        if len(self.labels) != data.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {data.shape[0]} channels"
            )

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    def channel_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            from .errors import UnknownChannel

            raise UnknownChannel(f"no channel named {label!r}") from None

    def select(self, labels) -> "TimeSeries":
        """Subset of channels, in the order given."""
        idx = [self.channel_index(l) for l in labels]
        return dataclasses.replace(
            self, data=self.data[idx], labels=tuple(labels)
        )

    def with_data(self, data: np.ndarray, rate: float | None = None,
                  edge_seconds: float | None = None) -> "TimeSeries":
        return dataclasses.replace(
            self,
            data=data,
            rate=self.rate if rate is None else rate,
            edge_seconds=self.edge_seconds if edge_seconds is None else edge_seconds,
        )


@dataclass(frozen=True)
class FilterSpec:
    """IIR filter description: bandpass (low, high) or notch (center, Q)."""

    kind: str
    edges: tuple[float, float]
    order: int = 4

    def __post_init__(self):
        if self.kind not in ("bandpass", "notch"):
            raise InvalidFilterSpec(f"unknown filter kind {self.kind!r}")
        if len(self.edges) != 2:
            raise InvalidFilterSpec("edges must hold exactly two values")
        if self.order < 1:
            raise InvalidFilterSpec("order must be a positive integer")

    def validate_against(self, rate: float) -> None:
        nyquist = rate / 2.0
        if self.kind == "bandpass":
            low, high = self.edges
            if not 0 < low < high:
                raise InvalidFilterSpec(
                    f"bandpass edges must satisfy 0 < low < high, got {self.edges}"
                )
            if high >= nyquist:
                raise InvalidFilterSpec(
                    f"high edge {high} Hz reaches Nyquist ({nyquist} Hz)"
                )
        else:
            center, q = self.edges
            if not 0 < center < nyquist:
                raise InvalidFilterSpec(
                    f"notch center {center} Hz outside (0, {nyquist}) Hz"
                )
            if q <= 0:
                raise InvalidFilterSpec("notch quality factor must be positive")


def _settle_len(poles: np.ndarray, n_samples: int) -> int:
    """Padding long enough for the slowest pole to decay below 0.1%.

    The scipy filtfilt default (a few samples) is far too short for narrow
    notches and sub-hertz band edges, whose impulse responses ring for
    seconds; under-padding leaks boundary transients into the interior.
    """
    r = np.max(np.abs(poles))
    if r >= 1.0:
        return n_samples - 1
    return int(min(n_samples - 1, np.ceil(-7.0 / np.log(r))))


def bandpass_filter(ts: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Zero-phase Butterworth bandpass; shape, rate, and labels preserved."""
    if spec.kind != "bandpass":
        raise InvalidFilterSpec(f"expected bandpass spec, got {spec.kind!r}")
    spec.validate_against(ts.rate)
    zeros, poles, gain = signal.butter(spec.order, spec.edges,
                                       btype="bandpass", fs=ts.rate,
                                       output="zpk")
    sos = signal.zpk2sos(zeros, poles, gain)
    out = signal.sosfiltfilt(sos, ts.data, axis=1,
                             padlen=_settle_len(poles, ts.n_samples))
    return ts.with_data(out, edge_seconds=max(ts.edge_seconds, EDGE_SECONDS))


def notch_filter(ts: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Zero-phase IIR notch at spec.edges = (center Hz, quality factor)."""
    if spec.kind != "notch":
        raise InvalidFilterSpec(f"expected notch spec, got {spec.kind!r}")
    spec.validate_against(ts.rate)
    center, q = spec.edges
    b, a = signal.iirnotch(center, q, fs=ts.rate)
    out = signal.filtfilt(b, a, ts.data, axis=1,
                          padlen=_settle_len(np.roots(a), ts.n_samples))
    return ts.with_data(out, edge_seconds=max(ts.edge_seconds, EDGE_SECONDS))


def resample(ts: TimeSeries, target_rate: float) -> TimeSeries:
    """Anti-aliased downsampling to target_rate. Upsampling is out of scope."""
    if not target_rate > 0:
        raise InvalidRate(f"target rate must be positive, got {target_rate}")
    if target_rate == ts.rate:
        return ts
    if target_rate > ts.rate:
        raise UpsamplingUnsupported(
            f"target rate {target_rate} Hz exceeds input rate {ts.rate} Hz"
        )
    ratio = ts.rate / target_rate
    if abs(ratio - round(ratio)) < 1e-9:
        # Integer ratio: explicit anti-alias lowpass, then index decimation.
        q = int(round(ratio))
        zeros, poles, gain = signal.butter(8, 0.45 * target_rate,
                                           btype="lowpass", fs=ts.rate,
                                           output="zpk")
        sos = signal.zpk2sos(zeros, poles, gain)
        out = signal.sosfiltfilt(
            sos, ts.data, axis=1,
            padlen=_settle_len(poles, ts.n_samples),
        )[:, ::q]
    else:
        frac = Fraction(target_rate / ts.rate).limit_denominator(10000)
        out = signal.resample_poly(ts.data, frac.numerator, frac.denominator,
                                   axis=1)
    return ts.with_data(out, rate=target_rate,
                        edge_seconds=max(ts.edge_seconds, EDGE_SECONDS))


def normalize(ts: TimeSeries) -> TimeSeries:
    """Per-channel z-score with population standard deviation."""
    mean = ts.data.mean(axis=1, keepdims=True)
    std = ts.data.std(axis=1, keepdims=True)
    flat = np.flatnonzero(std[:, 0] == 0.0)
    if flat.size:
        raise ConstantChannel(
            f"channel {ts.labels[flat[0]]!r} is constant and cannot be normalized"
        )
    return ts.with_data((ts.data - mean) / std)
