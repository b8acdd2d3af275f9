"""Ground-truth simulator: speech-like features, attention schedules, and EEG
generated as kernel convolutions plus noise, for oracle-based testing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, RateMismatch
from .evaluation import TrialRecord
from .signal_core import EDGE_SECONDS, TimeSeries
from .stim_features import FeatureSeries
from .trf import LagGrid, TRFKernel, predict_forward

# Response morphology: positive P1 near 40 ms, negative N1 near 100 ms,
# positive P2 near 180 ms with the largest magnitude.
DEFAULT_PEAKS = (
    (0.040, 0.5, 0.015),
    (0.100, -0.7, 0.020),
    (0.180, 1.0, 0.030),
)
CONDITIONS = ("SustAC", "SwitAC", "ConvAC")
# Speech envelopes concentrate modulation energy around 4 Hz.
MODULATION_PEAK_HZ = 4.0


@dataclass(frozen=True)
class KernelSpec:
    """Sum-of-Gaussian-bumps kernel: peaks = (latency s, amplitude, width s)."""

    peaks: tuple[tuple[float, float, float], ...] = DEFAULT_PEAKS
    channel_gains: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "peaks",
                           tuple(tuple(float(v) for v in p) for p in self.peaks))
        object.__setattr__(self, "channel_gains",
                           tuple(float(g) for g in self.channel_gains))
        for latency, _, width in self.peaks:
            if width <= 0:
                raise InvalidSpec(f"peak at {latency}s has width {width} <= 0")
        if not self.channel_gains:
            raise InvalidSpec("at least one channel gain is required")


@dataclass(frozen=True)
class SwitchSchedule:
    """Two attention switches per trial: roles swap at t1 and again at t2."""

    t1: float
    t2: float

    def __post_init__(self):
        if not 35.0 <= self.t1 <= 55.0:
            raise InvalidSpec(f"t1 must lie in [35, 55] s, got {self.t1}")
        if not 125.0 <= self.t2 <= 145.0:
            raise InvalidSpec(f"t2 must lie in [125, 145] s, got {self.t2}")
        if not self.t1 < self.t2:
            raise InvalidSpec(f"need t1 < t2, got {self.t1} >= {self.t2}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation scale, noise level, and stream gains."""

    n_subjects: int = 1
    n_trials: int = 8
    duration: float = 180.0
    rate: float = 50.0
    snr_db: float = 0.0
    gains: tuple[float, float] = (1.0, 0.5)
    noise_kind: str = "one_over_f"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        n = self.duration * self.rate
        if abs(n - round(n)) > 1e-9 or n < 1:
            raise InvalidSpec(
                f"duration x rate must be a positive integer, got {n}"
            )
        if len(self.gains) != 2 or any(g < 0 for g in self.gains):
            raise InvalidSpec(f"gains must be two nonnegative values, got {self.gains}")
        if self.noise_kind not in ("white", "one_over_f"):
            raise InvalidSpec(f"unknown noise kind {self.noise_kind!r}")
        if self.n_subjects < 1 or self.n_trials < 1:
            raise InvalidSpec("n_subjects and n_trials must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.rate))


def make_ground_truth_kernel(spec: KernelSpec, grid: LagGrid) -> TRFKernel:
    """Forward kernel: sum of Gaussian bumps, scaled per channel."""
    times = grid.times
    base = np.zeros(grid.n_lags)
    for latency, amplitude, width in spec.peaks:
        if not grid.t_min <= latency <= grid.t_max:
            raise InvalidSpec(
                f"peak latency {latency}s outside grid "
                f"[{grid.t_min}, {grid.t_max}]s"
            )
        base += amplitude * np.exp(-0.5 * ((times - latency) / width) ** 2)
    h = np.outer(spec.channel_gains, base)
    return TRFKernel(h, grid, "forward")


def gen_switch_schedule(rng_seed) -> SwitchSchedule:
    """t1 ~ U(35, 55), t2 ~ U(125, 145); deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    return SwitchSchedule(rng.uniform(35.0, 55.0), rng.uniform(125.0, 145.0))


def speech_like_feature(n_samples: int, rate: float, rng,
                        source_id: str = "") -> FeatureSeries:
    """Surrogate envelope: noise shaped to a 4 Hz-peaked modulation spectrum."""
    n_bins = n_samples // 2 + 1
    coefs = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / rate)
    shape = (freqs / MODULATION_PEAK_HZ) * np.exp(1.0 - freqs / MODULATION_PEAK_HZ)
    values = np.fft.irfft(coefs * shape, n_samples)
    values = (values - values.mean()) / values.std()
    return FeatureSeries(values, rate, "envelope", source_id)


def _noise_matrix(n_channels: int, n_samples: int, rate: float, kind: str,
                  rng) -> np.ndarray:
    """Unit-variance noise per channel: white or 1/f-shaped."""
    if kind == "white":
        noise = rng.standard_normal((n_channels, n_samples))
    else:
        n_bins = n_samples // 2 + 1
        coefs = rng.standard_normal((n_channels, n_bins)) \
            + 1j * rng.standard_normal((n_channels, n_bins))
        freqs = np.fft.rfftfreq(n_samples, 1.0 / rate)
        shape = 1.0 / np.sqrt(np.maximum(freqs, 1.0))
        shape[0] = 0.0
        noise = np.fft.irfft(coefs * shape, n_samples, axis=1)
    mean = noise.mean(axis=1, keepdims=True)
    std = noise.std(axis=1, keepdims=True)
    return (noise - mean) / std


def _compose_streams(feat_a: FeatureSeries, feat_b: FeatureSeries,
                     schedule: SwitchSchedule | None, rate: float):
    """Attended/ignored streams; roles of a and b swap at t1 and at t2."""
    a, b = feat_a.values, feat_b.values
    if schedule is None:
        return a.copy(), b.copy()
    i1 = int(round(schedule.t1 * rate))
    i2 = int(round(schedule.t2 * rate))
    att = np.concatenate([a[:i1], b[i1:i2], a[i2:]])
    ign = np.concatenate([b[:i1], a[i1:i2], b[i2:]])
    return att, ign


def simulate_trial(k_att: TRFKernel, k_ign: TRFKernel, feat_a: FeatureSeries,
                   feat_b: FeatureSeries, cfg: SimConfig,
                   schedule: SwitchSchedule | None = None,
                   subject_id: str = "s00", trial_id: str = "t00",
                   condition: str | None = None) -> TrialRecord:
    """EEG = conv(attended, k_att)*g_att + conv(ignored, k_ign)*g_ign + noise.

    Noise is scaled so pooled signal power over noise power matches
    cfg.snr_db. Bit-for-bit reproducible given (cfg.seed, inputs).
    """
    for f in (feat_a, feat_b):
        if abs(f.rate - cfg.rate) > 1e-9:
            raise RateMismatch(f"feature rate {f.rate} Hz != sim rate {cfg.rate} Hz")
    for k in (k_att, k_ign):
        if abs(k.grid.rate - cfg.rate) > 1e-9:
            raise RateMismatch(
                f"kernel grid rate {k.grid.rate} Hz != sim rate {cfg.rate} Hz"
            )
    if k_att.n_channels != k_ign.n_channels:
        raise DimensionMismatch("attended and ignored kernels disagree on channels")
    n = cfg.n_samples
    if feat_a.n_samples != n or feat_b.n_samples != n:
        raise DimensionMismatch(
            f"features must hold {n} samples at {cfg.rate} Hz"
        )

    att, ign = _compose_streams(feat_a, feat_b, schedule, cfg.rate)
    g_att, g_ign = cfg.gains
    signal = (
        predict_forward(k_att, FeatureSeries(g_att * att, cfg.rate, "envelope")).data
        + predict_forward(k_ign, FeatureSeries(g_ign * ign, cfg.rate, "envelope")).data
    )
    rng = np.random.default_rng(cfg.seed)
    noise = _noise_matrix(k_att.n_channels, n, cfg.rate, cfg.noise_kind, rng)
    if np.isfinite(cfg.snr_db):
        signal_power = signal.var(axis=1).mean()
        noise_scale = np.sqrt(signal_power / 10.0 ** (cfg.snr_db / 10.0))
    else:
        noise_scale = 0.0
    labels = k_att.labels or tuple(f"ch{i:02d}" for i in range(k_att.n_channels))
    eeg = TimeSeries(signal + noise_scale * noise, cfg.rate, labels,
                     edge_seconds=EDGE_SECONDS)
    if condition is None:
        condition = "SwitAC" if schedule is not None else "SustAC"
    return TrialRecord(
        eeg=eeg,
        attended=FeatureSeries(att, cfg.rate, feat_a.kind, feat_a.source_id),
        ignored=FeatureSeries(ign, cfg.rate, feat_b.kind, feat_b.source_id),
        condition=condition,
        schedule=schedule,
        subject_id=subject_id,
        trial_id=trial_id,
    )


def _subject_kernel(base: KernelSpec, grid: LagGrid, n_channels: int,
                    rng) -> TRFKernel:
    """Per-subject kernel: jittered latencies/amplitudes, random channel gains."""
    peaks = tuple(
        (lat + rng.uniform(-0.01, 0.01), amp * rng.uniform(0.9, 1.1), width)
        for lat, amp, width in base.peaks
    )
    gains = tuple(rng.uniform(0.5, 1.0, size=n_channels))
    return make_ground_truth_kernel(KernelSpec(peaks, gains), grid)


def subject_kernel(cfg: SimConfig, subject: int, grid: LagGrid,
                   n_channels: int = 8,
                   base: KernelSpec = KernelSpec()) -> TRFKernel:
    """The ground-truth kernel of one simulated subject.

    Depends only on (cfg.seed, subject), never on trial or condition, so the
    same subject keeps one response function across conditions.
    """
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(subject, 0))
    return _subject_kernel(base, grid, n_channels, np.random.default_rng(seq))


def simulate_dataset(cfg: SimConfig, condition: str = "SustAC",
                     grid: LagGrid | None = None, n_channels: int = 8,
                     base: KernelSpec = KernelSpec(),
                     identical_streams: bool = False) -> list[TrialRecord]:
    """Trial bundle for n_subjects x n_trials under one condition.

    SwitAC trials draw a switch schedule per trial; other conditions run
    sustained. Per-trial seeds descend from (cfg.seed, subject, condition,
    trial) so bundles are reproducible and conditions are independent.
    """
    if condition not in CONDITIONS:
        raise InvalidSpec(f"unknown condition {condition!r}")
    if grid is None:
        grid = LagGrid(-0.2, 0.5, cfg.rate)
    cond_code = CONDITIONS.index(condition)
    n = cfg.n_samples
    trials = []
    for s in range(cfg.n_subjects):
        kernel = subject_kernel(cfg, s, grid, n_channels, base)
        for t in range(cfg.n_trials):
            seq = np.random.SeedSequence(
                cfg.seed, spawn_key=(s, 1 + cond_code, t)
            )
            feat_seed, noise_seed, sched_seed = seq.generate_state(3)
            rng = np.random.default_rng(feat_seed)
            feat_a = speech_like_feature(n, cfg.rate, rng, f"s{s:02d}t{t:02d}a")
            if identical_streams:
                feat_b = feat_a.with_values(feat_a.values.copy())
            else:
                feat_b = speech_like_feature(n, cfg.rate, rng, f"s{s:02d}t{t:02d}b")
            schedule = gen_switch_schedule(sched_seed) \
                if condition == "SwitAC" else None
            trial_cfg = SimConfig(
                n_subjects=1, n_trials=1, duration=cfg.duration, rate=cfg.rate,
                snr_db=cfg.snr_db, gains=cfg.gains, noise_kind=cfg.noise_kind,
                seed=int(noise_seed),
            )
            trials.append(simulate_trial(
                kernel, kernel, feat_a, feat_b, trial_cfg, schedule,
                subject_id=f"s{s:02d}", trial_id=f"t{t:02d}",
                condition=condition,
            ))
    return trials
