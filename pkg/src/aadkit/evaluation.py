"""Correlation metrics, leave-one-trial-out CV, lag scans, and attention
classification over decision windows."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientTrials,
    InvalidSpec,
    RateMismatch,
    UndefinedCorrelation,
    WindowTooLong,
)
from .signal_core import TimeSeries
from .stim_features import FeatureSeries
from .trf import (
    BoostConfig,
    LagGrid,
    TRFKernel,
    fit_boosting,
    make_basis,
    predict_forward,
    reconstruct_backward,
)

if TYPE_CHECKING:
    from .synth import SwitchSchedule

CONDITIONS = ("SustAC", "SwitAC", "ConvAC")
# Decision-window grid echoing the classification analysis; the longest
# window only applies where attention is sustained for a whole trial.
DECISION_WINDOWS = (1.1, 2.2, 4.4, 8.8, 17.5, 35.0, 178.0)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One trial: preprocessed EEG plus attended/ignored stimulus features."""

    eeg: TimeSeries
    attended: FeatureSeries
    ignored: FeatureSeries
    condition: str
    schedule: "SwitchSchedule | None" = None
    subject_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise InvalidSpec(f"unknown condition {self.condition!r}")
        rates = {self.eeg.rate, self.attended.rate, self.ignored.rate}
        if len(rates) != 1:
            raise RateMismatch(f"trial series rates differ: {sorted(rates)}")
        n = self.eeg.n_samples
        if self.attended.n_samples != n or self.ignored.n_samples != n:
            raise DimensionMismatch(
                f"trial series lengths differ: eeg={n}, "
                f"attended={self.attended.n_samples}, "
                f"ignored={self.ignored.n_samples}"
            )
        if self.condition == "SwitAC" and self.schedule is None:
            raise InvalidSpec("switching trials must carry a switch schedule")

    @property
    def rate(self) -> float:
        return self.eeg.rate

    @property
    def duration(self) -> float:
        return self.eeg.duration


@dataclass(frozen=True)
class CorrelationResult:
    """Reconstruction/prediction correlations of one CV fold."""

    r_attended: float
    r_ignored: float
    electrode_set: str
    feature_kind: str
    subject_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        for name, r in (("r_attended", self.r_attended),
                        ("r_ignored", self.r_ignored)):
            if not -1.0 <= r <= 1.0:
                raise UndefinedCorrelation(f"{name}={r} outside [-1, 1]")


@dataclass(frozen=True, eq=False)
class ScanCurve:
    """Fold-averaged correlation per sliding lag window, per stream."""

    window_centers: np.ndarray
    r_attended: np.ndarray
    r_ignored: np.ndarray
    ci_attended: np.ndarray
    ci_ignored: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.window_centers.size


@dataclass(frozen=True)
class ClassificationResult:
    """Attended-vs-ignored decisions pooled over one trial set."""

    window_length: float
    n_windows: int
    n_correct: int
    subject_id: str = ""
    condition: str = ""

    def __post_init__(self):
        if self.n_windows <= 0:
            raise WindowTooLong("classification produced no decision windows")
        if not 0 <= self.n_correct <= self.n_windows:
            raise DimensionMismatch(
                f"{self.n_correct} correct of {self.n_windows} windows"
            )

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_windows


@dataclass(frozen=True)
class WindowDecision:
    """One decision window: correlations against both candidates."""

    start: float
    length: float
    r_attended: float
    r_ignored: float
    correct: bool


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DimensionMismatch(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise DimensionMismatch(f"need at least 3 samples, got {x.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx2 = xc @ xc
    sy2 = yc @ yc
    if sx2 == 0.0 or sy2 == 0.0:
        raise UndefinedCorrelation("correlation of a constant sequence")
    # single sqrt keeps r(x, x) exactly 1
    return float(np.clip((xc @ yc) / math.sqrt(sx2 * sy2), -1.0, 1.0))


def _safe_r(x, y) -> float:
    """Pearson r with constant sequences scoring 0 (zero-model baseline)."""
    try:
        return pearson(x, y)
    except UndefinedCorrelation:
        return 0.0


def _usable_bounds(trial: TrialRecord) -> tuple[int, int]:
    """Sample range with filter-transient edges excluded."""
    edge = max(trial.eeg.edge_seconds, trial.attended.edge_seconds,
               trial.ignored.edge_seconds)
    i0 = int(math.ceil(edge * trial.rate - 1e-9))
    i1 = trial.eeg.n_samples - i0
    if i1 - i0 < 3:
        raise DimensionMismatch(
            f"trial {trial.trial_id!r} has no usable samples inside its edges"
        )
    return i0, i1


def _trimmed(trial: TrialRecord):
    """(eeg, attended, ignored) restricted to the usable sample range."""
    i0, i1 = _usable_bounds(trial)
    eeg = trial.eeg.with_data(trial.eeg.data[:, i0:i1], edge_seconds=0.0)
    att = trial.attended.with_values(trial.attended.values[i0:i1],
                                     edge_seconds=0.0)
    ign = trial.ignored.with_values(trial.ignored.values[i0:i1],
                                    edge_seconds=0.0)
    return eeg, att, ign


def _default_grid(direction: str, rate: float) -> LagGrid:
    # Post-stimulus lags carry the attention signal for decoding; the full
    # symmetric range is reserved for TRF-shape analyses.
    if direction == "backward":
        return LagGrid(0.0, 0.5, rate)
    return LagGrid(-1.0, 1.0, rate)


def _check_trials(trials) -> None:
    if len(trials) < 3:
        raise InsufficientTrials(
            f"leave-one-trial-out needs at least 3 trials, got {len(trials)}"
        )
    labels = trials[0].eeg.labels
    rate = trials[0].rate
    for t in trials:
        if t.eeg.labels != labels:
            raise DimensionMismatch("trials disagree on channel labels")
        if abs(t.rate - rate) > 1e-9:
            raise RateMismatch("trials disagree on sampling rate")


def _fold_cfg(cfg: BoostConfig, n_trials: int, fold: int) -> BoostConfig:
    """One training trial (the one after the test trial, cyclically) becomes
    the boosting validation segment."""
    val_orig = (fold + 1) % n_trials
    train_ids = [i for i in range(n_trials) if i != fold]
    return dataclasses.replace(
        cfg,
        validation_segments=(train_ids.index(val_orig),),
        validation_fraction=None,
    )


def fit_fold(trials, fold: int, direction: str, grid: LagGrid, basis,
             cfg: BoostConfig) -> TRFKernel:
    """Model of one leave-one-trial-out fold (trained on attended speech)."""
    train = [t for i, t in enumerate(trials) if i != fold]
    parts = [_trimmed(t) for t in train]
    if direction == "backward":
        inputs = [p[0] for p in parts]
        targets = [p[1] for p in parts]
    else:
        inputs = [p[1] for p in parts]
        targets = [p[0] for p in parts]
    return fit_boosting(inputs, targets, grid, basis,
                        _fold_cfg(cfg, len(trials), fold))


def loo_models(trials, direction: str = "backward",
               grid: LagGrid | None = None,
               fit_cfg: BoostConfig = BoostConfig()) -> list[TRFKernel]:
    """One model per leave-one-trial-out fold; fold i excludes trial i."""
    _check_trials(trials)
    if grid is None:
        grid = _default_grid(direction, trials[0].rate)
    basis = make_basis(grid)
    return [fit_fold(trials, fold, direction, grid, basis, fit_cfg)
            for fold in range(len(trials))]


def _fold_correlations(model: TRFKernel, trial: TrialRecord,
                       direction: str) -> tuple[float, float]:
    eeg, att, ign = _trimmed(trial)
    if direction == "backward":
        xhat = reconstruct_backward(model, eeg).values
        return _safe_r(xhat, att.values), _safe_r(xhat, ign.values)
    pred_att = predict_forward(model, att).data
    pred_ign = predict_forward(model, ign).data
    r_att = float(np.mean([_safe_r(pred_att[i], eeg.data[i])
                           for i in range(eeg.n_channels)]))
    r_ign = float(np.mean([_safe_r(pred_ign[i], eeg.data[i])
                           for i in range(eeg.n_channels)]))
    return r_att, r_ign


def cv_fit_eval(trials, fit_cfg: BoostConfig = BoostConfig(),
                direction: str = "backward", grid: LagGrid | None = None,
                electrode_set: str = "scalp") -> list[CorrelationResult]:
    """Leave-one-trial-out fitting and per-fold test correlations.

    Models are trained on the attended stream; each fold reports the test
    trial's correlation against both candidate streams (channel-averaged for
    forward models).
    """
    _check_trials(trials)
    if grid is None:
        grid = _default_grid(direction, trials[0].rate)
    basis = make_basis(grid)
    results = []
    for fold, trial in enumerate(trials):
        model = fit_fold(trials, fold, direction, grid, basis, fit_cfg)
        r_att, r_ign = _fold_correlations(model, trial, direction)
        results.append(CorrelationResult(
            r_att, r_ign, electrode_set, trial.attended.kind,
            subject_id=trial.subject_id, trial_id=trial.trial_id,
        ))
    return results


def _window_starts(trial: TrialRecord, n_win: int) -> list[int]:
    """Start samples of non-overlapping decision windows, excluding edges and
    never straddling a switch."""
    i0, i1 = _usable_bounds(trial)
    bounds = [i0]
    if trial.schedule is not None:
        for t_switch in (trial.schedule.t1, trial.schedule.t2):
            s = int(round(t_switch * trial.rate))
            if i0 < s < i1:
                bounds.append(s)
    bounds.append(i1)
    starts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        starts.extend(lo + k * n_win for k in range((hi - lo) // n_win))
    return starts


def classify_trial_windows(model: TRFKernel, trial: TrialRecord,
                           window_length: float,
                           coin_key: tuple[int, ...] = (0,)
                           ) -> list[WindowDecision]:
    """Per-window attended-vs-ignored decisions on one trial.

    The feature is reconstructed once over the usable range; each window is
    classified by the larger Pearson correlation against the two candidate
    streams. Exact ties fall to a deterministic coin seeded by coin_key and
    the window index.
    """
    n_win = int(round(window_length * trial.rate))
    if n_win < 3:
        raise WindowTooLong(
            f"window of {window_length}s holds under 3 samples at "
            f"{trial.rate} Hz"
        )
    i0, _ = _usable_bounds(trial)
    eeg, att, ign = _trimmed(trial)
    xhat = reconstruct_backward(model, eeg).values
    decisions = []
    for w_idx, start in enumerate(_window_starts(trial, n_win)):
        lo = start - i0
        sl = slice(lo, lo + n_win)
        r_att = _safe_r(xhat[sl], att.values[sl])
        r_ign = _safe_r(xhat[sl], ign.values[sl])
        if r_att != r_ign:
            correct = r_att > r_ign
        else:
            coin = np.random.default_rng(tuple(coin_key) + (w_idx,))
            correct = int(coin.integers(2)) == 0
        decisions.append(WindowDecision(start / trial.rate, window_length,
                                        r_att, r_ign, correct))
    return decisions


def classify_attention(trials, window_length: float,
                       fit_cfg: BoostConfig = BoostConfig(),
                       grid: LagGrid | None = None,
                       seed: int = 0) -> ClassificationResult:
    """Backward-model attention classification over decision windows.

    One backward model per leave-one-trial-out fold, trained on the attended
    stream; decisions are pooled over all windows of all held-out trials.
    """
    _check_trials(trials)
    if grid is None:
        grid = _default_grid("backward", trials[0].rate)
    basis = make_basis(grid)
    n_windows = 0
    n_correct = 0
    for fold, trial in enumerate(trials):
        model = fit_fold(trials, fold, "backward", grid, basis, fit_cfg)
        decisions = classify_trial_windows(model, trial, window_length,
                                           coin_key=(seed, fold))
        n_windows += len(decisions)
        n_correct += sum(d.correct for d in decisions)
    if n_windows == 0:
        raise WindowTooLong(
            f"no segment can hold a {window_length}s window"
        )
    return ClassificationResult(window_length, n_windows, n_correct,
                                subject_id=trials[0].subject_id,
                                condition=trials[0].condition)


def cross_condition(train_trials, test_trials, window_length: float,
                    fit_cfg: BoostConfig = BoostConfig(),
                    grid: LagGrid | None = None,
                    seed: int = 0) -> ClassificationResult:
    """Models fitted within the training condition, applied to another.

    Each leave-one-trial-out model from the training set classifies every
    window of every test-set trial; accuracies are pooled.
    """
    _check_trials(train_trials)
    if not test_trials:
        raise InsufficientTrials("test set is empty")
    if train_trials[0].eeg.labels != test_trials[0].eeg.labels:
        raise DimensionMismatch("train and test sets disagree on montage")
    if train_trials[0].attended.kind != test_trials[0].attended.kind:
        raise DimensionMismatch("train and test sets disagree on feature kind")
    if grid is None:
        grid = _default_grid("backward", train_trials[0].rate)
    basis = make_basis(grid)
    n_windows = 0
    n_correct = 0
    for fold in range(len(train_trials)):
        model = fit_fold(train_trials, fold, "backward", grid, basis, fit_cfg)
        for t_idx, trial in enumerate(test_trials):
            decisions = classify_trial_windows(model, trial, window_length,
                                               coin_key=(seed, fold, t_idx))
            n_windows += len(decisions)
            n_correct += sum(d.correct for d in decisions)
    if n_windows == 0:
        raise WindowTooLong(f"no segment can hold a {window_length}s window")
    return ClassificationResult(window_length, n_windows, n_correct,
                                subject_id=test_trials[0].subject_id,
                                condition=test_trials[0].condition)


def optimal_lag_scan(trials, direction: str = "backward",
                     electrode_set: str = "scalp",
                     fit_cfg: BoostConfig = BoostConfig(),
                     t_min_ms: int = -600, t_max_ms: int = 600,
                     window_ms: int = 45, step_ms: int = 15,
                     basis_width: float = 0.05) -> ScanCurve:
    """Correlation curve over sliding lag windows (one model per window/fold)."""
    _check_trials(trials)
    rate = trials[0].rate
    starts_ms = range(t_min_ms, t_max_ms - window_ms + 1, step_ms)
    centers = []
    att_mean, att_ci = [], []
    ign_mean, ign_ci = [], []
    n_folds = len(trials)
    for start_ms in starts_ms:
        grid = LagGrid(start_ms / 1000.0, (start_ms + window_ms) / 1000.0, rate)
        basis = make_basis(grid, basis_width)
        r_att = np.empty(n_folds)
        r_ign = np.empty(n_folds)
        for fold, trial in enumerate(trials):
            model = fit_fold(trials, fold, direction, grid, basis, fit_cfg)
            r_att[fold], r_ign[fold] = _fold_correlations(model, trial,
                                                          direction)
        centers.append((start_ms + window_ms / 2.0) / 1000.0)
        att_mean.append(r_att.mean())
        ign_mean.append(r_ign.mean())
        scale = 1.96 / math.sqrt(n_folds)
        att_ci.append(scale * r_att.std(ddof=1))
        ign_ci.append(scale * r_ign.std(ddof=1))
    return ScanCurve(np.array(centers), np.array(att_mean), np.array(ign_mean),
                     np.array(att_ci), np.array(ign_ci))
