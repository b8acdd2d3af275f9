"""Forward and backward temporal response functions with boosting estimation.

A forward kernel h(l, i) predicts EEG channel i from a stimulus feature:

    y_hat_i(k) = sum_l h(l, i) x(k - l),   l = l1 .. l2

and a backward kernel reconstructs the feature from all channels:

    x_hat(k) = sum_i sum_l h(l, i) y_i(k + l).

Kernels are parameterized as weighted sums of Hamming-window basis functions
and estimated by greedy coordinate descent on the basis weights (boosting)
with mean-absolute-error loss and validation-based early stopping.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import windows

from ._accel import eval_candidates
from .errors import (
    DegenerateBasis,
    DegenerateInput,
    DimensionMismatch,
    MissingValidation,
    RateMismatch,
)
from .signal_core import TimeSeries
from .stim_features import FeatureSeries


@dataclass(frozen=True)
class LagGrid:
    """Integer lag range l1..l2 spanned by [t_min, t_max] seconds at `rate`."""

    t_min: float
    t_max: float
    rate: float

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise DimensionMismatch(
                f"need t_min < t_max, got [{self.t_min}, {self.t_max}]"
            )
        if self.n_lags < 2:
            raise DimensionMismatch(
                f"lag grid [{self.t_min}, {self.t_max}] s at {self.rate} Hz "
                f"spans fewer than two samples"
            )

    @property
    def l1(self) -> int:
        return int(round(self.t_min * self.rate))

    @property
    def l2(self) -> int:
        return int(round(self.t_max * self.rate))

    @property
    def n_lags(self) -> int:
        return self.l2 - self.l1 + 1

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.l1, self.l2 + 1)

    @property
    def times(self) -> np.ndarray:
        return self.lags / self.rate


@dataclass(frozen=True, eq=False)
class BasisSet:
    """One Hamming window per lag, truncated at the grid edges."""

    functions: np.ndarray
    width: float
    grid: LagGrid

    @property
    def n_functions(self) -> int:
        return self.functions.shape[0]


def round_to_odd(x: float) -> int:
    """Smallest odd integer >= x (odd x maps to itself)."""
    return 2 * math.floor(x / 2.0) + 1


def make_basis(grid: LagGrid, width: float = 0.05) -> BasisSet:
    """Hamming basis of P = n_lags windows of `width` seconds, one per lag."""
    if width * grid.rate < 1.0:
        raise DegenerateBasis(
            f"basis width {width}s spans under one sample at {grid.rate} Hz"
        )
    support = max(3, round_to_odd(width * grid.rate))
    half = support // 2
    win = windows.hamming(support, sym=True)
    n = grid.n_lags
    funcs = np.zeros((n, n))
    for p in range(n):
        lo = max(0, p - half)
        hi = min(n, p + half + 1)
        funcs[p, lo:hi] = win[lo - (p - half): hi - (p - half)]
    return BasisSet(funcs, width, grid)


@dataclass(frozen=True)
class FitInfo:
    """Diagnostics of one boosting run (per accepted step, index 0 = start)."""

    train_mae: tuple[float, ...]
    val_mae: tuple[float, ...]
    best_step: int
    n_steps: int
    stop_reason: str


@dataclass(frozen=True, eq=False)
class TRFKernel:
    """Lag-indexed filter h (channels x lags) with optional basis coordinates."""

    h: np.ndarray
    grid: LagGrid
    direction: str
    weights: np.ndarray | None = None
    basis: BasisSet | None = None
    labels: tuple[str, ...] | None = None
    fit: FitInfo | None = None

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        object.__setattr__(self, "h", h)
        if self.direction not in ("forward", "backward"):
            raise DimensionMismatch(f"unknown direction {self.direction!r}")
        if h.shape[1] != self.grid.n_lags:
            raise DimensionMismatch(
                f"kernel has {h.shape[1]} lags, grid has {self.grid.n_lags}"
            )
        if not np.all(np.isfinite(h)):
            from .errors import NonFiniteInput

            raise NonFiniteInput("kernel coefficients must be finite")
        if self.weights is not None:
            w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
            object.__setattr__(self, "weights", w)
            if self.basis is not None:
                if w.shape[1] != self.basis.n_functions:
                    raise DimensionMismatch(
                        f"{w.shape[1]} weights for {self.basis.n_functions} "
                        f"basis functions"
                    )
                if np.max(np.abs(w @ self.basis.functions - h)) > 1e-10:
                    raise DimensionMismatch(
                        "kernel does not equal its basis expansion"
                    )

    @property
    def n_channels(self) -> int:
        return self.h.shape[0]


def expand(weights: np.ndarray, basis: BasisSet,
           direction: str = "forward") -> TRFKernel:
    """Kernel h(i, l) = sum_p weights(i, p) * phi_p(l)."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if w.shape[1] != basis.n_functions:
        raise DimensionMismatch(
            f"{w.shape[1]} weights per channel for {basis.n_functions} "
            f"basis functions"
        )
    return TRFKernel(w @ basis.functions, basis.grid, direction,
                     weights=w, basis=basis)


def _lagged_sum(sig: np.ndarray, taps: np.ndarray, l1: int) -> np.ndarray:
    """out(t) = sum_j taps[j] * sig(t - (l1 + j)), zero-extended, len(sig) long."""
    n = sig.size
    full = np.convolve(sig, taps)
    out = np.zeros(n)
    t_lo = max(0, l1)
    t_hi = min(n, full.size + l1)
    if t_lo < t_hi:
        out[t_lo:t_hi] = full[t_lo - l1: t_hi - l1]
    return out


def predict_forward(k: TRFKernel, x: FeatureSeries,
                    rate_tol: float = 1e-9) -> TimeSeries:
    """EEG prediction y_hat_i(t) = sum_l h(l, i) x(t - l)."""
    if k.direction != "forward":
        raise DimensionMismatch(f"expected forward kernel, got {k.direction}")
    if abs(x.rate - k.grid.rate) > rate_tol:
        raise RateMismatch(
            f"feature rate {x.rate} Hz != kernel grid rate {k.grid.rate} Hz"
        )
    out = np.vstack([_lagged_sum(x.values, k.h[i], k.grid.l1)
                     for i in range(k.n_channels)])
    labels = k.labels or tuple(f"ch{i:02d}" for i in range(k.n_channels))
    return TimeSeries(out, x.rate, labels, edge_seconds=x.edge_seconds)


def reconstruct_backward(k: TRFKernel, eeg: TimeSeries,
                         rate_tol: float = 1e-9) -> FeatureSeries:
    """Feature reconstruction x_hat(t) = sum_i sum_l h(l, i) y_i(t + l)."""
    if k.direction != "backward":
        raise DimensionMismatch(f"expected backward kernel, got {k.direction}")
    if eeg.n_channels != k.n_channels:
        raise DimensionMismatch(
            f"kernel has {k.n_channels} channels, EEG has {eeg.n_channels}"
        )
    if abs(eeg.rate - k.grid.rate) > rate_tol:
        raise RateMismatch(
            f"EEG rate {eeg.rate} Hz != kernel grid rate {k.grid.rate} Hz"
        )
    acc = np.zeros(eeg.n_samples)
    for i in range(k.n_channels):
        acc += _lagged_sum(eeg.data[i], k.h[i, ::-1], -k.grid.l2)
    return FeatureSeries(acc, eeg.rate, "reconstruction",
                         edge_seconds=eeg.edge_seconds)


@dataclass(frozen=True)
class BoostConfig:
    """Boosting hyperparameters; loss is fixed at mean absolute error."""

    step_fraction: float = 0.005
    patience: int = 10
    max_iters: int = 10000
    validation_fraction: float | None = 0.2
    validation_segments: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 < self.step_fraction < 1:
            raise DimensionMismatch(
                f"step_fraction must lie in (0, 1), got {self.step_fraction}"
            )
        if self.patience < 1:
            raise DimensionMismatch("patience must be at least 1")
        if self.max_iters < 1:
            raise DimensionMismatch("max_iters must be at least 1")


def _as_segments(obj) -> list:
    return list(obj) if isinstance(obj, (list, tuple)) else [obj]


def _segment_arrays(inputs, targets, grid: LagGrid, rate_tol: float = 1e-9):
    """Per-segment (input matrix, target matrix) pairs plus direction/labels."""
    segs_in = _as_segments(inputs)
    segs_tgt = _as_segments(targets)
    if len(segs_in) != len(segs_tgt) or not segs_in:
        raise DimensionMismatch(
            f"{len(segs_in)} input segments vs {len(segs_tgt)} target segments"
        )
    first_in, first_tgt = segs_in[0], segs_tgt[0]
    if isinstance(first_in, FeatureSeries) and isinstance(first_tgt, TimeSeries):
        direction = "forward"
        labels = first_tgt.labels
    elif isinstance(first_in, TimeSeries) and isinstance(first_tgt, FeatureSeries):
        direction = "backward"
        labels = first_in.labels
    else:
        raise DimensionMismatch(
            "expected (FeatureSeries -> TimeSeries) for forward fitting or "
            "(TimeSeries -> FeatureSeries) for backward fitting"
        )

    def as_matrix(s):
        return s.data if isinstance(s, TimeSeries) else s.values[np.newaxis]

    pairs = []
    for s_in, s_tgt in zip(segs_in, segs_tgt):
        for s in (s_in, s_tgt):
            if abs(s.rate - grid.rate) > rate_tol:
                raise RateMismatch(
                    f"segment rate {s.rate} Hz != grid rate {grid.rate} Hz"
                )
        a, b = as_matrix(s_in), as_matrix(s_tgt)
        if a.shape[1] != b.shape[1]:
            raise DimensionMismatch(
                f"input segment has {a.shape[1]} samples, target has {b.shape[1]}"
            )
        pairs.append((a, b))
    n_in = pairs[0][0].shape[0]
    n_tgt = pairs[0][1].shape[0]
    for a, b in pairs:
        if a.shape[0] != n_in or b.shape[0] != n_tgt:
            raise DimensionMismatch("segments disagree on channel count")
    return pairs, direction, labels


def _split_validation(pairs, cfg: BoostConfig):
    """(train pairs, validation pairs) per the config's validation rule."""
    if cfg.validation_segments is not None:
        vset = set(cfg.validation_segments)
        if not vset or any(i < 0 or i >= len(pairs) for i in vset):
            raise MissingValidation(
                f"validation segment indices {sorted(vset)} invalid for "
                f"{len(pairs)} segments"
            )
        train = [p for i, p in enumerate(pairs) if i not in vset]
        val = [p for i, p in enumerate(pairs) if i in vset]
        if not train:
            raise MissingValidation("every segment was assigned to validation")
        return train, val
    frac = cfg.validation_fraction
    if not frac or frac <= 0:
        raise MissingValidation(
            "no validation data: set validation_fraction or validation_segments"
        )
    train, val = [], []
    for a, b in pairs:
        n = a.shape[1]
        n_val = max(1, int(round(frac * n)))
        if n_val >= n:
            raise MissingValidation(
                f"validation fraction {frac} leaves no training samples "
                f"in a {n}-sample segment"
            )
        train.append((a[:, : n - n_val], b[:, : n - n_val]))
        val.append((a[:, n - n_val:], b[:, n - n_val:]))
    return train, val


def _basis_responses(pairs, basis: BasisSet, direction: str) -> np.ndarray:
    """Z rows: per (input channel, basis fn), lagged response, segments stacked.

    Forward (input channel = the feature) rows follow predict_forward's lag
    convention; backward rows follow reconstruct_backward's. Zero-extension is
    applied per segment so trials do not leak into each other.
    """
    grid = basis.grid
    n_in = pairs[0][0].shape[0]
    n_p = basis.n_functions
    cols = sum(a.shape[1] for a, _ in pairs)
    z = np.empty((n_in * n_p, cols))
    for c in range(n_in):
        for p in range(n_p):
            if direction == "forward":
                taps, start = basis.functions[p], grid.l1
            else:
                taps, start = basis.functions[p][::-1], -grid.l2
            row = c * n_p + p
            offset = 0
            for a, _ in pairs:
                seg = a[c]
                z[row, offset: offset + seg.size] = _lagged_sum(
                    seg, taps, start
                )
                offset += seg.size
    return z


def fit_boosting(inputs, targets, grid: LagGrid, basis: BasisSet,
                 cfg: BoostConfig = BoostConfig()) -> TRFKernel:
    """Sparse TRF estimation by greedy +/-delta coordinate descent.

    Starting from zero weights, each iteration evaluates a +/-delta step on
    every (channel, basis-index) coordinate and applies the single step that
    most reduces training MAE (ties: lowest coordinate, positive step first).
    Validation MAE is tracked after every accepted step; fitting stops when it
    has not improved for `patience` accepted steps, when no step reduces
    training MAE, or at `max_iters`. The returned kernel is the one with the
    best validation MAE. delta = step_fraction * (sigma_target / sigma_input),
    per channel. Deterministic given inputs and config.
    """
    if basis.grid != grid:
        raise DimensionMismatch("basis was built on a different lag grid")
    pairs, direction, labels = _segment_arrays(inputs, targets, grid)
    train_pairs, val_pairs = _split_validation(pairs, cfg)
    if not any(b.shape[1] for _, b in val_pairs):
        raise MissingValidation("validation segments are empty")

    n_in = pairs[0][0].shape[0]
    n_rows = pairs[0][1].shape[0]
    n_p = basis.n_functions
    ordered = train_pairs + val_pairs
    n_train = sum(a.shape[1] for a, _ in train_pairs)
    n_val = sum(a.shape[1] for a, _ in val_pairs)
    if n_train == 0:
        raise MissingValidation("training segments are empty")

    z = _basis_responses(ordered, basis, direction)
    resid = np.concatenate([b for _, b in ordered], axis=1).astype(np.float64)

    sigma_in = np.concatenate([a for a, _ in train_pairs], axis=1).std(axis=1)
    sigma_tgt = resid[:, :n_train].std(axis=1)
    if np.any(sigma_in == 0):
        raise DegenerateInput("an input channel has zero variance")
    if np.any(sigma_tgt == 0):
        raise DegenerateInput("a target channel has zero variance")

    # Candidate k = (channel, basis index), channel-major. For forward fits
    # the channel is the target row; for backward fits it is the input channel
    # and every candidate shares the single target row.
    n_ch = n_rows if direction == "forward" else n_in
    n_cand = n_ch * n_p
    if direction == "forward":
        cand_rows = np.repeat(np.arange(n_ch), n_p)
        cand_zidx = np.tile(np.arange(n_p), n_ch)
        deltas = cfg.step_fraction * np.repeat(sigma_tgt / sigma_in[0], n_p)
    else:
        cand_rows = np.zeros(n_cand, dtype=np.int64)
        cand_zidx = np.arange(n_cand)
        deltas = cfg.step_fraction * np.repeat(sigma_tgt[0] / sigma_in, n_p)
    cand_rows = cand_rows.astype(np.int64)
    cand_zidx = cand_zidx.astype(np.int64)
    row_members = [np.flatnonzero(cand_rows == r).astype(np.int64)
                   for r in range(n_rows)]

    e_plus = np.empty(n_cand)
    e_minus = np.empty(n_cand)
    rowabs = np.abs(resid[:, :n_train]).sum(axis=1)
    val_rowabs = np.abs(resid[:, n_train:]).sum(axis=1)

    w = np.zeros((n_ch, n_p))
    best_w = w.copy()
    best_val = val_rowabs.sum()
    best_step = 0
    train_trace = [rowabs.sum() / (n_rows * n_train)]
    val_trace = [best_val / (n_rows * n_val)]
    since_best = 0
    stop_reason = "max_iters"
    refresh = np.arange(n_cand, dtype=np.int64)

    n_steps = 0
    while n_steps < cfg.max_iters:
        eval_candidates(resid, z, cand_rows, cand_zidx, deltas, n_train,
                        e_plus, e_minus, refresh)
        best_e = np.minimum(e_plus, e_minus)
        gain = rowabs[cand_rows] - best_e
        k = int(np.argmax(gain))
        if not gain[k] > 0:
            stop_reason = "converged"
            break
        sign = 1.0 if e_plus[k] <= e_minus[k] else -1.0
        ch, p = divmod(k, n_p)
        row = cand_rows[k]
        w[ch, p] += sign * deltas[k]
        resid[row] -= sign * deltas[k] * z[cand_zidx[k]]
        rowabs[row] = e_plus[k] if sign > 0 else e_minus[k]
        val_rowabs[row] = np.abs(resid[row, n_train:]).sum()
        n_steps += 1
        train_trace.append(rowabs.sum() / (n_rows * n_train))
        val_total = val_rowabs.sum()
        val_trace.append(val_total / (n_rows * n_val))
        refresh = row_members[row]
        if val_total < best_val:
            best_val = val_total
            best_w = w.copy()
            best_step = n_steps
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                stop_reason = "early_stop"
                break

    info = FitInfo(tuple(train_trace), tuple(val_trace), best_step, n_steps,
                   stop_reason)
    kernel = expand(best_w, basis, direction)
    return dataclasses.replace(kernel, labels=tuple(labels), fit=info)
