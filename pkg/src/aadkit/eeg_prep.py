"""EEG preprocessing: re-referencing, line-noise removal, filtering, downsampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InsufficientChannels, UnknownChannel
from .signal_core import (
    FilterSpec,
    TimeSeries,
    bandpass_filter,
    normalize,
    notch_filter,
    resample,
)

# 44-channel scalp cap (10-10 subset) and the 2x10 around-the-ear grid.
DEFAULT_SCALP_LABELS = (
    "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AF4", "AF8",
    "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8",
    "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6",
    "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
    "P7", "P3", "Pz", "P4", "P8",
)
DEFAULT_GRID_LABELS = tuple(f"L{i}" for i in range(1, 11)) + \
    tuple(f"R{i}" for i in range(1, 11))
GRID_REFERENCE_LABELS = ("L4", "R4")


@dataclass(frozen=True)
class MontageSplit:
    """Partition of recording channels into scalp cap and ear grid."""

    scalp_labels: tuple[str, ...] = DEFAULT_SCALP_LABELS
    grid_labels: tuple[str, ...] = DEFAULT_GRID_LABELS

    def __post_init__(self):
        object.__setattr__(self, "scalp_labels", tuple(self.scalp_labels))
        object.__setattr__(self, "grid_labels", tuple(self.grid_labels))
        overlap = set(self.scalp_labels) & set(self.grid_labels)
        if overlap:
            raise UnknownChannel(
                f"labels assigned to both scalp and grid: {sorted(overlap)}"
            )

    def validate_against(self, labels) -> None:
        missing = (set(self.scalp_labels) | set(self.grid_labels)) - set(labels)
        if missing:
            raise UnknownChannel(
                f"montage channels absent from recording: {sorted(missing)}"
            )


@dataclass(frozen=True)
class PrepConfig:
    """Parameters of the preprocessing chain; defaults follow the study setup."""

    notch_hz: float = 50.0
    notch_q: float = 30.0
    wide_band: tuple[float, float] = (0.1, 40.0)
    narrow_band: tuple[float, float] = (1.0, 20.0)
    target_rate: float = 50.0
    filter_order: int = 4
    grid_refs: tuple[str, ...] = GRID_REFERENCE_LABELS
    # Optional artifact-removal stage applied between the wide and narrow
    # bandpass stages (e.g. a channel x time mask); None is a no-op.
    artifact_hook: Callable[[TimeSeries], TimeSeries] | None = field(
        default=None, compare=False
    )


def rereference_average(eeg: TimeSeries) -> TimeSeries:
    """Subtract the per-sample mean across channels from every channel."""
    if eeg.n_channels < 2:
        raise InsufficientChannels("average reference needs at least two channels")
    return eeg.with_data(eeg.data - eeg.data.mean(axis=0, keepdims=True))


def rereference_channels(eeg: TimeSeries, refs) -> TimeSeries:
    """Subtract the per-sample mean of the named reference channels."""
    idx = [eeg.channel_index(r) for r in refs]
    return eeg.with_data(eeg.data - eeg.data[idx].mean(axis=0, keepdims=True))


def mask_artifacts(mask: np.ndarray) -> Callable[[TimeSeries], TimeSeries]:
    """Artifact hook that multiplies the data by a channels x samples mask."""
    mask = np.asarray(mask, dtype=np.float64)

    def hook(ts: TimeSeries) -> TimeSeries:
        if mask.shape != ts.data.shape:
            from .errors import DimensionMismatch

            raise DimensionMismatch(
                f"artifact mask shape {mask.shape} != data shape {ts.data.shape}"
            )
        return ts.with_data(ts.data * mask)

    return hook


def _prep_branch(branch: TimeSeries, cfg: PrepConfig) -> TimeSeries:
    branch = notch_filter(
        branch, FilterSpec("notch", (cfg.notch_hz, cfg.notch_q))
    )
    branch = bandpass_filter(
        branch, FilterSpec("bandpass", cfg.wide_band, cfg.filter_order)
    )
    if cfg.artifact_hook is not None:
        branch = cfg.artifact_hook(branch)
    branch = bandpass_filter(
        branch, FilterSpec("bandpass", cfg.narrow_band, cfg.filter_order)
    )
    branch = resample(branch, cfg.target_rate)
    return normalize(branch)


def preprocess_eeg(eeg: TimeSeries, montage: MontageSplit,
                   cfg: PrepConfig = PrepConfig()) -> tuple[TimeSeries, TimeSeries]:
    """Both branches of the preprocessing chain: (scalp, grid).

    Scalp channels are re-referenced to their average, grid channels to the
    mean of the grid reference pair; both then pass through notch, wide
    bandpass, optional artifact hook, narrow bandpass, downsampling, and
    z-scoring, in that order.
    """
    montage.validate_against(eeg.labels)
    scalp = rereference_average(eeg.select(montage.scalp_labels))
    grid = rereference_channels(eeg.select(montage.grid_labels), cfg.grid_refs)
    return _prep_branch(scalp, cfg), _prep_branch(grid, cfg)
