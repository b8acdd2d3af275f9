"""Self-describing binary containers, CSV import, and trial-bundle manifests.

Formats (all little-endian):
  CTTS  TimeSeries: magic, version, rate f64, edge f64, n_ch u32, n_samp u64,
        label table, float32 data (channel-major)
  CTFS  FeatureSeries: magic, version, rate f64, edge f64, kind, source_id,
        n_samp u64, float32 data
  CTRF  TRFKernel: magic, version, rate f64, t_min f64, t_max f64, direction,
        basis width f64 (nan if none), labels, float64 h, optional float64
        basis weights
"""

from __future__ import annotations

import contextlib
import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import IoError
from .evaluation import TrialRecord
from .signal_core import TimeSeries
from .stim_features import FeatureSeries
from .trf import LagGrid, TRFKernel, make_basis

MAGIC_TIMESERIES = b"CTTS"
MAGIC_FEATURE = b"CTFS"
MAGIC_KERNEL = b"CTRF"
VERSION = 1


@contextlib.contextmanager
def atomic_write(path):
    """Write to a temp file in the target directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IoError(f"{fh.name}: truncated container")
    return data


def _unpack_str(fh) -> str:
    (n,) = struct.unpack("<H", _read_exact(fh, 2))
    return _read_exact(fh, n).decode("utf-8")


def _check_magic(fh, expected: bytes, path) -> None:
    magic = _read_exact(fh, 4)
    if magic != expected:
        raise IoError(
            f"{path}: bad magic {magic!r}, expected {expected.decode()!r}"
        )
    (version,) = struct.unpack("<I", _read_exact(fh, 4))
    if version != VERSION:
        raise IoError(f"{path}: unsupported container version {version}")


def write_timeseries(path, ts: TimeSeries) -> None:
    with atomic_write(path) as fh:
        fh.write(MAGIC_TIMESERIES)
        fh.write(struct.pack("<IddIQ", VERSION, ts.rate, ts.edge_seconds,
                             ts.n_channels, ts.n_samples))
        for label in ts.labels:
            fh.write(_pack_str(label))
        fh.write(ts.data.astype("<f4").tobytes(order="C"))


def read_timeseries(path) -> TimeSeries:
    try:
        with open(path, "rb") as fh:
            _check_magic(fh, MAGIC_TIMESERIES, path)
            rate, edge, n_ch, n_samp = struct.unpack(
                "<ddIQ", _read_exact(fh, struct.calcsize("<ddIQ"))
            )
            labels = tuple(_unpack_str(fh) for _ in range(n_ch))
            data = np.frombuffer(
                _read_exact(fh, 4 * n_ch * n_samp), dtype="<f4"
            ).reshape(n_ch, n_samp)
            return TimeSeries(data, rate, labels, edge_seconds=edge)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def write_feature(path, f: FeatureSeries) -> None:
    with atomic_write(path) as fh:
        fh.write(MAGIC_FEATURE)
        fh.write(struct.pack("<Idd", VERSION, f.rate, f.edge_seconds))
        fh.write(_pack_str(f.kind))
        fh.write(_pack_str(f.source_id))
        fh.write(struct.pack("<Q", f.n_samples))
        fh.write(f.values.astype("<f4").tobytes())


def read_feature(path) -> FeatureSeries:
    try:
        with open(path, "rb") as fh:
            _check_magic(fh, MAGIC_FEATURE, path)
            rate, edge = struct.unpack("<dd", _read_exact(fh, 16))
            kind = _unpack_str(fh)
            source_id = _unpack_str(fh)
            (n,) = struct.unpack("<Q", _read_exact(fh, 8))
            values = np.frombuffer(_read_exact(fh, 4 * n), dtype="<f4")
            return FeatureSeries(values, rate, kind, source_id,
                                 edge_seconds=edge)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def write_kernel(path, k: TRFKernel) -> None:
    with atomic_write(path) as fh:
        fh.write(MAGIC_KERNEL)
        width = k.basis.width if k.basis is not None else float("nan")
        fh.write(struct.pack("<Idddd", VERSION, k.grid.rate, k.grid.t_min,
                             k.grid.t_max, width))
        fh.write(_pack_str(k.direction))
        labels = k.labels or ()
        fh.write(struct.pack("<II", k.n_channels, len(labels)))
        for label in labels:
            fh.write(_pack_str(label))
        fh.write(k.h.astype("<f8").tobytes(order="C"))
        has_weights = k.weights is not None
        fh.write(struct.pack("<B", int(has_weights)))
        if has_weights:
            fh.write(struct.pack("<I", k.weights.shape[1]))
            fh.write(k.weights.astype("<f8").tobytes(order="C"))


def read_kernel(path) -> TRFKernel:
    try:
        with open(path, "rb") as fh:
            _check_magic(fh, MAGIC_KERNEL, path)
            rate, t_min, t_max, width = struct.unpack(
                "<dddd", _read_exact(fh, 32)
            )
            direction = _unpack_str(fh)
            n_ch, n_labels = struct.unpack("<II", _read_exact(fh, 8))
            labels = tuple(_unpack_str(fh) for _ in range(n_labels)) or None
            grid = LagGrid(t_min, t_max, rate)
            h = np.frombuffer(
                _read_exact(fh, 8 * n_ch * grid.n_lags), dtype="<f8"
            ).reshape(n_ch, grid.n_lags)
            (has_weights,) = struct.unpack("<B", _read_exact(fh, 1))
            weights = basis = None
            if has_weights:
                (n_p,) = struct.unpack("<I", _read_exact(fh, 4))
                weights = np.frombuffer(
                    _read_exact(fh, 8 * n_ch * n_p), dtype="<f8"
                ).reshape(n_ch, n_p)
                basis = make_basis(grid, width) if np.isfinite(width) else None
            return TRFKernel(h, grid, direction, weights=weights, basis=basis,
                             labels=labels)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc


def read_timeseries_csv(path, rate: float) -> TimeSeries:
    """CSV import: first row holds channel labels, rows are samples."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                labels = tuple(cell.strip() for cell in next(reader))
            except StopIteration:
                raise IoError(f"{path}: empty CSV") from None
            rows = [[float(cell) for cell in row] for row in reader if row]
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise IoError(f"{path}: {exc}") from exc
    if not rows:
        raise IoError(f"{path}: CSV holds no samples")
    if any(len(row) != len(labels) for row in rows):
        raise IoError(f"{path}: rows disagree with the header on column count")
    return TimeSeries(np.asarray(rows, dtype=np.float64).T, rate, labels)


def write_csv(path, header, rows) -> None:
    """Deterministic CSV: repr for floats, str otherwise, newline-terminated."""

    def cell(v):
        return repr(v) if isinstance(v, float) else str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    with atomic_write(path) as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))


def write_json(path, obj) -> None:
    with atomic_write(path) as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"{path}: invalid JSON ({exc})") from exc


def write_bundle(out_dir, trials, meta: dict | None = None) -> Path:
    """Trial bundle: one EEG and two feature containers per trial + manifest."""
    out_dir = Path(out_dir)
    entries = []
    for trial in trials:
        stem = f"{trial.subject_id}_{trial.trial_id}"
        eeg_name = f"{stem}_eeg.ctts"
        att_name = f"{stem}_attended.ctfs"
        ign_name = f"{stem}_ignored.ctfs"
        write_timeseries(out_dir / eeg_name, trial.eeg)
        write_feature(out_dir / att_name, trial.attended)
        write_feature(out_dir / ign_name, trial.ignored)
        entries.append({
            "subject_id": trial.subject_id,
            "trial_id": trial.trial_id,
            "condition": trial.condition,
            "schedule": None if trial.schedule is None else
                        {"t1": trial.schedule.t1, "t2": trial.schedule.t2},
            "eeg": eeg_name,
            "attended": att_name,
            "ignored": ign_name,
        })
    manifest = {"trials": entries, "meta": meta or {}}
    write_json(out_dir / "manifest.json", manifest)
    return out_dir / "manifest.json"


def read_bundle(bundle_dir) -> list[TrialRecord]:
    from .synth import SwitchSchedule

    bundle_dir = Path(bundle_dir)
    manifest = read_json(bundle_dir / "manifest.json")
    trials = []
    for entry in manifest["trials"]:
        schedule = entry.get("schedule")
        trials.append(TrialRecord(
            eeg=read_timeseries(bundle_dir / entry["eeg"]),
            attended=read_feature(bundle_dir / entry["attended"]),
            ignored=read_feature(bundle_dir / entry["ignored"]),
            condition=entry["condition"],
            schedule=None if schedule is None else
                     SwitchSchedule(schedule["t1"], schedule["t2"]),
            subject_id=entry["subject_id"],
            trial_id=entry["trial_id"],
        ))
    return trials
