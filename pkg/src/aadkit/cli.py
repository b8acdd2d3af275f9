"""Batch front end: configuration-driven commands chaining the analysis modules.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import dataclasses
import functools
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .eeg_prep import preprocess_eeg
from .errors import (
    ConfigError,
    IoError,
    MonoRequired,
    NoInputs,
    ToolkitError,
    WindowTooLong,
)
from .evaluation import (
    classify_trial_windows,
    cross_condition,
    loo_models,
    optimal_lag_scan,
    _fold_correlations,
    _trimmed,
)
from .io import (
    read_bundle,
    read_kernel,
    read_timeseries,
    read_timeseries_csv,
    write_bundle,
    write_csv,
    write_feature,
    write_json,
    write_kernel,
    write_timeseries,
)
from .signal_core import TimeSeries
from .stats import gaussian_smooth_trf, tfce_ttest
from .stim_features import envelope, gammatone_spectrogram, onsets, prepare_feature
from .synth import simulate_dataset
from .trf import LagGrid, fit_boosting, make_basis


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, NoInputs) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except (ToolkitError, OSError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _load(ctx, require_inputs=False, inputs=None) -> RunConfig:
    overrides = dict(ctx.obj["overrides"])
    if inputs:
        overrides["inputs"] = [str(p) for p in inputs]
    if overrides.get("seed") is not None:
        overrides["sim"] = {"seed": overrides["seed"]}
    return load_config(ctx.obj["config"], overrides,
                       require_inputs=require_inputs)


def _provenance(cfg: RunConfig, command: str, out_dir: Path) -> None:
    write_json(out_dir / "run.json", {
        "command": command,
        "package_version": __version__,
        "config": cfg.raw,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
    })


def _grid(cfg: RunConfig, rate: float) -> LagGrid:
    t_min, t_max = cfg.lag_span
    return LagGrid(t_min, t_max, rate)


def _by_subject(trials) -> dict[str, list]:
    groups: dict[str, list] = {}
    for t in trials:
        groups.setdefault(t.subject_id, []).append(t)
    return groups


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML run configuration.")
@click.option("--seed", type=int, default=None, help="Override the seed.")
@click.option("--jobs", type=int, default=None,
              help="Worker pool size for independent work items.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory.")
@click.pass_context
def main(ctx, config_path, seed, jobs, out):
    """Offline neural speech-tracking analyses."""
    ctx.obj = {
        "config": config_path,
        "overrides": {"seed": seed, "jobs": jobs, "out": out},
    }


@main.command()
@click.pass_context
@_guard
def simulate(ctx):
    """Generate a synthetic trial bundle from the sim config."""
    cfg = _load(ctx)
    trials = simulate_dataset(cfg.sim(), condition=cfg.sim_condition,
                              n_channels=cfg.sim_n_channels)
    out_dir = cfg.out
    write_bundle(out_dir, trials, meta={
        "command": "simulate",
        "config_sha256": cfg.sha256(),
        "seed": cfg.sim().seed,
        "rate": cfg.sim().rate,
        # Geometry of the recording setup, carried as metadata only.
        "loudspeaker_azimuth_deg": {"theta1": 30.0, "theta2": 90.0},
    })
    _provenance(cfg, "simulate", out_dir)
    click.echo(f"wrote {len(trials)} trials to {out_dir}")


def _load_audio(path: Path) -> TimeSeries:
    from scipy.io import wavfile

    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise IoError(f"{path}: {exc}") from exc
    data = np.asarray(data)
    if data.ndim != 1:
        raise MonoRequired(f"{path}: expected mono audio, got shape {data.shape}")
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.float64) / np.iinfo(data.dtype).max
    return TimeSeries(data[np.newaxis], float(rate), ("audio",))


@main.command()
@click.argument("audio_files", nargs=-1, type=click.Path())
@click.pass_context
@_guard
def features(ctx, audio_files):
    """Envelope and onset features for each WAV input."""
    cfg = _load(ctx, require_inputs=True, inputs=audio_files)
    out_dir = cfg.out
    entries = []
    for path in cfg.inputs:
        audio = _load_audio(path)
        spec = gammatone_spectrogram(audio)
        stem = path.stem
        files = {}
        for feat in (envelope(spec, source_id=stem),
                     onsets(spec, source_id=stem)):
            prepared = prepare_feature(feat)
            name = f"{stem}_{feat.kind}.ctfs"
            write_feature(out_dir / name, prepared)
            files[feat.kind] = name
        entries.append({"input": str(path), "files": files})
    write_json(out_dir / "features.json", {"features": entries})
    _provenance(cfg, "features", out_dir)
    click.echo(f"extracted features for {len(entries)} files into {out_dir}")


@main.command()
@click.argument("recordings", nargs=-1, type=click.Path())
@click.option("--rate", type=float, default=None,
              help="Sampling rate for CSV inputs.")
@click.pass_context
@_guard
def preprocess(ctx, recordings, rate):
    """EEG-branch preprocessing; emits scalp and grid containers."""
    cfg = _load(ctx, require_inputs=True, inputs=recordings)
    out_dir = cfg.out
    for path in cfg.inputs:
        if path.suffix.lower() == ".csv":
            if rate is None:
                raise ConfigError(f"{path}: CSV input needs --rate")
            eeg = read_timeseries_csv(path, rate)
        else:
            eeg = read_timeseries(path)
        scalp, grid = preprocess_eeg(eeg, cfg.montage(), cfg.prep())
        write_timeseries(out_dir / f"{path.stem}_scalp.ctts", scalp)
        write_timeseries(out_dir / f"{path.stem}_grid.ctts", grid)
    _provenance(cfg, "preprocess", out_dir)
    click.echo(f"preprocessed {len(cfg.inputs)} recordings into {out_dir}")


def _fit_subject_kernel(trials, stream: str, direction: str, grid: LagGrid,
                        cfg: RunConfig):
    """One model per subject: all trials, last one held out for validation."""
    parts = [_trimmed(t) for t in trials]
    feats = [p[1] if stream == "attended" else p[2] for p in parts]
    eegs = [p[0] for p in parts]
    inputs, targets = (feats, eegs) if direction == "forward" else (eegs, feats)
    boost = dataclasses.replace(cfg.boost(),
                                validation_segments=(len(trials) - 1,),
                                validation_fraction=None)
    return fit_boosting(inputs, targets, grid, make_basis(grid), boost)


@main.command()
@click.argument("bundle", type=click.Path())
@click.option("--stream", type=click.Choice(["attended", "ignored", "both"]),
              default="both", show_default=True)
@click.pass_context
@_guard
def fit(ctx, bundle, stream):
    """Per-subject TRF models for a trial bundle."""
    cfg = _load(ctx, require_inputs=True, inputs=[bundle])
    trials = read_bundle(cfg.inputs[0])
    out_dir = cfg.out
    direction = cfg.direction
    grid = _grid(cfg, trials[0].rate)
    streams = ("attended", "ignored") if stream == "both" else (stream,)
    rows = []
    for subject, subj_trials in sorted(_by_subject(trials).items()):
        for s in streams:
            kernel = _fit_subject_kernel(subj_trials, s, direction, grid, cfg)
            name = f"{subject}_{s}_{direction}.ctrf"
            write_kernel(out_dir / "kernels" / name, kernel)
            rows.append((subject, s, direction, kernel.fit.n_steps,
                         kernel.fit.stop_reason,
                         kernel.fit.val_mae[kernel.fit.best_step]))
    write_csv(out_dir / "fit_summary.csv",
              ("subject", "stream", "direction", "n_steps", "stop_reason",
               "best_val_mae"), rows)
    _provenance(cfg, "fit", out_dir)
    click.echo(f"fitted {len(rows)} models into {out_dir}")


@main.command("scan-lags")
@click.argument("bundle", type=click.Path())
@click.pass_context
@_guard
def scan_lags(ctx, bundle):
    """Sliding lag-window correlation curves per subject."""
    cfg = _load(ctx, require_inputs=True, inputs=[bundle])
    trials = read_bundle(cfg.inputs[0])
    out_dir = cfg.out
    scan = cfg.scan
    rows = []
    for subject, subj_trials in sorted(_by_subject(trials).items()):
        curve = optimal_lag_scan(
            subj_trials, direction=cfg.direction,
            electrode_set=cfg.electrodes, fit_cfg=cfg.boost(),
            t_min_ms=scan["t_min_ms"], t_max_ms=scan["t_max_ms"],
            window_ms=scan["window_ms"], step_ms=scan["step_ms"],
        )
        for i in range(curve.n_windows):
            rows.append((subject, float(curve.window_centers[i]),
                         float(curve.r_attended[i]), float(curve.ci_attended[i]),
                         float(curve.r_ignored[i]), float(curve.ci_ignored[i])))
    write_csv(out_dir / "scan.csv",
              ("subject", "window_center_s", "r_attended", "ci_attended",
               "r_ignored", "ci_ignored"), rows)
    _provenance(cfg, "scan-lags", out_dir)
    click.echo(f"wrote lag scans for {len(_by_subject(trials))} subjects")


def _classify_subject(subj_trials, windows, grid, boost, seed):
    """(rows, skips): pooled decisions per window length for one subject."""
    models = loo_models(subj_trials, "backward", grid, boost)
    rows, skips = [], []
    condition = subj_trials[0].condition
    subject = subj_trials[0].subject_id
    for window in windows:
        n_win = n_cor = 0
        try:
            for fold, trial in enumerate(subj_trials):
                decisions = classify_trial_windows(
                    models[fold], trial, window, coin_key=(seed, fold))
                n_win += len(decisions)
                n_cor += sum(d.correct for d in decisions)
            if n_win == 0:
                raise WindowTooLong(
                    f"no segment can hold a {window}s window")
        except WindowTooLong as exc:
            skips.append((subject, condition, window, str(exc)))
            continue
        rows.append((subject, condition, window, n_win, n_cor, n_cor / n_win))
    return rows, skips


@main.command()
@click.argument("bundle", type=click.Path())
@click.pass_context
@_guard
def classify(ctx, bundle):
    """Attended-vs-ignored classification over the decision-window grid."""
    cfg = _load(ctx, require_inputs=True, inputs=[bundle])
    trials = read_bundle(cfg.inputs[0])
    out_dir = cfg.out
    grid = _grid(cfg, trials[0].rate)
    groups = sorted(_by_subject(trials).items())
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(_classify_subject, g, cfg.windows, grid,
                               cfg.boost(), cfg.seed) for _, g in groups]
        results = [f.result() for f in futures]
    rows, skips = [], []
    for r, s in results:
        rows.extend(r)
        skips.extend(s)
    for subject, condition, window, reason in skips:
        click.echo(f"skipping {window}s window for {subject} "
                   f"({condition}): {reason}")
    write_csv(out_dir / "classification.csv",
              ("subject", "condition", "window_s", "n_windows", "n_correct",
               "accuracy"), rows)
    _provenance(cfg, "classify", out_dir)
    click.echo(f"wrote {len(rows)} classification rows to {out_dir}")


@main.command("cross-classify")
@click.argument("train_bundle", type=click.Path())
@click.argument("test_bundle", type=click.Path())
@click.pass_context
@_guard
def cross_classify(ctx, train_bundle, test_bundle):
    """Classify one condition's trials with models fitted on another's."""
    cfg = _load(ctx, require_inputs=True, inputs=[train_bundle, test_bundle])
    train = _by_subject(read_bundle(cfg.inputs[0]))
    test = _by_subject(read_bundle(cfg.inputs[1]))
    out_dir = cfg.out
    rows = []
    common = sorted(set(train) & set(test))
    if not common:
        raise NoInputs("train and test bundles share no subjects")
    rate = next(iter(train.values()))[0].rate
    grid = _grid(cfg, rate)
    for subject in common:
        for window in cfg.windows:
            try:
                res = cross_condition(train[subject], test[subject], window,
                                      fit_cfg=cfg.boost(), grid=grid,
                                      seed=cfg.seed)
            except WindowTooLong as exc:
                click.echo(f"skipping {window}s window for {subject}: {exc}")
                continue
            rows.append((subject, train[subject][0].condition,
                         test[subject][0].condition, window, res.n_windows,
                         res.n_correct, res.accuracy))
    write_csv(out_dir / "cross_classification.csv",
              ("subject", "train_condition", "test_condition", "window_s",
               "n_windows", "n_correct", "accuracy"), rows)
    _provenance(cfg, "cross-classify", out_dir)
    click.echo(f"wrote {len(rows)} cross-classification rows to {out_dir}")


def _stats_outputs(out_dir, group_a, group_b, cfg: RunConfig):
    stats_cfg = cfg.stats
    smooth = [gaussian_smooth_trf(k, stats_cfg["smooth_width"])
              for k in group_a]
    smooth_b = [gaussian_smooth_trf(k, stats_cfg["smooth_width"])
                for k in group_b]
    result = tfce_ttest(smooth, smooth_b, n_perm=stats_cfg["n_perm"],
                        seed=cfg.seed)
    write_json(out_dir / "stats.json", {
        "clusters_s": [list(c) for c in result.significant_clusters],
        "p_min": float(result.p_map.min()),
        "n_perm": stats_cfg["n_perm"],
        "alpha": stats_cfg["alpha"],
    })
    times = result.grid.times
    write_csv(out_dir / "stats_maps.csv",
              ("lag_s", "t", "tfce", "p"),
              [(float(times[i]), float(result.t_map[i]),
                float(result.tfce_map[i]), float(result.p_map[i]))
               for i in range(times.size)])
    return result


@main.command()
@click.argument("group_a_dir", type=click.Path())
@click.argument("group_b_dir", type=click.Path())
@click.pass_context
@_guard
def stats(ctx, group_a_dir, group_b_dir):
    """TFCE permutation test between two directories of kernel files."""
    cfg = _load(ctx, require_inputs=True, inputs=[group_a_dir, group_b_dir])
    groups = []
    for d in cfg.inputs:
        paths = sorted(Path(d).glob("*.ctrf"))
        if not paths:
            raise NoInputs(f"no .ctrf kernels under {d}")
        groups.append([read_kernel(p) for p in paths])
    out_dir = cfg.out
    result = _stats_outputs(out_dir, groups[0], groups[1], cfg)
    _provenance(cfg, "stats", out_dir)
    click.echo(f"{len(result.significant_clusters)} significant clusters; "
               f"maps written to {out_dir}")


def _pipeline_subject(subj_trials, cfg: RunConfig, grid: LagGrid):
    """All per-subject artifacts for one condition."""
    boost = cfg.boost()
    subject = subj_trials[0].subject_id
    models = loo_models(subj_trials, "backward", grid, boost)
    corr_rows = []
    for fold, trial in enumerate(subj_trials):
        r_att, r_ign = _fold_correlations(models[fold], trial, "backward")
        corr_rows.append((subject, trial.condition, trial.trial_id,
                          r_att, r_ign, cfg.electrodes,
                          trial.attended.kind))
    cls_rows, skips = [], []
    condition = subj_trials[0].condition
    for window in cfg.windows:
        n_win = n_cor = 0
        for fold, trial in enumerate(subj_trials):
            try:
                decisions = classify_trial_windows(
                    models[fold], trial, window, coin_key=(cfg.seed, fold))
            except WindowTooLong as exc:
                skips.append((subject, condition, window, str(exc)))
                n_win = 0
                break
            n_win += len(decisions)
            n_cor += sum(d.correct for d in decisions)
        if n_win == 0:
            if not any(s[2] == window for s in skips):
                skips.append((subject, condition, window,
                              f"no segment can hold a {window}s window"))
            continue
        cls_rows.append((subject, condition, window, n_win, n_cor,
                         n_cor / n_win))
    scan_cfg = cfg.scan
    curve = optimal_lag_scan(
        subj_trials, direction="backward", electrode_set=cfg.electrodes,
        fit_cfg=boost, t_min_ms=scan_cfg["t_min_ms"],
        t_max_ms=scan_cfg["t_max_ms"], window_ms=scan_cfg["window_ms"],
        step_ms=scan_cfg["step_ms"],
    )
    scan_rows = [(subject, condition, float(curve.window_centers[i]),
                  float(curve.r_attended[i]), float(curve.ci_attended[i]),
                  float(curve.r_ignored[i]), float(curve.ci_ignored[i]))
                 for i in range(curve.n_windows)]
    k_att = _fit_subject_kernel(subj_trials, "attended", "forward", grid, cfg)
    k_ign = _fit_subject_kernel(subj_trials, "ignored", "forward", grid, cfg)
    return corr_rows, cls_rows, skips, scan_rows, (k_att, k_ign)


@main.command()
@click.argument("bundle", type=click.Path())
@click.pass_context
@_guard
def pipeline(ctx, bundle):
    """Full analysis: correlations, lag scans, classification, statistics."""
    cfg = _load(ctx, require_inputs=True, inputs=[bundle])
    trials = read_bundle(cfg.inputs[0])
    out_root = cfg.out
    by_condition: dict[str, list] = {}
    for t in trials:
        by_condition.setdefault(t.condition, []).append(t)
    for condition, cond_trials in sorted(by_condition.items()):
        out_dir = out_root / condition
        grid = _grid(cfg, cond_trials[0].rate)
        groups = sorted(_by_subject(cond_trials).items())
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_pipeline_subject, g, cfg, grid)
                       for _, g in groups]
            results = [f.result() for f in futures]
        corr_rows, cls_rows, scan_rows = [], [], []
        kernels_att, kernels_ign = [], []
        for corr, cls, skips, scan, (k_att, k_ign) in results:
            corr_rows.extend(corr)
            cls_rows.extend(cls)
            scan_rows.extend(scan)
            kernels_att.append(k_att)
            kernels_ign.append(k_ign)
            for subject, cond, window, reason in skips:
                click.echo(f"skipping {window}s window for {subject} "
                           f"({cond}): {reason}")
        write_csv(out_dir / "correlations.csv",
                  ("subject", "condition", "trial", "r_attended", "r_ignored",
                   "electrodes", "feature"), corr_rows)
        write_csv(out_dir / "classification.csv",
                  ("subject", "condition", "window_s", "n_windows",
                   "n_correct", "accuracy"), cls_rows)
        write_csv(out_dir / "scan.csv",
                  ("subject", "condition", "window_center_s", "r_attended",
                   "ci_attended", "r_ignored", "ci_ignored"), scan_rows)
        _stats_outputs(out_dir, kernels_att, kernels_ign, cfg)
        _provenance(cfg, "pipeline", out_dir)
        click.echo(f"{condition}: artifacts written to {out_dir}")
    _provenance(cfg, "pipeline", out_root)
