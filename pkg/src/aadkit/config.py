"""Run configuration: YAML with schema validation and defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import yaml

from .eeg_prep import DEFAULT_GRID_LABELS, DEFAULT_SCALP_LABELS, MontageSplit, PrepConfig
from .errors import ConfigError
from .evaluation import DECISION_WINDOWS
from .synth import SimConfig
from .trf import BoostConfig

_BAND = {
    "type": "array",
    "items": {"type": "number", "exclusiveMinimum": 0},
    "minItems": 2,
    "maxItems": 2,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "inputs": {
            "type": "array",
            "items": {"type": "string"},
        },
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
        "feature": {"enum": ["envelope", "onset"]},
        "electrodes": {"enum": ["scalp", "grid"]},
        "direction": {"enum": ["forward", "backward"]},
        "montage": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scalp": {"type": "array", "items": {"type": "string"}},
                "grid": {"type": "array", "items": {"type": "string"}},
            },
        },
        "lags": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_min": {"type": "number"},
                "t_max": {"type": "number"},
            },
        },
        "boost": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "step_fraction": {
                    "type": "number",
                    "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1,
                },
                "patience": {"type": "integer", "minimum": 1},
                "max_iters": {"type": "integer", "minimum": 1},
                "validation_fraction": {
                    "type": ["number", "null"],
                    "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1,
                },
            },
        },
        "windows": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_min_ms": {"type": "integer"},
                "t_max_ms": {"type": "integer"},
                "window_ms": {"type": "integer", "minimum": 1},
                "step_ms": {"type": "integer", "minimum": 1},
            },
        },
        "stats": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_perm": {"type": "integer", "minimum": 100},
                "alpha": {"type": "number", "exclusiveMinimum": 0,
                          "exclusiveMaximum": 1},
                "smooth_width": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_subjects": {"type": "integer", "minimum": 1},
                "n_trials": {"type": "integer", "minimum": 1},
                "duration": {"type": "number", "exclusiveMinimum": 0},
                "rate": {"type": "number", "exclusiveMinimum": 0},
                "snr_db": {"type": "number"},
                "gains": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "noise_kind": {"enum": ["white", "one_over_f"]},
                "n_channels": {"type": "integer", "minimum": 2},
                "condition": {"enum": ["SustAC", "SwitAC", "ConvAC"]},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "prep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "notch_hz": {"type": "number", "exclusiveMinimum": 0},
                "notch_q": {"type": "number", "exclusiveMinimum": 0},
                "wide_band": _BAND,
                "narrow_band": _BAND,
                "target_rate": {"type": "number", "exclusiveMinimum": 0},
                "filter_order": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULTS = {
    "inputs": [],
    "out": "results",
    "seed": 0,
    "jobs": 1,
    "feature": "envelope",
    "electrodes": "scalp",
    "direction": "backward",
    "montage": {
        "scalp": list(DEFAULT_SCALP_LABELS),
        "grid": list(DEFAULT_GRID_LABELS),
    },
    "lags": {"t_min": 0.0, "t_max": 0.5},
    "boost": {
        "step_fraction": 0.005,
        "patience": 10,
        "max_iters": 10000,
        "validation_fraction": 0.2,
    },
    "windows": list(DECISION_WINDOWS),
    "scan": {"t_min_ms": -600, "t_max_ms": 600, "window_ms": 45, "step_ms": 15},
    "stats": {"n_perm": 1000, "alpha": 0.05, "smooth_width": 0.05},
    "sim": {
        "n_subjects": 2,
        "n_trials": 8,
        "duration": 180.0,
        "rate": 50.0,
        "snr_db": 0.0,
        "gains": [1.0, 0.5],
        "noise_kind": "one_over_f",
        "n_channels": 8,
        "condition": "SustAC",
        "seed": 0,
    },
    "prep": {
        "notch_hz": 50.0,
        "notch_q": 30.0,
        "wide_band": [0.1, 40.0],
        "narrow_band": [1.0, 20.0],
        "target_rate": 50.0,
        "filter_order": 4,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration (defaults merged with file and CLI values)."""

    raw: dict

    @property
    def inputs(self) -> tuple[Path, ...]:
        return tuple(Path(p) for p in self.raw["inputs"])

    @property
    def out(self) -> Path:
        return Path(self.raw["out"])

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def jobs(self) -> int:
        return self.raw["jobs"]

    @property
    def feature(self) -> str:
        return self.raw["feature"]

    @property
    def electrodes(self) -> str:
        return self.raw["electrodes"]

    @property
    def direction(self) -> str:
        return self.raw["direction"]

    @property
    def windows(self) -> tuple[float, ...]:
        return tuple(self.raw["windows"])

    @property
    def lag_span(self) -> tuple[float, float]:
        return self.raw["lags"]["t_min"], self.raw["lags"]["t_max"]

    @property
    def scan(self) -> dict:
        return dict(self.raw["scan"])

    @property
    def stats(self) -> dict:
        return dict(self.raw["stats"])

    def montage(self) -> MontageSplit:
        return MontageSplit(tuple(self.raw["montage"]["scalp"]),
                            tuple(self.raw["montage"]["grid"]))

    def boost(self) -> BoostConfig:
        return BoostConfig(**self.raw["boost"])

    def prep(self) -> PrepConfig:
        p = self.raw["prep"]
        return PrepConfig(
            notch_hz=p["notch_hz"], notch_q=p["notch_q"],
            wide_band=tuple(p["wide_band"]),
            narrow_band=tuple(p["narrow_band"]),
            target_rate=p["target_rate"], filter_order=p["filter_order"],
        )

    def sim(self) -> SimConfig:
        s = self.raw["sim"]
        return SimConfig(
            n_subjects=s["n_subjects"], n_trials=s["n_trials"],
            duration=s["duration"], rate=s["rate"], snr_db=s["snr_db"],
            gains=tuple(s["gains"]), noise_kind=s["noise_kind"],
            seed=s["seed"],
        )

    @property
    def sim_n_channels(self) -> int:
        return self.raw["sim"]["n_channels"]

    @property
    def sim_condition(self) -> str:
        return self.raw["sim"]["condition"]

    def sha256(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path=None, overrides: dict | None = None,
                require_inputs: bool = False) -> RunConfig:
    """Defaults, overridden by the YAML file, overridden by CLI values.

    Referenced input paths must exist at load time.
    """
    from_file: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            from_file = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError(f"config {path} must hold a mapping at top level")
    merged = _merge(DEFAULTS, from_file)
    if overrides:
        merged = _merge(merged, {k: v for k, v in overrides.items()
                                 if v is not None})
    try:
        jsonschema.validate(merged, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config field {exc.json_path}: {exc.message}") from exc
    cfg = RunConfig(merged)
    if require_inputs and not cfg.inputs:
        from .errors import NoInputs

        raise NoInputs("no input paths were given")
    for p in cfg.inputs:
        if not p.exists():
            raise ConfigError(f"input path does not exist: {p}")
    return cfg
