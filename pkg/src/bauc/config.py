"""Experiment configuration files (JSON) and their expansion into scenarios."""
from __future__ import annotations

import itertools
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bayes import GaussianPopulation
from .classifiers import LogRegConfig
from .data import load_csv
from .harness import ESTIMATORS, KINDS, ScenarioConfig, holdout_scenario, resolve_scenario


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _int_or_list(minimum):
    return {
        "oneOf": [
            {"type": "integer", "minimum": minimum},
            {"type": "array", "items": {"type": "integer", "minimum": minimum}, "minItems": 1},
        ]
    }


def _num_or_list():
    return {
        "oneOf": [
            {"type": "number"},
            {"type": "array", "items": {"type": "number"}, "minItems": 1},
        ]
    }


_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_COMMON = {
    "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "replications": {"type": "integer", "minimum": 1},
    "estimators": {
        "type": "array", "items": {"enum": list(ESTIMATORS)}, "minItems": 1, "uniqueItems": True,
    },
    "trainer": {
        "type": "object",
        "properties": {
            "lambda": {"type": "number", "minimum": 0},
            "max_iters": {"type": "integer", "minimum": 1},
            "tol": {"type": "number", "exclusiveMinimum": 0},
        },
        "additionalProperties": False,
    },
    "cv_folds": {"type": "integer", "minimum": 2},
    "ebauc_grid": {"type": "integer", "minimum": 3},
    "timing": {"type": "boolean"},
}

SCHEMA = {
    "type": "object",
    "properties": {
        **_COMMON,
        "workers": {"type": "integer", "minimum": 1},
        "scenarios": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    **_COMMON,
                    "kind": {"enum": list(KINDS)},
                    "P": _int_or_list(1),
                    "n_per_class": _int_or_list(1),
                    "n1": {"type": "integer", "minimum": 1},
                    "n2": {"type": "integer", "minimum": 1},
                    "n_total": {"type": "integer", "minimum": 2},
                    "ratio": _num_or_list(),
                    "target": _num_or_list(),
                    "train_fraction": _num_or_list(),
                    "population": {
                        "type": "object",
                        "properties": {"mu1": _VECTOR, "mu2": _VECTOR, "sigma1": _MATRIX, "sigma2": _MATRIX},
                        "required": ["mu1", "mu2", "sigma1", "sigma2"],
                        "additionalProperties": False,
                    },
                    "dataset": {
                        "type": "object",
                        "properties": {
                            "path": {"type": "string"},
                            "label": {"type": ["string", "integer"]},
                            "positive": {"type": "string"},
                        },
                        "required": ["path", "label", "positive"],
                        "additionalProperties": False,
                    },
                },
                "required": ["kind"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["scenarios"],
    "additionalProperties": False,
}

_SWEEP_KEYS = ("P", "n_per_class", "ratio", "target", "train_fraction")


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def bundled_config(name: str) -> Path | None:
    ref = resources.files("bauc") / "configs" / name
    return Path(str(ref)) if ref.is_file() else None


def load_experiment(path) -> tuple[list[ScenarioConfig], dict]:
    """Parse and validate a config file; returns the scenario sweep and top-level options."""
    path = Path(path)
    if not path.exists():
        bundled = bundled_config(path.name)
        if bundled is None:
            raise ConfigError("$", f"config file {path} not found")
        path = bundled
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_experiment(doc, base_dir=path.parent), doc


def parse_experiment(doc: dict, base_dir=Path(".")) -> list[ScenarioConfig]:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_json_path(err.absolute_path), err.message)
    top = {k: doc[k] for k in _COMMON if k in doc}
    configs = []
    for i, entry in enumerate(doc["scenarios"]):
        where = f"$.scenarios[{i}]"
        merged = {**top, **entry}
        options = _options(merged)
        sweep = {k: merged[k] if isinstance(merged[k], list) else [merged[k]]
                 for k in _SWEEP_KEYS if k in merged}
        fixed = {k: merged[k] for k in ("n1", "n2", "n_total") if k in merged}
        kind = merged["kind"]
        keys = list(sweep)
        for combo in itertools.product(*(sweep[k] for k in keys)):
            params = dict(zip(keys, combo))
            try:
                if kind == "holdout":
                    configs.append(_holdout(merged, params, options, base_dir, where))
                    continue
                if kind == "custom":
                    if "population" not in merged:
                        raise ConfigError(where, "custom scenario needs 'population'")
                    params["population"] = _population(merged["population"], where)
                configs.append(resolve_scenario(kind, **fixed, **params, **options))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(where, str(exc)) from None
    return configs


def _options(merged: dict) -> dict:
    opts = {}
    if "master_seed" in merged:
        opts["master_seed"] = merged["master_seed"]
    if "replications" in merged:
        opts["replications"] = merged["replications"]
    if "estimators" in merged:
        opts["estimators"] = tuple(e for e in ESTIMATORS if e in merged["estimators"])
    if "trainer" in merged:
        t = merged["trainer"]
        opts["trainer"] = LogRegConfig(
            lam=t.get("lambda", 1.0), max_iters=t.get("max_iters", 100), tol=t.get("tol", 1e-8)
        )
    if "cv_folds" in merged:
        opts["cv_folds"] = merged["cv_folds"]
    if "ebauc_grid" in merged:
        opts["ebauc_grid"] = merged["ebauc_grid"]
    if "timing" in merged:
        opts["record_timing"] = merged["timing"]
    return opts


def _population(entry: dict, where: str) -> GaussianPopulation:
    try:
        return GaussianPopulation(
            np.array(entry["mu1"]), np.array(entry["mu2"]), np.array(entry["sigma1"]), np.array(entry["sigma2"])
        )
    except ValueError as exc:
        raise ConfigError(where + ".population", str(exc)) from None


def _holdout(merged, params, options, base_dir, where) -> ScenarioConfig:
    if "dataset" not in merged or "train_fraction" not in params:
        raise ConfigError(where, "holdout scenario needs 'dataset' and 'train_fraction'")
    ds = merged["dataset"]
    path = Path(ds["path"])
    if not path.is_absolute():
        path = base_dir / path
    try:
        data = load_csv(path, ds["label"], ds["positive"])
    except (OSError, ValueError) as exc:
        raise ConfigError(where + ".dataset", str(exc)) from None
    return holdout_scenario(data, params["train_fraction"], **options)
