"""JSON scenario files: schema, parsing, overrides and bundled presets."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .filters import Algorithm, FilterConfig
from .gain import GainParams
from .harness import ExperimentConfig, InputModel
from .signals import gen_sparse_system, paper_layout, SMOKE_LAYOUT

ALGORITHMS = [a.value for a in Algorithm]

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["algorithms"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "l": {"type": "integer", "minimum": 1},
        "layout": {"enum": ["paper", "smoke"]},
        "active_taps": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "number"}],
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "mu": {"type": "number", "exclusiveMinimum": 0},
        "rho": {"type": "number", "minimum": 0},
        "delta_p": {"type": "number", "minimum": 0},
        "rho_g": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "minimum": 0},
        "clamp_crossing": {"type": "boolean"},
        "sigma_v2": {"type": "number", "minimum": 0},
        "input": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model": {"enum": ["white", "ar1"]},
                "variance": {"type": "number", "minimum": 0},
                "pole": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
            },
        },
        "iterations": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "stride": {"type": "integer", "minimum": 1},
        "window": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "report_taps": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "algorithms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {"enum": ALGORITHMS},
                    {
                        "type": "object",
                        "required": ["algorithm"],
                        "additionalProperties": False,
                        "properties": {
                            "algorithm": {"enum": ALGORITHMS},
                            "name": {"type": "string"},
                            "mu": {"type": "number", "exclusiveMinimum": 0},
                            "rho": {"type": "number", "minimum": 0},
                            "delta_p": {"type": "number", "minimum": 0},
                            "epsilon": {"type": "number", "minimum": 0},
                        },
                    },
                ]
            },
        },
    },
}

DEFAULTS: dict = {
    "mu": 0.7,
    "rho": 1e-4,
    "delta_p": 0.01,
    "rho_g": 0.01,
    "delta": 0.001,
    "epsilon": 10.0,
    "clamp_crossing": False,
    "sigma_v2": 1e-3,
    "iterations": 25_000,
    "trials": 30,
    "seed": 0,
    "stride": 10,
    "window": 0.1,
}


class ScenarioError(ValueError):
    """Scenario failed schema or semantic validation."""


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario invalid at {where}: {exc.message}") from None
    if "layout" not in data and "active_taps" not in data:
        raise ScenarioError("scenario needs either 'layout' or 'active_taps'")
    if "active_taps" in data and "l" not in data:
        raise ScenarioError("'active_taps' requires 'l'")


def preset_names() -> list[str]:
    pkg = resources.files("sparsefilt") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str | Path) -> dict:
    """Load a scenario from a path, or by bundled preset name."""
    path = Path(ref)
    if not path.exists() and str(ref) in preset_names():
        text = (resources.files("sparsefilt") / "scenarios" / f"{ref}.json").read_text()
    else:
        text = path.read_text()  # OSError propagates to the caller
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{ref}: not valid JSON ({exc})") from None
    validate(data)
    return data


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply ``key=value`` overrides; values are parsed as JSON when possible."""
    out = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = _coerce(value.strip())
    validate(out)
    return out


def _system(data: dict):
    layout = data.get("layout")
    if layout == "paper":
        L = data.get("l", 512)
        taps = paper_layout(L)
    elif layout == "smoke":
        L = data.get("l", 64)
        taps = list(SMOKE_LAYOUT)
    else:
        L = data["l"]
        taps = [tuple(p) for p in data["active_taps"]]
    try:
        return gen_sparse_system(L, taps)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def scenario_to_config(data: dict) -> ExperimentConfig:
    validate(data)
    p = {**DEFAULTS, **data}
    gp = GainParams(p["rho_g"], p["delta"])
    filters: dict[str, FilterConfig] = {}
    for entry in data["algorithms"]:
        spec = {"algorithm": entry} if isinstance(entry, str) else dict(entry)
        alg = Algorithm.parse(spec["algorithm"])
        name = spec.get("name", alg.value)
        if name in filters:
            raise ScenarioError(f"duplicate algorithm name {name!r}; give entries distinct 'name's")
        filters[name] = FilterConfig(
            algorithm=alg,
            mu=spec.get("mu", p["mu"]),
            delta_p=spec.get("delta_p", p["delta_p"]),
            gain_params=gp,
            rho=spec.get("rho", p["rho"]),
            epsilon=spec.get("epsilon", p["epsilon"]),
            clamp_crossing=p["clamp_crossing"],
        )
    inp = data.get("input", {})
    model = InputModel(inp.get("model", "white"), inp.get("variance", 1.0), inp.get("pole", 0.0))
    return ExperimentConfig(
        system=_system(data),
        filters=filters,
        input=model,
        noise_variance=p["sigma_v2"],
        iterations=p["iterations"],
        trials=p["trials"],
        seed=p["seed"],
        stride=p["stride"],
        window=p["window"],
    )


def config_to_scenario(cfg: ExperimentConfig) -> dict:
    """Explicit scenario dict that reproduces ``cfg``."""
    first = next(iter(cfg.filters.values()))
    algs = []
    for name, f in cfg.filters.items():
        algs.append({
            "algorithm": f.algorithm.value, "name": name, "mu": f.mu,
            "rho": f.rho, "delta_p": f.delta_p, "epsilon": f.epsilon,
        })
    w = cfg.system.weights
    return {
        "l": cfg.system.length,
        "active_taps": [[int(i), float(w[i])] for i in cfg.system.active_indices],
        "mu": first.mu,
        "rho": first.rho,
        "delta_p": first.delta_p,
        "rho_g": first.gain_params.rho_g,
        "delta": first.gain_params.delta,
        "epsilon": first.epsilon,
        "clamp_crossing": first.clamp_crossing,
        "sigma_v2": cfg.noise_variance,
        "input": {"model": cfg.input.kind, "variance": cfg.input.variance, "pole": cfg.input.pole},
        "iterations": cfg.iterations,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "stride": cfg.stride,
        "window": cfg.window,
        "algorithms": algs,
    }
