"""JSON scenario configuration: schema, validation with line numbers, conversion to scenarios and checks."""

from __future__ import annotations

import json
import json.decoder
import json.scanner
from dataclasses import dataclass
from typing import Any

import jsonschema

from .errors import ConfigurationError
from .scenario import FLOW_KINDS, RHO_PRESETS, Scenario

__all__ = ["CONFIG_SCHEMA", "ConfigError", "LoadedConfig", "load_config", "parse_config_text"]

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_TRIG = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {"k": {"type": "array", "items": {"type": "integer"}}, "cos": _NUM, "sin": _NUM},
        "required": ["k"],
        "additionalProperties": False,
    },
}
_FIELD = {
    "type": "object",
    "properties": {
        "preset": {"enum": list(RHO_PRESETS) + ["coeffs"]},
        "a": _NUM,
        "base": _NUM,
        "coeffs": _TRIG,
        "amplitude": _NUM,
        "modes": {"type": "integer", "minimum": 1},
        "u0": _POS,
        "beta0": _NUM,
        "background": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}
_COUPLING = {"anyOf": [{"type": "number", "minimum": 0}, {"enum": ["inf", "infinity", "Infinity"]}]}


def _check_ids() -> list[str]:
    from .verify import CHECKS

    return sorted(CHECKS)


def _schema() -> dict[str, Any]:
    ids = _check_ids()
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["flow"],
        "additionalProperties": False,
        "properties": {
            "geometry": {
                "type": "object",
                "properties": {
                    "dim": {"enum": [1, 2]},
                    "periods": {"type": "array", "items": _POS, "minItems": 1, "maxItems": 2},
                    "grid": {"type": "array", "items": {"type": "integer", "minimum": 16}, "minItems": 1, "maxItems": 2},
                    "f_coeffs": _TRIG,
                    "m": _POS,
                },
                "additionalProperties": False,
            },
            "flow": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(FLOW_KINDS)},
                    "c": _COUPLING,
                    "rho0": _FIELD,
                    "phi0": _FIELD,
                    "u0": {"anyOf": [
                        _POS,
                        {"type": "object", "properties": {"components": {"type": "array", "items": _TRIG}},
                         "required": ["components"], "additionalProperties": False},
                    ]},
                    "up0": _NUM,
                    "beta0": _NUM,
                    "m": {"type": "integer", "minimum": 1},
                    "t_end": _POS,
                    "dt": _POS,
                    "x0": {"type": "array", "items": _NUM, "minItems": 1},
                    "v0": {"type": "array", "items": _NUM, "minItems": 1},
                    "potential": {
                        "type": "object",
                        "properties": {
                            "A": {"type": "array", "items": {"type": "array", "items": _NUM}},
                            "b": {"type": "array", "items": _NUM},
                            "a4": {"type": "array", "items": _NUM},
                        },
                        "additionalProperties": False,
                    },
                    "solver": {
                        "type": "object",
                        "required": ["dt", "t_end"],
                        "properties": {
                            "dt": _POS,
                            "t_start": _NUM,
                            "t_end": _POS,
                            "output_stride": {"type": "integer", "minimum": 1},
                            "rho_floor": _POS,
                            "hess_ceiling": _POS,
                            "dealias": {"type": "boolean"},
                            "tail_limit": _POS,
                        },
                        "additionalProperties": False,
                    },
                },
                "additionalProperties": False,
            },
            "checks": {
                "type": "array",
                "items": {
                    "anyOf": [
                        {"enum": ids},
                        {
                            "type": "object",
                            "required": ["id"],
                            "properties": {
                                "id": {"enum": ids},
                                "params": {"type": "object"},
                                "tolerance": _POS,
                                "refine": {"type": "boolean"},
                                "label": {"type": "string"},
                            },
                            "additionalProperties": False,
                        },
                    ]
                },
            },
            "output": {"type": "string"},
            "seed": {"type": "integer"},
        },
    }


CONFIG_SCHEMA = _schema()


class ConfigError(ConfigurationError):
    """A config file failed to parse or validate; ``line`` points into the file."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = f"{path or '<config>'}:{line}" if line is not None else (path or "<config>")
        super().__init__(f"{where}: {message}")


def _located_decoder(positions: dict[int, int]) -> json.JSONDecoder:
    """A pure-Python decoder that records where every object and array starts."""
    dec = json.JSONDecoder()

    def parse_object(s_and_end, *args, **kwargs):
        obj, end = json.decoder.JSONObject(s_and_end, *args, **kwargs)
        positions[id(obj)] = s_and_end[1] - 1
        return obj, end

    def parse_array(s_and_end, scan_once, *args, **kwargs):
        arr, end = json.decoder.JSONArray(s_and_end, scan_once, *args, **kwargs)
        positions[id(arr)] = s_and_end[1] - 1
        return arr, end

    dec.parse_object = parse_object
    dec.parse_array = parse_array
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, max(pos, 0)) + 1


def _locate(text: str, root: Any, positions: dict[int, int], path) -> int:
    node, pos = root, positions.get(id(root), 0)
    for part in path:
        if isinstance(node, dict) and part in node:
            key_at = text.find(json.dumps(part), pos)
            pos = key_at if key_at >= 0 else pos
            node = node[part]
        elif isinstance(node, list) and isinstance(part, int) and part < len(node):
            # walk the earlier items so scalar elements land on their own line
            for item in node[: part + 1]:
                if isinstance(item, (dict, list)):
                    pos = positions.get(id(item), pos)
                else:
                    hit = text.find(json.dumps(item), pos + 1)
                    pos = hit if hit >= 0 else pos
            node = node[part]
        else:
            break
        if isinstance(node, (dict, list)):
            pos = positions.get(id(node), pos)
    return _line_of(text, pos)


@dataclass(frozen=True)
class LoadedConfig:
    raw: dict[str, Any]
    scenario: Scenario
    checks: list[Any]
    output: str | None


def parse_config_text(text: str, path: str | None = None, seed: int | None = None) -> LoadedConfig:
    positions: dict[int, int] = {}
    try:
        raw = _located_decoder(positions).decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, path) from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {err.message}", _locate(text, raw, positions, err.absolute_path), path)
    seed = raw.get("seed") if seed is None else seed
    for name in ("rho0", "phi0"):
        spec = raw["flow"].get(name)
        if isinstance(spec, dict) and spec.get("preset") == "random_trig" and seed is None:
            raise ConfigError(f"flow/{name}: random_trig needs a seed (config 'seed' or --seed)",
                              _locate(text, raw, positions, ["flow", name]), path)
    try:
        scenario = Scenario(raw.get("geometry", {}), raw["flow"], seed)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), _locate(text, raw, positions, ["flow"]), path) from exc
    return LoadedConfig(raw, scenario, list(raw.get("checks", [])), raw.get("output"))


def load_config(path: str, seed: int | None = None) -> LoadedConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from exc
    return parse_config_text(text, path, seed)
