"""Scenario configuration files: JSON schema, validation and object builders."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import background as bg
from .asymptotics import MeasurementPlan
from .grid import FieldGrid
from .scenario import (DEFAULT_CLASS_THRESHOLD, Medium, ParticleClass, ParticleKind, ParticleSpec,
                       ReferenceBody, Scenario)
from .surface_potentials import icosphere, read_off

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_rule = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["value", "power"]},
        "value": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
    },
}
_grid = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dims", "spacing"],
    "properties": {
        "dims": {"type": "integer", "minimum": 3},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "center": _vec3,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["medium"],
    "properties": {
        "medium": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega"],
            "properties": {
                "omega": {"type": "number", "exclusiveMinimum": 0},
                "mu0": {"type": "number", "exclusiveMinimum": 0},
                "eps0_exterior": {"type": "number", "exclusiveMinimum": 0},
                "eps0_profile": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["constant", "gaussian", "file"]},
                        "params": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "amplitude": {"type": "number"},
                                "width": {"type": "number", "exclusiveMinimum": 0},
                                "cutoff": {"type": "number", "exclusiveMinimum": 0},
                                "path": {"type": "string"},
                            },
                        },
                    },
                },
            },
        },
        "particle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["delta"],
            "properties": {
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "alpha": {"type": "number", "minimum": 0},
                "class": {"enum": ["auto", "electric", "magnetic", "moderate"]},
                "class_threshold": {"type": "number", "exclusiveMinimum": 1},
                "eps1_rule": _rule,
                "mu1_rule": _rule,
                "body": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["unit_ball", "mesh", "icosphere"]},
                        "path": {"type": "string"},
                        "level": {"type": "integer", "minimum": 0, "maximum": 5},
                    },
                },
            },
        },
        "grid": _grid,
        "measurements": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": _vec3,
                "z": _vec3,
                "xhat": _vec3,
                "z_grid": _grid,
                "near_points": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "radius_rule": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "c": {"type": "number", "exclusiveMinimum": 0},
                                "factors": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                            "minItems": 1, "maxItems": 2},
                            },
                        },
                        "directions": {"type": "array", "items": _vec3, "minItems": 3},
                    },
                },
            },
        },
        "synthesis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["AsymptoticLeading", "AsymptoticWithRemainder", "MieExact"]},
                "noise": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pipeline": {"enum": ["electric", "magnetic"]},
                "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "contrast": {"enum": ["exact", "leading"]},
                "dataset": {"type": "string"},
                "outputs": {"type": "array", "items": {"type": "string"}},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alphas"],
            "properties": {
                "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "delta_start": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "delta_count": {"type": "integer", "minimum": 3},
                "directions": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending key, dotted."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _error_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    elif err.validator == "additionalProperties":
        extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
        if extra:
            parts.append(extra[0])
    return ".".join(parts)


def validate(doc: dict) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_error_path(err), err.message)
    return doc


def load(path: str | Path) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"not valid JSON: {exc}") from exc
    return validate(doc)


def bundled(name: str) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("nanoimaging") / "data" / name))


# -- builders ---------------------------------------------------------------------

def _resolve(path: str, base: Path | None) -> Path:
    p = Path(path)
    if p.is_absolute() or base is None:
        return p
    return base / p


def build_medium(cfg: dict, base: Path | None = None) -> Medium:
    m = cfg["medium"]
    omega, mu0, ext = m["omega"], m.get("mu0", 1.0), m.get("eps0_exterior", 1.0)
    prof = m.get("eps0_profile", {"kind": "constant"})
    if prof["kind"] == "constant":
        return Medium(omega, mu0, ext)
    params = prof.get("params", {})
    if prof["kind"] == "file":
        if "path" not in params:
            raise ConfigError("medium.eps0_profile.params.path", "required for a file profile")
        field = FieldGrid.from_csv(_resolve(params["path"], base))
        return Medium(omega, mu0, ext, field.with_values(np.real(field.values)))
    if "grid" not in cfg:
        raise ConfigError("grid", "a gaussian profile needs a grid section")
    g = cfg["grid"]
    field = bg.gaussian_bump(g["dims"], g["spacing"], params.get("amplitude", 0.2),
                             params.get("width", 0.12), ext, params.get("cutoff", 1e-6))
    return Medium(omega, mu0, ext, field)


def _body(pcfg: dict, base: Path | None) -> ReferenceBody:
    b = pcfg.get("body", {"kind": "unit_ball"})
    if b["kind"] == "unit_ball":
        return ReferenceBody.unit_ball()
    mesh = read_off(_resolve(b["path"], base)) if b["kind"] == "mesh" else icosphere(b.get("level", 3))
    return ReferenceBody.from_mesh(mesh.quadrature())


def _apply_rule(rule: dict | None, reference: float, delta: float, alpha: float) -> float:
    if rule is None:
        return reference
    if rule["kind"] == "value":
        return rule.get("value", reference)
    return reference * rule.get("scale", 1.0) * delta ** (-alpha)


def build_particle(cfg: dict, medium: Medium, base: Path | None = None, delta: float | None = None,
                   alpha: float | None = None) -> tuple[ParticleSpec, ParticleClass | None]:
    p = cfg.get("particle")
    if p is None:
        raise ConfigError("particle", "this command needs a particle section")
    delta = p["delta"] if delta is None else delta
    alpha = p.get("alpha", 0.0) if alpha is None else alpha
    eps1 = _apply_rule(p.get("eps1_rule"), medium.eps0_exterior, delta, alpha)
    mu1 = _apply_rule(p.get("mu1_rule"), medium.mu0, delta, alpha)
    z = cfg.get("measurements", {}).get("z", [0.0, 0.0, 0.0])
    spec = ParticleSpec(delta, z, eps1, mu1, _body(p, base))
    kind = p.get("class", "auto")
    declared = None
    if kind != "auto":
        k = ParticleKind(kind)
        beta = alpha if k is ParticleKind.MAGNETIC else 0.0
        declared = ParticleClass(k, alpha if k is not ParticleKind.MODERATE else 0.0,
                                 beta if k is not ParticleKind.MODERATE else 0.0)
    return spec, declared


def build_scenario(cfg: dict, base: Path | None = None) -> Scenario:
    medium = build_medium(cfg, base)
    spec, declared = build_particle(cfg, medium, base)
    d = cfg.get("measurements", {}).get("d", [0.0, 0.0, 1.0])
    thr = cfg.get("particle", {}).get("class_threshold", DEFAULT_CLASS_THRESHOLD)
    return Scenario(medium, spec, np.asarray(d, float), thr, declared)


def build_z_grid(cfg: dict, medium: Medium) -> FieldGrid:
    zg = cfg.get("measurements", {}).get("z_grid")
    if zg is None:
        if medium.eps0_field is None:
            raise ConfigError("measurements.z_grid", "required when the background is homogeneous")
        g = medium.eps0_field
        return g.with_values(np.zeros(g.dims))
    return FieldGrid.centered(zg["dims"], zg["spacing"], center=zg.get("center", (0.0, 0.0, 0.0)))


def build_plan(cfg: dict) -> MeasurementPlan:
    npc = cfg.get("measurements", {}).get("near_points")
    if npc is None:
        return MeasurementPlan()
    rr = npc.get("radius_rule", {})
    dirs = np.asarray(npc.get("directions", np.eye(3).tolist()), float)
    return MeasurementPlan(dirs, rr.get("c", 1.0), tuple(rr.get("factors", (1.0, 2.0))))
