"""Strict JSON (de)serialization for models, configs, and scenario files.

Every loader rejects unknown fields so a typo in a scenario document fails
loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import numpy as np

from .chain import ChainModel, Config, Environment, Plates, SimParams
from .errors import ValidationError
from .geometry import Pose
from .magnetics import Dipole, MagnetSpec
from .scenarios import calibrated_model

SCENARIO_KINDS = ("relax", "script", "landscape", "squeeze", "calibrate")


def _take(d: dict, context: str, allowed: dict):
    """Pop known keys from a dict copy, applying per-key converters; reject the rest."""
    d = dict(d)
    out = {}
    for key, convert in allowed.items():
        if key in d:
            out[key] = convert(d.pop(key))
    if d:
        raise ValidationError(f"{context}: unknown fields {sorted(d)}")
    return out


def _vec3(v):
    return np.asarray(v, dtype=float).reshape(3)


# ---------------------------------------------------------------------------
# magnets and model

def magnet_to_dict(spec: MagnetSpec) -> dict:
    return {
        "shape": spec.shape,
        "dimensions": list(spec.dimensions),
        "remanence": spec.remanence,
        "magnetization_axis": spec.magnetization_axis.tolist(),
    }


def magnet_from_dict(d: dict) -> MagnetSpec:
    kw = _take(d, "magnet", {
        "shape": str,
        "dimensions": tuple,
        "remanence": float,
        "magnetization_axis": _vec3,
    })
    return MagnetSpec(**kw)


def model_to_dict(model: ChainModel) -> dict:
    return {
        "cells": model.cells,
        "links_per_cell": model.links_per_cell,
        "link_length": model.link_length,
        "link_width": model.link_width,
        "thickness": model.thickness,
        "hinge_stiffness": np.asarray(model.hinge_stiffness).tolist(),
        "hinge_rest_angles": np.asarray(model.hinge_rest_angles).tolist(),
        "left_magnet": magnet_to_dict(model.left_magnet),
        "right_magnet": magnet_to_dict(model.right_magnet),
        "left_mount": model.left_mount.tolist(),
        "right_mount": model.right_mount.tolist(),
        "left_moment_axis": model.left_moment_axis.tolist(),
        "right_moment_axis": model.right_moment_axis.tolist(),
        "contact_distance": model.contact_distance,
        "contact_stiffness": model.contact_stiffness,
        "wall_spheres_per_link": model.wall_spheres_per_link,
        "end_magnet_subdivisions": model.end_magnet_subdivisions,
    }


def model_from_dict(d: dict) -> ChainModel:
    kw = _take(d, "model", {
        "cells": int,
        "links_per_cell": int,
        "link_length": float,
        "link_width": float,
        "thickness": float,
        "hinge_stiffness": lambda v: np.asarray(v, dtype=float) if np.ndim(v) else float(v),
        "hinge_rest_angles": lambda v: None if v is None else np.asarray(v, dtype=float),
        "left_magnet": magnet_from_dict,
        "right_magnet": magnet_from_dict,
        "left_mount": _vec3,
        "right_mount": _vec3,
        "left_moment_axis": _vec3,
        "right_moment_axis": _vec3,
        "contact_distance": float,
        "contact_stiffness": float,
        "wall_spheres_per_link": int,
        "end_magnet_subdivisions": int,
    })
    return ChainModel(**kw)


# ---------------------------------------------------------------------------
# config, params, environment

def config_to_dict(q: Config) -> dict:
    return {
        "base_pose": q.base_pose.to_dict(),
        "hinge_angles": q.hinge_angles.tolist(),
    }


def config_from_dict(d: dict) -> Config:
    kw = _take(d, "config", {
        "base_pose": Pose.from_dict,
        "hinge_angles": lambda v: np.asarray(v, dtype=float),
    })
    return Config(**kw)


_PARAM_FIELDS = (
    "timestep", "max_steps", "convergence_threshold", "min_separation",
    "mobility_translation", "mobility_rotation", "trans_fd_step",
    "rot_fd_step", "max_backtracks", "sample_interval",
)


def params_to_dict(p: SimParams) -> dict:
    return {name: getattr(p, name) for name in _PARAM_FIELDS}


def params_from_dict(d: dict) -> SimParams:
    converters = {name: (int if name in ("max_steps", "max_backtracks") else float)
                  for name in _PARAM_FIELDS}
    return SimParams(**_take(d, "params", converters))


def plates_to_dict(p: Plates) -> dict:
    return {
        "axis": p.axis.tolist(),
        "lo": p.lo,
        "hi": p.hi,
        "stiffness": p.stiffness,
        "commanded_force": p.commanded_force,
    }


def plates_from_dict(d: dict) -> Plates:
    kw = _take(d, "plates", {
        "axis": _vec3,
        "lo": float,
        "hi": float,
        "stiffness": float,
        "commanded_force": float,
    })
    return Plates(**kw)


def dipole_to_dict(d: Dipole) -> dict:
    return {"position": d.position.tolist(), "moment": d.moment.tolist()}


def dipole_from_dict(d: dict) -> Dipole:
    kw = _take(d, "dipole", {"position": _vec3, "moment": _vec3})
    return Dipole(**kw)


def environment_to_dict(env: Environment) -> dict:
    return {
        "epm": None if env.epm is None else [dipole_to_dict(d) for d in env.epm],
        "plates": None if env.plates is None else plates_to_dict(env.plates),
        "gravity": env.gravity.tolist(),
    }


def environment_from_dict(d: dict) -> Environment:
    kw = _take(d, "environment", {
        "epm": lambda v: None if v is None else [dipole_from_dict(x) for x in v],
        "plates": lambda v: None if v is None else plates_from_dict(v),
        "gravity": _vec3,
    })
    return Environment(**kw)


# ---------------------------------------------------------------------------
# scenario files

def scenario_from_dict(doc: dict) -> dict:
    """Validate a scenario document and build its runtime objects.

    Returns a dict with keys model, initial_config, environment, params,
    scenario (the kind-specific option dict, with "kind" retained).
    Presets for initial_config: flat, beta, accordion, locked.
    """
    parts = _take(doc, "scenario file", {
        "model": model_from_dict,
        "initial_config": dict,
        "environment": environment_from_dict,
        "params": params_from_dict,
        "scenario": dict,
    })
    model = parts.get("model") or calibrated_model()
    scenario = parts.get("scenario")
    if scenario is None or "kind" not in scenario:
        raise ValidationError("scenario file: a scenario section with a kind is required")
    if scenario["kind"] not in SCENARIO_KINDS:
        raise ValidationError(
            f"scenario kind must be one of {list(SCENARIO_KINDS)}, got {scenario['kind']!r}"
        )
    init = parts.get("initial_config")
    if init is not None and "preset" not in init:
        init = config_from_dict(init)
    return {
        "model": model,
        "initial_config": init,
        "environment": parts.get("environment"),
        "params": parts.get("params"),
        "scenario": scenario,
    }
