"""YAML run configuration.

Keys (all optional except where a run needs them)::

    case: static-circle          # manufactured case; supplies everything below
    n: 64                        # grid parameter N (2N nodes per axis)
    grids: [32, 64, 128]         # for studies
    lambda: 0.5                  # tau / h
    T: 0.25                      # final time
    L: 3.141592653589793         # half-period of the box
    jump_mode: analytic          # analytic | derived
    snapshot_times: [0.1, 0.25]
    snapshot_format: csv         # csv | bin
    output: results              # output directory
    initial_velocity: zero       # zero | taylor-green (runs without a case)
    geometry:
      kind: circle               # circle | ellipse | spline
      radius: 1.0                # circle
      a: 1.0                     # ellipse semi-axes and rotation
      b: 0.6
      angle: 0.0
      points: [[x, y], ...]      # spline samples, body frame
      center: [0.0, 0.0]
      motion: {kind: translate, velocity: [0.4, 0.2]}   # static | translate | rotate (omega)
    force:
      profile: mixed             # mixed | normal | tangential
      a0: 0.0                    # normal part a0 + a1 cos(m theta)
      a1: 0.0
      b0: 0.0                    # tangential part b0 + b1 sin(m theta)
      b1: 0.0
      m: 1
      decay: 0.0
    body_force:
      kind: none                 # none | constant
      value: [0.0, 0.0]
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ..errors import ConfigError
from ..grid import GridSpec
from ..interface import Circle, Ellipse, Motion, SampledCurve, force_profile
from ..solver import DERIVED, GridTrace, SolverConfig, DerivedJumps
from .cases import get_case

SCHEMA: dict[str, Any] = {
    "case": str, "n": int, "grids": list, "lambda": float, "T": float, "L": float,
    "jump_mode": str, "snapshot_times": list, "snapshot_format": str, "output": str,
    "initial_velocity": str,
    "geometry": {"kind": str, "radius": float, "a": float, "b": float, "angle": float,
                 "points": list, "center": list,
                 "motion": {"kind": str, "velocity": list, "omega": float}},
    "force": {"profile": str, "a0": float, "a1": float, "b0": float, "b1": float, "m": int,
              "decay": float},
    "body_force": {"kind": str, "value": list},
}


def _check(node: dict, schema: dict, path: str = ""):
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(node).__name__}")
    for key, val in node.items():
        full = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"unknown key {full!r}")
        kind = schema[key]
        if isinstance(kind, dict):
            _check(val, kind, full)
        elif kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{full}: expected a number, got {val!r}")
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{full}: expected an integer, got {val!r}")
        elif not isinstance(val, kind):
            raise ConfigError(f"{full}: expected {kind.__name__}, got {val!r}")


def load_config(source) -> dict:
    """Parse and validate YAML from a path or a string."""
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and Path(source).exists()) else str(source)
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"cannot parse config{where}: {getattr(exc, 'problem', exc)}") from exc
    _check(data, SCHEMA)
    return data


def build_geometry(g: dict, L: float):
    kind = g.get("kind", "circle")
    m = g.get("motion", {})
    motion = Motion(m.get("kind", "static"), tuple(m.get("velocity", (0.0, 0.0))), float(m.get("omega", 0.0)))
    center = tuple(g.get("center", (0.0, 0.0)))
    if kind == "circle":
        return Circle(g.get("radius", 1.0), center, motion, L)
    if kind == "ellipse":
        return Ellipse(g.get("a", 1.0), g.get("b", 0.6), g.get("angle", 0.0), center, motion, L)
    if kind == "spline":
        if "points" not in g:
            raise ConfigError("geometry.points is required for kind 'spline'")
        return SampledCurve(np.asarray(g["points"], float), center, motion, L)
    raise ConfigError(f"geometry.kind: unknown kind {kind!r}; valid: circle, ellipse, spline")


def _taylor_green_u0(points):
    x, y = points[..., 0], points[..., 1]
    return np.stack([-np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)], axis=-1)


def solver_config(cfg: dict, N: Optional[int] = None, **overrides) -> SolverConfig:
    """Assemble a SolverConfig from a parsed config (``overrides`` win)."""
    N = int(N if N is not None else cfg.get("n", 64))
    L = float(cfg.get("L", np.pi))
    try:
        spec = GridSpec(N, L)
    except ValueError as exc:
        raise ConfigError(f"n: {exc}") from exc
    kw = dict(lam=float(cfg.get("lambda", 0.5)), T=float(cfg.get("T", 0.0)),
              jump_mode=cfg.get("jump_mode", "analytic"),
              snapshot_times=tuple(cfg.get("snapshot_times", ())),
              snapshot_format=cfg.get("snapshot_format", "csv"))
    if "case" in cfg:
        try:
            kw["case"] = get_case(cfg["case"])
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
    else:
        if "geometry" in cfg:
            geo = build_geometry(cfg["geometry"], L)
            f = cfg.get("force", {})
            try:
                force = force_profile(geo, f.get("profile", "mixed"), f.get("a0", 0.0), f.get("a1", 0.0),
                                      f.get("b0", 0.0), f.get("b1", 0.0), f.get("m", 1), f.get("decay", 0.0))
            except ValueError as exc:
                raise ConfigError(f"force.profile: {exc}") from exc
            kw.update(geometry=geo, force=force, jump_mode=DERIVED,
                      jump_provider=DerivedJumps(geo, force, GridTrace(spec, geo)))
        bf = cfg.get("body_force", {})
        if bf.get("kind", "none") == "constant":
            val = np.asarray(bf.get("value", (0.0, 0.0)), float)
            kw["body_force"] = lambda pts, t, side: np.broadcast_to(val, np.shape(pts)).copy()
        elif bf.get("kind", "none") != "none":
            raise ConfigError(f"body_force.kind: unknown kind {bf['kind']!r}; valid: none, constant")
        iv = cfg.get("initial_velocity", "zero")
        if iv == "taylor-green":
            kw["u0"] = _taylor_green_u0
        elif iv != "zero":
            raise ConfigError(f"initial_velocity: unknown field {iv!r}; valid: zero, taylor-green")
    kw.update(overrides)
    return SolverConfig(spec, **kw)
