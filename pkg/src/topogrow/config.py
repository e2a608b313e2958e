"""Run configuration: flat key-path text format, schema validation, hashing.

The on-disk format is one `key = value` assignment per line with `#`
comments. Keys are dotted paths from the schema below; unknown keys are
rejected. Loads are dynamic keys `load.<n>` holding semicolon-separated
point forces "ix,iy,comp,magnitude". Supports accept explicit node triples
"ix,iy,comp" plus the wall keywords left_wall / right_wall / top_wall /
bottom_wall. A named fixture pre-fills mesh, supports and loads; explicit
keys override it.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from . import fixtures as fixtures_mod
from .growth import GrowthCurve, make_curve
from .mesh_fem import RHO_FLOOR, GridMesh, LoadCase, MaterialLaw
from .simp_core import OptimizerConfig
from .twigcutter import ALL_DIRECTIONS, DIAGONAL, HORIZONTAL, ORTHOGONAL, VERTICAL, ErosionSpec


class ConfigError(ValueError):
    pass


_DIRECTION_WORDS = {
    "all": ALL_DIRECTIONS,
    "horizontal": HORIZONTAL,
    "vertical": VERTICAL,
    "orthogonal": ORTHOGONAL,
    "diagonal": DIAGONAL,
}

# key -> (type tag, default); None default means "required or fixture-provided"
SCHEMA = {
    "fixture": ("str", ""),
    "mesh.nelx": ("int", None),
    "mesh.nely": ("int", None),
    "material.e0": ("float", 1.0),
    "material.emin": ("float", 0.0),  # 0 -> 1e-9 * e0
    "material.nu": ("float", 0.3),
    "material.penal": ("float", 3.0),
    "supports": ("str", None),
    "volfrac": ("float", 0.5),
    "rho_floor": ("float", RHO_FLOOR),
    "optimizer.rmin": ("float", 2.0),
    "optimizer.filter_mode": ("str", "sensitivity"),
    "optimizer.move_limit": ("float", 0.2),
    "optimizer.oc_damping": ("float", 0.5),
    "optimizer.tol": ("float", 0.01),
    "optimizer.max_iter": ("int", 300),
    "growth.enabled": ("bool", False),
    "growth.schedule": ("str", "logarithmic"),
    "growth.v0": ("float", 0.3),
    "growth.form": ("str", "exponential"),
    "growth.linear_start": ("float", 0.0),  # 0 -> 0.9 * volfrac
    "growth.linear_step": ("float", 0.002),
    "erosion.enabled": ("bool", False),
    "erosion.r": ("int", 3),
    "erosion.threshold_hi": ("float", 0.8),
    "erosion.rho_erased": ("float", 0.001),
    "erosion.directions": ("str", "all"),
    "erosion.cadence": ("int", 10),
    "erosion.activation_iter": ("int", 30),
    "erosion.euclidean": ("bool", False),
    "outputs.snapshot_every": ("int", 10),
    "outputs.fields": ("str", "von_mises"),
    "seed": ("int", 0),
    "initial_field": ("str", ""),
}

_LOAD_KEY = re.compile(r"^load\.(\d+)$")
_LOAD_WEIGHT_KEY = re.compile(r"^load\.(\d+)\.weight$")

# outputs.* and seed do not change the math; everything else does
_NON_SEMANTIC = ("outputs.",)


def parse_text(text: str) -> dict:
    """Parse `key = value` lines into a raw string map; unknown keys rejected."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not (key in SCHEMA or _LOAD_KEY.match(key) or _LOAD_WEIGHT_KEY.match(key)):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key: str, value: str):
    kind = SCHEMA.get(key, ("float", None))[0] if key in SCHEMA else "float"
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as {kind}") from exc


def _format(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    """Validated, fixture-resolved run description."""

    values: dict = field(default_factory=dict)   # schema keys -> typed values
    load_specs: list = field(default_factory=list)  # [(forces-string, weight)]

    # -- construction ------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        raw = parse_text(text)
        if not raw:
            raise ConfigError("empty configuration")
        fixture_name = raw.get("fixture", "")
        base = {}
        if fixture_name:
            base = fixtures_mod.fixture_defaults(fixture_name)
        merged = dict(base)
        merged.update(raw)

        values = {}
        for key, (kind, default) in SCHEMA.items():
            if key in merged:
                values[key] = _convert(key, merged[key])
            elif default is not None:
                values[key] = default
            else:
                raise ConfigError(f"missing required key {key!r}")

        loads = {}
        weights = {}
        for key, value in merged.items():
            m = _LOAD_KEY.match(key)
            if m:
                loads[int(m.group(1))] = value
            m = _LOAD_WEIGHT_KEY.match(key)
            if m:
                weights[int(m.group(1))] = float(value)
        if not loads:
            raise ConfigError("no load cases configured (need at least load.1)")
        load_specs = [(loads[n], weights.get(n, 1.0)) for n in sorted(loads)]

        cfg = cls(values, load_specs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Copy with keys replaced; values given as config-format strings."""
        values = dict(self.values)
        loads = {n: spec for n, (spec, _w) in enumerate(self.load_specs, 1)}
        weights = {n: w for n, (_spec, w) in enumerate(self.load_specs, 1)}
        for key, val in overrides.items():
            if key in SCHEMA:
                values[key] = _convert(key, val)
            elif _LOAD_KEY.match(key):
                loads[int(_LOAD_KEY.match(key).group(1))] = val
            elif _LOAD_WEIGHT_KEY.match(key):
                weights[int(_LOAD_WEIGHT_KEY.match(key).group(1))] = float(val)
            else:
                raise ConfigError(f"unknown override key {key!r}")
        cfg = RunConfig(values, [(loads[n], weights.get(n, 1.0)) for n in sorted(loads)])
        cfg.validate()
        return cfg

    # -- validation and structured accessors --------------------------------

    def validate(self):
        v = self.values
        mesh = self.mesh()
        self.material()
        self.optimizer()
        if v["erosion.enabled"]:
            self.erosion()
        if not (0.0 < v["volfrac"] <= 1.0):
            raise ConfigError("volfrac must lie in (0, 1]")
        if v["growth.enabled"]:
            if v["growth.schedule"] not in ("logarithmic", "linear"):
                raise ConfigError(f"unknown growth schedule {v['growth.schedule']!r}")
            if not (0.0 < v["growth.v0"] < 1.0):
                raise ConfigError("growth.v0 must lie in (0, 1)")
            if v["growth.form"] not in ("exponential", "as_printed"):
                raise ConfigError(f"unknown growth form {v['growth.form']!r}")
        for ix, iy, _comp in self._support_nodes():
            if not (0 <= ix <= mesh.nelx and 0 <= iy <= mesh.nely):
                raise ConfigError(f"support node ({ix},{iy}) outside mesh")
        for spec, weight in self.load_specs:
            if weight <= 0:
                raise ConfigError("load weight must be positive")
            for ix, iy, comp, _mag in _parse_forces(spec):
                if not (0 <= ix <= mesh.nelx and 0 <= iy <= mesh.nely):
                    raise ConfigError(f"load node ({ix},{iy}) outside mesh")
                if comp not in ("x", "y"):
                    raise ConfigError(f"load component must be x or y, got {comp!r}")

    def mesh(self) -> GridMesh:
        try:
            return GridMesh(self.values["mesh.nelx"], self.values["mesh.nely"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def material(self) -> MaterialLaw:
        v = self.values
        emin = v["material.emin"] if v["material.emin"] > 0 else 1e-9 * v["material.e0"]
        try:
            return MaterialLaw(v["material.e0"], emin, v["material.nu"], v["material.penal"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def optimizer(self) -> OptimizerConfig:
        v = self.values
        try:
            return OptimizerConfig(v["optimizer.rmin"], v["optimizer.filter_mode"],
                                   v["optimizer.move_limit"], v["optimizer.oc_damping"],
                                   v["optimizer.tol"], v["optimizer.max_iter"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def erosion(self) -> ErosionSpec | None:
        v = self.values
        if not v["erosion.enabled"]:
            return None
        word = v["erosion.directions"].strip().lower()
        if word in _DIRECTION_WORDS:
            mask = _DIRECTION_WORDS[word]
        elif re.fullmatch(r"[01]{8}", word):
            mask = sum(1 << i for i, ch in enumerate(word) if ch == "1")
        else:
            raise ConfigError(f"bad erosion.directions {word!r} (keyword or 8-bit string)")
        try:
            return ErosionSpec(v["erosion.r"], v["erosion.threshold_hi"],
                               v["erosion.rho_erased"], mask, v["erosion.cadence"],
                               v["erosion.activation_iter"], v["erosion.euclidean"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _support_nodes(self):
        mesh_x = self.values["mesh.nelx"]
        mesh_y = self.values["mesh.nely"]
        out = []
        for token in self.values["supports"].split(";"):
            token = token.strip()
            if not token:
                continue
            if token == "left_wall":
                out += [(0, iy, "both") for iy in range(mesh_y + 1)]
            elif token == "right_wall":
                out += [(mesh_x, iy, "both") for iy in range(mesh_y + 1)]
            elif token == "bottom_wall":
                out += [(ix, 0, "both") for ix in range(mesh_x + 1)]
            elif token == "top_wall":
                out += [(ix, mesh_y, "both") for ix in range(mesh_x + 1)]
            else:
                parts = [p.strip() for p in token.split(",")]
                if len(parts) != 3 or parts[2] not in ("x", "y", "both"):
                    raise ConfigError(f"bad support token {token!r}")
                out.append((int(parts[0]), int(parts[1]), parts[2]))
        if not out:
            raise ConfigError("no supports configured")
        return out

    def load_cases(self) -> list[LoadCase]:
        mesh = self.mesh()
        fixed = self._support_nodes()
        cases = []
        for spec, weight in self.load_specs:
            forces = _parse_forces(spec)
            cases.append(LoadCase.from_nodes(mesh, fixed, forces, weight))
        return cases

    def growth_curve(self, c_min: float) -> GrowthCurve:
        return make_curve(self.values["growth.v0"], c_min)

    # -- serialization -------------------------------------------------------

    def to_text(self) -> str:
        """Canonical resolved form: every schema key plus load cases, sorted."""
        lines = [f"{k} = {_format(k, self.values[k])}" for k in sorted(SCHEMA)]
        for n, (spec, weight) in enumerate(self.load_specs, 1):
            lines.append(f"load.{n} = {_normalize_forces(spec)}")
            lines.append(f"load.{n}.weight = {_format('', weight)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        semantic = []
        for line in self.to_text().splitlines():
            key = line.split("=", 1)[0].strip()
            if key == "seed" or any(key.startswith(p) for p in _NON_SEMANTIC):
                continue
            semantic.append(line)
        return hashlib.sha256("\n".join(semantic).encode()).hexdigest()

    def field_kinds(self) -> list[str]:
        return [k.strip() for k in self.values["outputs.fields"].split(",") if k.strip()]


def _parse_forces(spec: str):
    forces = []
    for token in spec.split(";"):
        token = token.strip()
        if not token:
            continue
        parts = [p.strip() for p in token.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"bad force token {token!r} (want ix,iy,comp,mag)")
        forces.append((int(parts[0]), int(parts[1]), parts[2], float(parts[3])))
    if not forces:
        raise ConfigError(f"load case {spec!r} has no forces")
    return forces


def _normalize_forces(spec: str) -> str:
    return "; ".join(f"{ix},{iy},{comp},{_format('', float(mag))}"
                     for ix, iy, comp, mag in _parse_forces(spec))
