"""Run archives: history CSV, density snapshots, manifest, resume support.

An archive directory is self-contained:

    config.txt          canonical resolved configuration
    manifest.json       config hash, fixture, tool version, final state
    history.csv         iter,v,c,change,erased_count,volume_removed
    density_final.pgm   final physical densities
    snapshots/          density_<iter>.pgm at the configured cadence
    fields/             written by the `fields` command

The final (v, c) pair in the manifest comes from one extra evaluation solve
of the final field, so it is exactly consistent with density_final.pgm.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import RunConfig
from .images import IoError, density_to_image, image_to_density, read_pgm, write_pgm
from .mesh_fem import DensityField, StiffnessSystem, compliance
from .simp_core import HistoryRecord, normalized_weights

HISTORY_HEADER = "iter,v,c,change,erased_count,volume_removed"


def format_history(records) -> str:
    lines = [HISTORY_HEADER]
    for r in records:
        lines.append(f"{r.iteration},{r.v!r},{r.c!r},{r.change!r},"
                     f"{r.erased_count},{r.volume_removed!r}")
    return "\n".join(lines) + "\n"


def parse_history(text: str):
    lines = text.strip().splitlines()
    if not lines or lines[0] != HISTORY_HEADER:
        raise IoError(f"bad history header: {lines[:1]}")
    records = []
    for line in lines[1:]:
        it, v, c, change, erased, removed = line.split(",")
        records.append(HistoryRecord(int(it), float(v), float(c), float(change),
                                     int(erased), float(removed)))
    return records


@dataclass
class RunArchive:
    path: str
    config: RunConfig
    history: list
    manifest: dict

    @property
    def final_v(self) -> float:
        return self.manifest["final"]["v"]

    @property
    def final_c(self) -> float:
        return self.manifest["final"]["c"]

    def final_density(self) -> np.ndarray:
        img = read_pgm(os.path.join(self.path, "density_final.pgm"))
        return image_to_density(img, self.config.mesh())

    def snapshot_iterations(self) -> list[int]:
        snap_dir = os.path.join(self.path, "snapshots")
        if not os.path.isdir(snap_dir):
            return []
        its = []
        for name in os.listdir(snap_dir):
            if name.startswith("density_") and name.endswith(".pgm"):
                its.append(int(name[len("density_"):-len(".pgm")]))
        return sorted(its)

    def snapshot_density(self, iteration: int) -> np.ndarray:
        img = read_pgm(os.path.join(self.path, "snapshots", f"density_{iteration:06d}.pgm"))
        return image_to_density(img, self.config.mesh())


def evaluate_state(cfg: RunConfig, rho_phys: np.ndarray) -> tuple[float, float]:
    """One solve of a given physical density field -> (v, c)."""
    mesh, law = cfg.mesh(), cfg.material()
    floor = cfg.values["rho_floor"]
    dens = DensityField(np.clip(rho_phys, floor, 1.0),
                        np.clip(rho_phys, floor, 1.0), floor)
    loads = cfg.load_cases()
    system = StiffnessSystem(mesh, law, dens)
    weights = normalized_weights(loads)
    c_total = 0.0
    for ld, w in zip(loads, weights):
        c_l, _ = compliance(system.solve(ld), mesh, law, dens)
        c_total += w * c_l
    return float(dens.volume), float(c_total)


class ArchiveWriter:
    """Consumes the optimization state stream and writes the archive."""

    def __init__(self, path: str, cfg: RunConfig, extra_manifest: dict | None = None):
        self.path = path
        self.cfg = cfg
        self.extra = extra_manifest or {}
        self.mesh = cfg.mesh()
        self.snapshot_every = cfg.values["outputs.snapshot_every"]
        self._final_state = None
        try:
            os.makedirs(os.path.join(path, "snapshots"), exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create archive at {path}: {exc}") from exc

    def consume(self, states) -> "RunArchive":
        for state in states:
            self._final_state = state
            if self.snapshot_every and state.iteration % self.snapshot_every == 0:
                self._snapshot(state)
        if self._final_state is None:
            raise IoError("run produced no iterations")
        return self._finalize()

    def _snapshot(self, state):
        img = density_to_image(state.densities.rho_phys, self.mesh)
        write_pgm(os.path.join(self.path, "snapshots",
                               f"density_{state.iteration:06d}.pgm"), img)

    def _finalize(self) -> "RunArchive":
        state = self._final_state
        self._snapshot(state)
        write_pgm(os.path.join(self.path, "density_final.pgm"),
                  density_to_image(state.densities.rho_phys, self.mesh))
        history_text = format_history(state.history)
        _write_text(os.path.join(self.path, "history.csv"), history_text)
        _write_text(os.path.join(self.path, "config.txt"), self.cfg.to_text())

        final_v, final_c = evaluate_state(self.cfg, state.densities.rho_phys)
        manifest = {
            "config_hash": self.cfg.config_hash(),
            "fixture": self.cfg.values["fixture"] or None,
            "tool_version": __version__,
            "status": state.status,
            "iterations": state.iteration + 1,
            "final": {"v": final_v, "c": final_c},
            "seed": self.cfg.values["seed"],
        }
        manifest.update(self.extra)
        _write_text(os.path.join(self.path, "manifest.json"),
                    json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return RunArchive(self.path, self.cfg, list(state.history), manifest)


def _write_text(path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_archive(path: str, verify_hash: bool = True) -> RunArchive:
    def read(name):
        try:
            with open(os.path.join(path, name), "r", encoding="utf-8") as fh:
                return fh.read()
        except OSError as exc:
            raise IoError(f"cannot read archive file {name} in {path}: {exc}") from exc

    cfg = RunConfig.from_text(read("config.txt"))
    manifest = json.loads(read("manifest.json"))
    if verify_hash and manifest.get("config_hash") != cfg.config_hash():
        raise IoError(f"archive {path}: manifest hash does not match config.txt")
    history = parse_history(read("history.csv"))
    return RunArchive(path, cfg, history, manifest)
