"""Command-line surface.

Subcommands: optimize, curve, interpolate, dataset, fields. Exit codes:
0 success, 1 iteration cap reached, 2 configuration error, 3 solver
failure, 4 unreachable/stalled interpolation, 5 I/O error. The output root
defaults to ./runs and can be overridden with TOPOGROW_OUTPUT_ROOT.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, growth, simp_core
from .archive import ArchiveWriter, IoError, evaluate_state, load_archive
from .config import ConfigError, RunConfig
from .images import image_to_density, read_pgm, resize_area, write_pgm, quantize
from .mesh_fem import SingularSystem, field_map, DensityField, StiffnessSystem
from .simp_core import (BracketFailure, FixedVolumeSchedule, LinearGrowthSchedule,
                        LogGrowthSchedule, NonFiniteCompliance, PlanSchedule,
                        normalized_weights)

EXIT_OK = 0
EXIT_MAX_ITER = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_UNREACHABLE = 4
EXIT_IO = 5


def output_root(explicit: str | None) -> str:
    if explicit:
        return explicit
    return os.environ.get("TOPOGROW_OUTPUT_ROOT", "runs")


def _progress(name: str, state, every: int = 10):
    if state.iteration % every == 0 or state.status != "running":
        print(f"[{name}] it {state.iteration:4d}  v {state.v_current:.4f}  "
              f"c {state.c_current:.6g}  change {state.change:.4f}  {state.status}")


def build_schedule(cfg: RunConfig, c_min: float | None = None):
    """Schedule plus manifest metadata from a validated config."""
    v = cfg.values
    if not v["growth.enabled"]:
        return FixedVolumeSchedule(v["volfrac"]), {}
    if v["growth.schedule"] == "linear":
        start = v["growth.linear_start"] or None
        sched = LinearGrowthSchedule(v["volfrac"], start, v["growth.linear_step"])
        return sched, {"growth": {"schedule": "linear", "v_f": v["volfrac"],
                                  "start": sched.initial_volume,
                                  "step": v["growth.linear_step"]}}
    if c_min is None:
        c_min = growth.solid_compliance(cfg.mesh(), cfg.material(), cfg.load_cases())
    curve = cfg.growth_curve(c_min)
    sched = LogGrowthSchedule(curve, v["volfrac"], v["growth.form"])
    meta = {"growth": {"schedule": "logarithmic", "v0": curve.v0, "c_min": curve.c_min,
                       "a": curve.a, "b": curve.b, "v_f": v["volfrac"],
                       "form": v["growth.form"]}}
    return sched, meta


def execute_run(cfg: RunConfig, out_dir: str, schedule, manifest_extra: dict,
                initial_rho=None, name: str = "run", tolerate_stall: bool = False):
    """Run the optimizer into an archive; returns (archive, exit_code)."""
    mesh, law = cfg.mesh(), cfg.material()
    loads = cfg.load_cases()
    if initial_rho is None and cfg.values["initial_field"]:
        img = read_pgm(cfg.values["initial_field"])
        try:
            initial_rho = image_to_density(img, mesh)
        except Exception as exc:
            raise ConfigError(f"initial_field: {exc}") from exc
    states = simp_core.run(mesh, law, loads, cfg.optimizer(), schedule,
                           cfg.erosion(), cfg.values["rho_floor"], initial_rho)
    writer = ArchiveWriter(out_dir, cfg, manifest_extra)
    stall_error = None

    def stream():
        nonlocal stall_error
        try:
            for state in states:
                _progress(name, state)
                yield state
        except growth.StalledConvergence as exc:
            if not tolerate_stall:
                raise
            stall_error = exc

    arch = writer.consume(stream())
    if stall_error is not None:
        arch.manifest["status"] = "stalled"
        _rewrite_manifest(arch)
        print(f"[{name}] stalled: {stall_error}", file=sys.stderr)
        return arch, EXIT_UNREACHABLE
    status = arch.manifest["status"]
    return arch, EXIT_MAX_ITER if status == "max_iter" else EXIT_OK


def _rewrite_manifest(arch):
    import json
    with open(os.path.join(arch.path, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(arch.manifest, indent=2, sort_keys=True) + "\n")


def _override_map(pairs) -> dict:
    out = {}
    for kv in pairs or []:
        if "=" not in kv:
            raise ConfigError(f"--set expects KEY=VALUE, got {kv!r}")
        key, val = kv.split("=", 1)
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    cfg = RunConfig.from_text(_read_file(args.config)).with_overrides(_override_map(args.set))
    name = os.path.splitext(os.path.basename(args.config))[0]
    out_dir = args.out or os.path.join(output_root(None), name)
    schedule, meta = build_schedule(cfg)
    _, code = execute_run(cfg, out_dir, schedule, meta, name=name)
    return code


def cmd_curve(args) -> int:
    v0_list = [float(tok) for tok in args.v0.split(",") if tok.strip()]
    if not v0_list:
        raise ConfigError("need at least one v0")
    base_text = (f"fixture = {args.fixture}\ngrowth.enabled = true\n"
                 "growth.schedule = logarithmic")
    base_cfg = RunConfig.from_text(base_text).with_overrides(_override_map(args.set))
    out_dir = args.out or os.path.join(output_root(None), f"curve_{args.fixture}")
    c_min = growth.solid_compliance(base_cfg.mesh(), base_cfg.material(),
                                    base_cfg.load_cases())
    print(f"[curve] shared c_min = {c_min!r}")

    worst = EXIT_OK
    curve_rows = ["v0,c_min,v,c,inv_c"]
    overlay_rows = ["v0,iter,v,c,inv_c"]
    for v0 in v0_list:
        cfg = base_cfg.with_overrides({"growth.v0": repr(v0)})
        schedule, meta = build_schedule(cfg, c_min=c_min)
        arch, code = execute_run(cfg, os.path.join(out_dir, f"v0_{v0:g}"),
                                 schedule, meta, name=f"v0={v0:g}")
        worst = max(worst, code)
        curve = growth.make_curve(v0, c_min)
        for v, c in growth.curve_points(curve, args.samples):
            v, c = float(v), float(c)
            curve_rows.append(f"{v0!r},{c_min!r},{v!r},{c!r},{1.0 / c!r}")
        for rec in arch.history:
            overlay_rows.append(f"{v0!r},{rec.iteration},{rec.v!r},{rec.c!r},{1.0 / rec.c!r}")
    _write_file(os.path.join(out_dir, "curves.csv"), "\n".join(curve_rows) + "\n")
    _write_file(os.path.join(out_dir, "overlay.csv"), "\n".join(overlay_rows) + "\n")
    return worst


def cmd_interpolate(args) -> int:
    source = load_archive(args.source)
    meta = source.manifest.get("growth")
    if not meta or meta.get("schedule") != "logarithmic":
        raise ConfigError("source archive was not a logarithmic growth run")
    src_curve = growth.GrowthCurve(meta["v0"], meta["c_min"], meta["a"], meta["b"])
    tgt_curve = growth.make_curve(args.target_v0, meta["c_min"])
    if args.mode == "horizontal":
        plan = growth.HorizontalJump(src_curve, tgt_curve, args.threshold)
    else:
        plan = growth.VerticalJump(src_curve, tgt_curve, args.threshold)

    cfg = source.config.with_overrides(_override_map(args.set))
    schedule = PlanSchedule(plan, start_volume=source.final_v)
    out_dir = args.out or os.path.join(output_root(None),
                                       f"interp_{args.mode}_{args.target_v0:g}")
    extra = {"growth": {"schedule": "logarithmic", "v0": tgt_curve.v0,
                        "c_min": tgt_curve.c_min, "a": tgt_curve.a, "b": tgt_curve.b,
                        "v_f": 1.0, "form": "exponential"},
             "interpolation": {"mode": args.mode, "threshold": args.threshold,
                               "source": os.path.abspath(args.source),
                               "source_v0": src_curve.v0, "target_v0": tgt_curve.v0}}
    arch, code = execute_run(cfg, out_dir, schedule, extra,
                             initial_rho=source.final_density(),
                             name=f"interp-{args.mode}", tolerate_stall=True)
    switch = _switch_iteration(arch.history, args.mode, args.threshold)
    arch.manifest["interpolation"]["switch_iteration"] = switch
    _rewrite_manifest(arch)
    return code


def _switch_iteration(history, mode: str, threshold: float):
    for rec in history:
        if mode == "horizontal" and rec.c <= threshold:
            return rec.iteration
        if mode == "vertical" and rec.v >= threshold - 1e-9:
            return rec.iteration
    return None


def cmd_dataset(args) -> int:
    if args.width < 1 or args.height < 1:
        raise ConfigError(f"dataset image size {args.width}x{args.height} must be positive")
    os.makedirs(os.path.join(args.out, "images"), exist_ok=True)
    rows = ["image,v,c,v0,r,iter"]
    counter = 0
    for arch_path in args.archives:
        arch = load_archive(arch_path)
        cfg = arch.config
        v0 = cfg.values["growth.v0"] if cfg.values["growth.enabled"] else cfg.values["volfrac"]
        radius = cfg.values["erosion.r"] if cfg.values["erosion.enabled"] else 0
        if args.per_snapshot:
            items = []
            by_iter = {rec.iteration: rec for rec in arch.history}
            for it in arch.snapshot_iterations():
                nxt = by_iter.get(it + 1)
                if nxt is not None:
                    items.append((it, arch.snapshot_density(it), nxt.v, nxt.c))
                elif it == arch.manifest["iterations"] - 1:
                    items.append((it, arch.final_density(), arch.final_v, arch.final_c))
        else:
            items = [(arch.manifest["iterations"] - 1, arch.final_density(),
                      arch.final_v, arch.final_c)]
        mesh = cfg.mesh()
        for it, rho, v, c in items:
            grid = mesh.grid_view(rho).T[::-1, :]
            resized = resize_area(grid, args.width, args.height)
            rel = os.path.join("images", f"{counter:04d}.pgm")
            write_pgm(os.path.join(args.out, rel), quantize(resized))
            rows.append(f"{rel},{v!r},{c!r},{v0!r},{radius},{it}")
            counter += 1
    _write_file(os.path.join(args.out, "index.csv"), "\n".join(rows) + "\n")
    print(f"[dataset] wrote {counter} rows to {args.out}")
    return EXIT_OK


def cmd_fields(args) -> int:
    arch = load_archive(args.archive)
    cfg = arch.config
    mesh, law = cfg.mesh(), cfg.material()
    floor = cfg.values["rho_floor"]
    rho = np.clip(arch.final_density(), floor, 1.0)
    dens = DensityField(rho, rho.copy(), floor)
    loads = cfg.load_cases()
    system = StiffnessSystem(mesh, law, dens)
    weights = normalized_weights(loads)
    kinds = ([k.strip() for k in args.kinds.split(",") if k.strip()]
             if args.kinds else cfg.field_kinds())
    out_dir = args.out or os.path.join(args.archive, "fields")
    os.makedirs(out_dir, exist_ok=True)
    from .images import field_to_image, mask_to_image
    for kind in kinds:
        total = np.zeros(mesh.n_elements)
        for ld, w in zip(loads, weights):
            u = system.solve(ld)
            total += w * field_map(kind, u, mesh, law, dens).values
        write_pgm(os.path.join(out_dir, f"{kind}.pgm"),
                  field_to_image(total, mesh, normalize=not args.raw))
        if args.threshold is not None:
            write_pgm(os.path.join(out_dir, f"{kind}_mask.pgm"),
                      mask_to_image(total >= args.threshold, mesh))
    print(f"[fields] wrote {len(kinds)} field image(s) to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _write_file(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topogrow",
                                description="growth-space topology optimization")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("optimize", help="run one optimization from a config file")
    sp.add_argument("config")
    sp.add_argument("--out")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("curve", help="growth runs for several v0 on one fixture")
    sp.add_argument("--fixture", required=True)
    sp.add_argument("--v0", required=True, help="comma-separated list")
    sp.add_argument("--out")
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("interpolate", help="jump between growth curves")
    sp.add_argument("--source", required=True, help="source run archive")
    sp.add_argument("--mode", choices=("horizontal", "vertical"), required=True)
    sp.add_argument("--threshold", type=float, required=True,
                    help="c_t (horizontal) or v_t (vertical)")
    sp.add_argument("--target-v0", type=float, required=True)
    sp.add_argument("--out")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_interpolate)

    sp = sub.add_parser("dataset", help="surrogate dataset from run archives")
    sp.add_argument("archives", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int, required=True)
    sp.add_argument("--height", type=int, required=True)
    sp.add_argument("--per-snapshot", action="store_true")
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("fields", help="field images for an archive's final state")
    sp.add_argument("--archive", required=True)
    sp.add_argument("--kinds")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--raw", action="store_true", help="skip max-normalization")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fields)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystem, NonFiniteCompliance, BracketFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (growth.Unreachable, growth.StalledConvergence) as exc:
        print(f"interpolation failure: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
