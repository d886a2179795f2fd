"""``qtomo`` command line: phantom, project, downscale, reconstruct, verify.

Reconstruction runs are described by a JSON manifest; ``--seed``,
``--solver``, ``--out-dir`` and ``--time-limit`` fill in values the manifest
leaves out and abort if they contradict one it sets.

Errors go to stderr as one JSON object ``{"error": ..., "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import errors
from .encoding import EncodingSpec
from .phantom import generate_shepp_logan, load_image, save_image
from .pipeline import (
    ReconConfig,
    StagePlan,
    StageSpec,
    multi_stage_reconstruct,
    single_stage_reconstruct,
    sparse_view_reconstruct,
)
from .projector import Geometry, Region, load_sinogram, radon, save_sinogram
from .report import build_report, render_gap_table, save_difference_pgm
from .resample import DownscaleSpec, downscale_full_view, downscale_sparse_view
from .solver import SolverConfig
from .verify import LEVELS, run_checks

EXIT_CODES = {
    errors.InvalidArgument: 2,
    errors.FormatError: 2,
    errors.CapacityError: 3,
    errors.DegenerateProblemError: 3,
    errors.TransportError: 4,
    errors.ProtocolError: 4,
    errors.IntegrityError: 4,
}

MANIFEST_KEYS = {
    "sample", "source", "reference", "geometry", "strategy", "downscale", "encoding",
    "solver", "seed", "refine", "stages", "convergence_tol", "n_full_angles", "out_dir",
}
REFINE_KEYS = {
    "interpolation", "region_size", "overlap", "max_iterations", "convergence_tol",
    "gaussian_sigma", "hole_fill", "regions", "max_vars", "warm_start",
}
STRATEGIES = ("single", "multi", "sparse")


class ManifestConflict(errors.InvalidArgument):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


# -- manifest handling ------------------------------------------------------


def load_manifest(path) -> dict:
    path = Path(path)
    try:
        m = json.loads(path.read_text())
    except OSError as exc:
        raise errors.InvalidArgument(f"cannot read manifest: {exc}") from None
    except json.JSONDecodeError as exc:
        raise errors.FormatError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(m, dict):
        raise errors.FormatError(f"{path}: manifest must be a JSON object")
    unknown = set(m) - MANIFEST_KEYS
    if unknown:
        raise errors.InvalidArgument(f"unknown manifest keys: {sorted(unknown)}")
    m["_base"] = str(path.resolve().parent)
    return m


def apply_overrides(m: dict, seed=None, solver=None, out_dir=None, time_limit=None) -> dict:
    """Fill unset manifest values from flags; raise on contradictions."""
    m = json.loads(json.dumps(m))
    sol = m.setdefault("solver", {})

    def merge(container, key, value, flag):
        if value is None:
            return
        if key in container and container[key] != value:
            raise ManifestConflict(
                f"{flag}={value!r} conflicts with manifest value {container[key]!r}"
            )
        container[key] = value

    merge(m, "seed", seed, "--seed")
    merge(sol, "name", solver, "--solver")
    merge(m, "out_dir", out_dir, "--out-dir")
    merge(sol, "time_limit_s", time_limit, "--time-limit")
    return m


def _path(m: dict, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(m.get("_base", ".")) / p


def _source(m: dict):
    """Returns (sinogram, reference image or None)."""
    src = m.get("source")
    if not isinstance(src, dict) or len(src) != 1:
        raise errors.InvalidArgument("source must hold exactly one of phantom, image, sinogram")
    (kind, spec), = src.items()
    geo = m.get("geometry", {})
    ref = None
    if kind == "sinogram":
        sino = load_sinogram(_path(m, spec))
    elif kind in ("phantom", "image"):
        if kind == "phantom":
            ref = generate_shepp_logan(int(spec["size"]), spec.get("mode", "binary"), int(spec.get("k", 4)))
        else:
            ref = load_image(_path(m, spec))
        if ref.height != ref.width:
            raise errors.InvalidArgument("only square images are supported")
        if "angles" in geo:
            g = Geometry(ref.height, tuple(float(a) for a in geo["angles"]), geo.get("detectors") or ref.height)
        else:
            g = Geometry.uniform(ref.height, int(geo.get("n_angles", ref.height)), geo.get("detectors"))
        sino = radon(ref, g)
    else:
        raise errors.InvalidArgument(f"unknown source kind {kind!r}")
    if "reference" in m:
        ref = load_image(_path(m, m["reference"]))
    return sino, ref


def _regions(spec):
    if spec is None:
        return None
    return tuple(Region(*map(int, r)) for r in spec)


def build_config(m: dict):
    """Translate a manifest into (strategy, ReconConfig or StagePlan-kwargs)."""
    strategy = m.get("strategy", "single")
    if strategy not in STRATEGIES:
        raise errors.InvalidArgument(f"strategy must be one of {STRATEGIES}")
    refine = dict(m.get("refine", {}))
    unknown = set(refine) - REFINE_KEYS
    if unknown:
        raise errors.InvalidArgument(f"unknown refine keys: {sorted(unknown)}")
    if "regions" in refine:
        refine["regions"] = _regions(refine["regions"])
    sol = {k: v for k, v in m.get("solver", {}).items()}
    try:
        solver = SolverConfig(**sol)
        encoding = EncodingSpec.from_dict(m.get("encoding", {"mode": "radix2", "bits": 1}))
        cfg = ReconConfig(
            downscale=DownscaleSpec(**m.get("downscale", {})),
            encoding=encoding,
            solver=solver,
            seed=int(m.get("seed", 0)),
            sample=str(m.get("sample", "sample")),
            **refine,
        )
    except TypeError as exc:
        raise errors.InvalidArgument(f"bad manifest field: {exc}") from None
    return strategy, cfg


def _plan(m: dict, N: int) -> StagePlan:
    stages = []
    for s in m.get("stages") or []:
        s = dict(s)
        if "regions" in s:
            s["regions"] = _regions(s["regions"])
        try:
            stages.append(StageSpec(**s))
        except TypeError as exc:
            raise errors.InvalidArgument(f"bad stage: {exc}") from None
    return StagePlan(tuple(stages), N, float(m.get("convergence_tol", 1e-3)))


def run_manifest(m: dict, out_dir: Path) -> dict:
    strategy, cfg = build_config(m)
    sino, ref = _source(m)
    N = sino.geometry.image_size
    t0 = time.perf_counter()
    if strategy == "single":
        img, ledger = single_stage_reconstruct(sino, cfg)
        n0 = N // cfg.downscale.d2
    elif strategy == "sparse":
        img, ledger = sparse_view_reconstruct(sino, cfg, m.get("n_full_angles"))
        n0 = N // cfg.downscale.d2
    else:
        plan = _plan(m, N)
        img, ledger = multi_stage_reconstruct(
            sino, plan, cfg.encoding, cfg.solver, cfg.seed, cfg.max_vars, cfg.sample, cfg.warm_start
        )
        n0 = plan.stages[0].size
    wall = time.perf_counter() - t0

    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(img, out_dir / "image.txt")
    save_image(img, out_dir / "image.pgm")
    (out_dir / "ledger.csv").write_text(render_gap_table(ledger, include_runtime=False))
    levels = cfg.encoding.levels()
    rep = build_report(
        img, ref, levels, ledger, n0, N,
        wall_time_s=wall,
        converged={str(k): v for k, v in img.meta["converged"].items()},
        history=img.meta["history"],
    )
    if ref is not None:
        save_difference_pgm(img, ref, out_dir / "diff.pgm")
    (out_dir / "report.json").write_text(json.dumps(rep.to_dict(include_timing=False), indent=2) + "\n")
    timing = {
        "wall_time_s": wall,
        "regions": [
            {"level": r.level, "iteration": r.iteration, "region": r.region, "runtime_s": r.runtime_s}
            for r in ledger
        ],
    }
    (out_dir / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    # out_dir is left out so identical runs written to different places match
    resolved = {k: v for k, v in m.items() if not k.startswith("_") and k != "out_dir"}
    resolved.update(encoding=cfg.encoding.to_dict(), solver=cfg.solver.to_dict(), seed=cfg.seed)
    resolved["downscale"] = asdict(cfg.downscale)
    (out_dir / "manifest.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return {"report": rep, "image": img, "ledger": ledger}


# -- commands ---------------------------------------------------------------


def cmd_phantom(args) -> int:
    img = generate_shepp_logan(args.size, args.mode, args.k)
    save_image(img, args.out)
    print(f"wrote {args.size}x{args.size} {args.mode} phantom to {args.out}")
    return 0


def cmd_project(args) -> int:
    img = load_image(args.image)
    if img.height != img.width:
        raise errors.InvalidArgument("only square images are supported")
    g = Geometry.uniform(img.height, args.angles, args.detectors)
    save_sinogram(radon(img, g), args.out)
    print(f"wrote {g.n_angles}x{g.detectors} sinogram to {args.out}")
    return 0


def cmd_downscale(args) -> int:
    sino = load_sinogram(args.sino, args.image_size)
    if args.sparse:
        out = downscale_sparse_view(sino, args.d2, args.aggregate)
    else:
        out = downscale_full_view(sino, DownscaleSpec(args.d1, args.d2, args.aggregate, args.angle_mode))
    save_sinogram(out, args.out)
    print(f"wrote {out.geometry.n_angles}x{out.geometry.detectors} sinogram to {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    m = apply_overrides(
        load_manifest(args.manifest), args.seed, args.solver, args.out_dir, args.time_limit
    )
    if "out_dir" not in m:
        raise errors.InvalidArgument("no output directory: set out_dir or pass --out-dir")
    out_dir = _path(m, m["out_dir"]) if args.out_dir is None else Path(args.out_dir)
    res = run_manifest(m, out_dir)
    print(res["report"].summary())
    print(f"outputs in {out_dir}")
    return 0


def cmd_verify(args) -> int:
    results = run_checks(args.level, args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        _emit_error("VerificationFailed", f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qtomo", description="Region-wise QUBO tomographic reconstruction")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write a Shepp-Logan phantom")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--mode", choices=("binary", "integer"), default="binary")
    p.add_argument("--k", type=int, default=4, help="number of levels in integer mode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="parallel-beam sinogram of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--angles", type=int, required=True, help="uniform angles over [0, 180)")
    p.add_argument("--detectors", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("downscale", help="reduce a sinogram by detector (and angle) groups")
    p.add_argument("--sino", required=True)
    p.add_argument("--image-size", type=int)
    p.add_argument("--d1", type=int, default=2)
    p.add_argument("--d2", type=int, default=2)
    p.add_argument("--aggregate", choices=("mean", "max", "min"), default="mean")
    p.add_argument("--angle-mode", choices=("pick_second", "mean_projection"), default="pick_second")
    p.add_argument("--sparse", action="store_true", help="keep every angle (only d2 applies)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_downscale)

    p = sub.add_parser("reconstruct", help="run a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=("exhaustive", "sa", "greedy", "remote"))
    p.add_argument("--out-dir")
    p.add_argument("--time-limit", type=float)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", help="run the built-in oracle checks")
    p.add_argument("--level", choices=LEVELS, default="tiny")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except errors.QtomoError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_CODES.get(type(exc), next(
            (c for t, c in EXIT_CODES.items() if isinstance(exc, t)), 1
        ))
    except (OSError, KeyError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
