"""Reconstruction strategies built on region-wise QUBO refinement.

All three strategies share one engine. A sinogram is reduced to the first
(coarsest) resolution, reconstructed there with a single whole-image QUBO,
then carried up through each finer resolution. At every finer level the
image is upscaled, split into regions, and each region is re-solved as a
QUBO with the rest of the image held fixed. Full passes over the regions
repeat until the reprojection matches that level's target sinogram or the
iteration cap is hit.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .encoding import EncodingSpec, radix2
from .errors import CapacityError, DegenerateProblemError, InvalidArgument
from .phantom import Image
from .projector import Geometry, Region, Sinogram, radon
from .qubo import build_region_qubo, decode_solution
from .resample import DownscaleSpec, downscale_full_view, gaussian_filter, upscale_image
from .solver import SolverConfig

log = logging.getLogger(__name__)

_EPS = 1e-12


@dataclass
class RefinementRecord:
    """One solved region: the analytic minimum vs what the solver reached."""

    iteration: int
    region: str
    target_min: float
    achieved: float
    runtime_s: float
    sample: str = ""
    level: int = 0
    n_vars: int = 0
    status: str = "ok"

    @property
    def abs_gap(self) -> float:
        return abs(self.target_min - self.achieved)


@dataclass(frozen=True)
class StageSpec:
    """One intermediate resolution and how its image is refined at the
    next finer level.

    ``d1`` is the angular group size used to build this level's target
    sinogram (``None`` means equal to the detector factor; 1 for sparse-view
    data). ``interpolation``, ``region_size``, ``max_iterations``,
    ``gaussian_sigma`` and ``hole_fill`` govern the refinement performed
    after upscaling *from* this stage.
    """

    size: int
    d1: int | None = None
    aggregate: str = "mean"
    angle_mode: str = "pick_second"
    interpolation: str = "nearest"
    region_size: int | None = None
    overlap: int = 0
    max_iterations: int = 5
    gaussian_sigma: float | None = None
    hole_fill: bool = False
    regions: tuple[Region, ...] | None = None


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[StageSpec, ...]
    final_size: int
    convergence_tol: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise InvalidArgument("a stage plan needs at least one stage")
        sizes = [s.size for s in self.stages] + [self.final_size]
        if sizes[-1] == sizes[-2]:
            sizes.pop()
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise InvalidArgument(f"stage sizes must strictly increase, got {sizes}")
        for s in self.stages:
            if self.final_size % s.size:
                raise InvalidArgument(f"stage size {s.size} does not divide {self.final_size}")
        if not self.convergence_tol > 0:
            raise InvalidArgument("convergence_tol must be > 0")


@dataclass(frozen=True)
class ReconConfig:
    """Settings for the single-stage and sparse-view strategies.

    ``region_size`` defaults to the reduced image size, giving ``d2**2``
    regions as in the full-view experiment.
    """

    downscale: DownscaleSpec = DownscaleSpec()
    encoding: EncodingSpec = radix2(1)
    solver: SolverConfig = SolverConfig()
    interpolation: str = "nearest"
    region_size: int | None = None
    overlap: int = 0
    max_iterations: int = 5
    convergence_tol: float = 1e-3
    gaussian_sigma: float | None = None
    hole_fill: bool = False
    regions: tuple[Region, ...] | None = None
    max_vars: int = 8000
    seed: int = 0
    sample: str = "sample"
    warm_start: bool = False

    def stage(self, size: int, d1: int) -> StageSpec:
        return StageSpec(
            size=size,
            d1=d1,
            aggregate=self.downscale.aggregate,
            angle_mode=self.downscale.angle_mode,
            interpolation=self.interpolation,
            region_size=self.region_size,
            overlap=self.overlap,
            max_iterations=self.max_iterations,
            gaussian_sigma=self.gaussian_sigma,
            hole_fill=self.hole_fill,
            regions=self.regions,
        )


# -- building blocks --------------------------------------------------------


def partition_regions(image_size: int, region_size: int, overlap: int = 0) -> list[Region]:
    """Row-major square tiles; with overlap they step by ``size - overlap``
    and the last row/column of tiles is clamped to the image edge."""
    if region_size < 1 or region_size > image_size:
        raise InvalidArgument(f"region size {region_size} invalid for image size {image_size}")
    if not 0 <= overlap < region_size:
        raise InvalidArgument(f"overlap must be in [0, {region_size}), got {overlap}")
    if overlap == 0 and image_size % region_size:
        raise InvalidArgument(f"image size {image_size} not divisible by region size {region_size}")
    step = region_size - overlap
    starts = list(range(0, image_size - region_size + 1, step))
    if starts[-1] != image_size - region_size:
        starts.append(image_size - region_size)
    return [Region(r, c, region_size, region_size) for r in starts for c in starts]


def convergence_check(generated: Sinogram, target: Sinogram, tol: float) -> bool:
    """True iff ``||gen - target|| / max(||target||, eps) <= tol``."""
    g = generated.values if isinstance(generated, Sinogram) else np.asarray(generated)
    t = target.values if isinstance(target, Sinogram) else np.asarray(target)
    if g.shape != t.shape:
        raise InvalidArgument(f"sinogram shapes differ: {g.shape} vs {t.shape}")
    return relative_residual(g, t) <= tol


def relative_residual(generated, target) -> float:
    g = generated.values if isinstance(generated, Sinogram) else np.asarray(generated)
    t = target.values if isinstance(target, Sinogram) else np.asarray(target)
    return float(np.linalg.norm(g - t) / max(np.linalg.norm(t), _EPS))


def _quantize_levels(px: np.ndarray, levels) -> np.ndarray:
    lv = np.sort(np.asarray(levels, dtype=float))
    idx = np.clip(np.searchsorted(lv, px), 1, max(lv.size - 1, 1))
    if lv.size == 1:
        return np.full(px.shape, lv[0])
    lo, hi = lv[idx - 1], lv[idx]
    return np.where(px - lo <= hi - px, lo, hi)


def hole_fill(image, levels) -> Image:
    """Replace isolated dots.

    A pixel is a dot when all 8 surrounding pixels share one level that
    differs from its own; it then takes that level. Only pixels with a full
    neighbourhood are considered. Comparisons use values snapped to
    ``levels``; untouched pixels keep their original values.
    """
    px = np.asarray(image, dtype=float)
    q = _quantize_levels(px, levels)
    h, w = q.shape
    out = px.copy()
    if h < 3 or w < 3:
        return Image(out)
    centre = q[1:-1, 1:-1]
    ref = q[:-2, :-2]
    same = np.ones_like(centre, dtype=bool)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            if dr == 1 and dc == 1:
                continue
            same &= q[dr : dr + h - 2, dc : dc + w - 2] == ref
    dots = same & (centre != ref)
    out[1:-1, 1:-1][dots] = ref[dots]
    return Image(out)


def _solve_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def refine_region(
    current_image,
    region: Region,
    target_sino: Sinogram,
    geometry: Geometry,
    encoding: EncodingSpec,
    solver,
    *,
    seed: int = 0,
    iteration: int = 1,
    label: str = "",
    sample: str = "",
    warm_start: bool = False,
) -> tuple[np.ndarray, RefinementRecord]:
    """Re-solve ``region`` with everything else fixed.

    ``solver`` is a backend callable (see :meth:`SolverConfig.make`). Returns
    a new pixel array (the input is not modified) and the ledger record.
    A region no ray crosses is left unchanged and recorded as degenerate.
    """
    px = np.array(current_image, dtype=float)
    label = label or f"({region.row0},{region.col0})"
    try:
        problem = build_region_qubo(px, region, target_sino, geometry, encoding)
    except DegenerateProblemError:
        return px, RefinementRecord(
            iteration, label, 0.0, 0.0, 0.0, sample, geometry.image_size, 0, "degenerate"
        )
    initial = None
    if warm_start:
        from .encoding import quantize
        from .qubo import encode_region

        initial = encode_region(quantize(px[region.slices()], encoding), encoding)
    t0 = time.perf_counter()
    res = solver(problem, seed, initial) if initial is not None else solver(problem, seed)
    runtime = time.perf_counter() - t0
    px[region.slices()] = decode_solution(res.bits, problem, encoding, (region.height, region.width))
    rec = RefinementRecord(
        iteration,
        label,
        problem.target_min,
        res.energy,
        runtime,
        sample,
        geometry.image_size,
        problem.n_vars,
    )
    return px, rec


# -- engine -----------------------------------------------------------------


def _target_for(sino: Sinogram, size: int, d1: int, aggregate: str, angle_mode: str) -> Sinogram:
    d2 = sino.geometry.image_size // size
    if d2 == 1 and d1 == 1:
        return sino
    return downscale_full_view(sino, DownscaleSpec(d1, d2, aggregate, angle_mode))


def _initial_reconstruction(target, encoding, solver, seed, max_vars, sample, ledger):
    g = target.geometry
    n = g.image_size
    n_vars = n * n * encoding.bits
    if n_vars > max_vars:
        raise CapacityError(
            f"whole-image QUBO at {n}x{n} needs {n_vars} variables, budget is {max_vars}"
        )
    px, rec = refine_region(
        np.zeros((n, n)),
        Region(0, 0, n, n),
        target,
        g,
        encoding,
        solver,
        seed=_solve_seed(seed, n, 0, 0),
        iteration=0,
        label="init",
        sample=sample,
    )
    ledger.append(rec)
    return px


def _refine_level(px, target, stage: StageSpec, prev_size, encoding, solver, cfg, ledger, history):
    g = target.geometry
    n = g.image_size
    if stage.regions is not None:
        regions = list(stage.regions)
    else:
        regions = partition_regions(n, stage.region_size or prev_size, stage.overlap)
    levels = encoding.levels()
    converged = False
    for it in range(1, stage.max_iterations + 1):
        if it > 1:
            if stage.hole_fill:
                px = hole_fill(px, levels).pixels
            if stage.gaussian_sigma:
                px = gaussian_filter(px, stage.gaussian_sigma).pixels
        for ri, region in enumerate(regions):
            px, rec = refine_region(
                px,
                region,
                target,
                g,
                encoding,
                solver,
                seed=_solve_seed(cfg.seed, n, it, ri),
                iteration=it,
                label=f"S{ri + 1}",
                sample=cfg.sample,
                warm_start=cfg.warm_start,
            )
            ledger.append(rec)
            log.info(
                "level %d iter %d %s: target %.6f achieved %.6f gap %.3g",
                n, it, rec.region, rec.target_min, rec.achieved, rec.abs_gap,
            )
        resid = relative_residual(radon(px, g), target)
        history.append({"level": n, "iteration": it, "residual": resid})
        if resid <= cfg.convergence_tol:
            converged = True
            break
    return px, converged


@dataclass(frozen=True)
class _EngineCfg:
    seed: int
    sample: str
    convergence_tol: float
    warm_start: bool


def _run(sino: Sinogram, plan: StagePlan, encoding, solver_cfg, seed, max_vars, sample, warm_start):
    N = sino.geometry.image_size
    if plan.final_size != N:
        raise InvalidArgument(f"plan targets {plan.final_size} but sinogram is for {N}x{N}")
    solver = solver_cfg.make()
    cfg = _EngineCfg(seed, sample, plan.convergence_tol, warm_start)
    ledger: list[RefinementRecord] = []
    history: list[dict] = []
    levels_converged = {}

    first = plan.stages[0]
    d1 = first.d1 if first.d1 is not None else N // first.size
    px = _initial_reconstruction(
        _target_for(sino, first.size, d1, first.aggregate, first.angle_mode),
        encoding, solver, seed, max_vars, sample, ledger,
    )
    for k, stage in enumerate(plan.stages):
        nxt_stage = plan.stages[k + 1] if k + 1 < len(plan.stages) else None
        nxt = nxt_stage.size if nxt_stage else N
        if nxt == stage.size:
            continue
        if nxt_stage:
            nd1 = nxt_stage.d1 if nxt_stage.d1 is not None else N // nxt
            target = _target_for(sino, nxt, nd1, nxt_stage.aggregate, nxt_stage.angle_mode)
        else:
            target = sino
        px = upscale_image(px, nxt, stage.interpolation).pixels
        px, ok = _refine_level(px, target, stage, stage.size, encoding, solver, cfg, ledger, history)
        levels_converged[nxt] = ok
        if not ok:
            log.info("level %d stopped at iteration cap without converging", nxt)

    lv = tuple(encoding.levels())
    img = Image(px, levels=lv if np.all(np.isin(px, lv)) else None)
    img.meta.update(converged=levels_converged, history=history)
    return img, ledger


def multi_stage_reconstruct(
    sino_full: Sinogram,
    plan: StagePlan,
    encoding: EncodingSpec = radix2(1),
    solver: SolverConfig = SolverConfig(),
    seed: int = 0,
    max_vars: int = 8000,
    sample: str = "sample",
    warm_start: bool = False,
):
    """Coarse-to-fine reconstruction through ``plan.stages`` up to the
    sinogram's own resolution. Returns ``(image, ledger)``."""
    return _run(sino_full, plan, encoding, solver, seed, max_vars, sample, warm_start)


def single_stage_reconstruct(sino_full: Sinogram, config: ReconConfig):
    """Reduce by ``config.downscale``, reconstruct the small image as one
    QUBO, upscale once and refine region by region."""
    N = sino_full.geometry.image_size
    d1, d2 = config.downscale.d1, config.downscale.d2
    if N % d2:
        raise InvalidArgument(f"image size {N} not divisible by d2={d2}")
    plan = StagePlan((config.stage(N // d2, d1),), N, config.convergence_tol)
    return _run(
        sino_full, plan, config.encoding, config.solver, config.seed,
        config.max_vars, config.sample, config.warm_start,
    )


def check_sparse_params(N: int, N1: int, d: int, n: int, N_full: int | None = None) -> None:
    """Validate sparse-view sizes: ``N`` final side, ``N1`` measured angles,
    ``d`` detector factor, ``n`` reduced side, ``N_full`` dense angle count."""
    if min(N, N1, d, n) < 1:
        raise InvalidArgument("all sizes must be positive")
    if N % d or N // d != n:
        raise InvalidArgument(f"n={n} must equal N/d = {N}/{d}")
    if N_full is not None and not N1 < N_full:
        raise InvalidArgument(f"sparse view needs fewer angles than the dense {N_full}, got {N1}")


def sparse_view_reconstruct(sino_sparse: Sinogram, config: ReconConfig, n_full_angles: int | None = None):
    """Same as :func:`single_stage_reconstruct` but the angular axis is never
    reduced (``1 x d`` detector patches only); angles may be non-uniform."""
    g = sino_sparse.geometry
    d = config.downscale.d2
    N = g.image_size
    if N % d:
        raise InvalidArgument(f"image size {N} not divisible by d={d}")
    check_sparse_params(N, g.n_angles, d, N // d, n_full_angles)
    cfg = replace(config, downscale=replace(config.downscale, d1=1))
    plan = StagePlan((cfg.stage(N // d, 1),), N, cfg.convergence_tol)
    return _run(
        sino_sparse, plan, cfg.encoding, cfg.solver, cfg.seed,
        cfg.max_vars, cfg.sample, cfg.warm_start,
    )
