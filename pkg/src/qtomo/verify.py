"""Self-checks run by ``qtomo verify``: small instances with known answers."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .encoding import radix2, unit_step
from .projector import Geometry, Region, radon, system_matrix
from .qubo import build_region_qubo, decode_solution, encode_region, evaluate_energy
from .report import dose_reduction
from .solver import AnnealParams, solve_exhaustive, solve_sa

LEVELS = ("tiny", "small")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    runtime_s: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}"


def _random_case(rng, size, region_size, n_angles, encoding):
    levels = encoding.levels()
    img = rng.choice(levels, size=(size, size))
    r0, c0 = rng.integers(0, size - region_size + 1, 2)
    region = Region(int(r0), int(c0), region_size, region_size)
    g = Geometry.uniform(size, n_angles)
    return img, region, g, radon(img, g)


def check_identity(rng, trials, size=4, region_size=2, n_angles=6):
    """Bits of the true region evaluate to the analytic minimum."""
    worst = 0.0
    for k in range(trials):
        enc = radix2(1) if k % 2 == 0 else unit_step(2)
        img, region, g, sino = _random_case(rng, size, region_size, n_angles, enc)
        p = build_region_qubo(img, region, sino, g, enc)
        e = evaluate_energy(p, encode_region(img[region.slices()], enc))
        worst = max(worst, abs(e - p.target_min) / max(1.0, abs(p.target_min)))
    return worst <= 1e-6, f"max rel err {worst:.2e}"


def check_exhaustive(rng, trials, size=8, region_size=3, n_angles=8):
    """Enumeration finds the analytic minimum and decodes to the truth."""
    worst, wrong = 0.0, 0
    enc = radix2(1)
    for _ in range(trials):
        img, region, g, sino = _random_case(rng, size, region_size, n_angles, enc)
        p = build_region_qubo(img, region, sino, g, enc)
        res = solve_exhaustive(p)
        worst = max(worst, abs(res.energy - p.target_min) / max(1.0, abs(p.target_min)))
        got = decode_solution(res.bits, p, enc, (region_size, region_size))
        wrong += not np.array_equal(got, img[region.slices()])
    return worst <= 1e-9 and wrong == 0, f"max rel err {worst:.2e}, {wrong} wrong argmin"


def check_sa(rng, trials, size=8, region_size=3, n_angles=8):
    """Annealing reaches the enumerated optimum on 9-variable problems."""
    misses = 0
    for k in range(trials):
        img, region, g, sino = _random_case(rng, size, region_size, n_angles, radix2(1))
        p = build_region_qubo(img, region, sino, g, radix2(1))
        exact = solve_exhaustive(p).energy
        got = solve_sa(p, AnnealParams(sweeps=200, restarts=4, seed=k)).energy
        misses += got > exact + 1e-9 * max(1.0, abs(exact))
    return misses == 0, f"{misses}/{trials} above optimum"


def check_projector(rng, trials, size=6, n_angles=5):
    """Linearity and equality with the explicit system matrix."""
    g = Geometry.uniform(size, n_angles)
    A = system_matrix(g).toarray()
    worst = 0.0
    for _ in range(trials):
        x, y = rng.random((2, size, size))
        a, b = rng.normal(size=2)
        lhs = radon(a * x + b * y, g).values
        rhs = a * radon(x, g).values + b * radon(y, g).values
        worst = max(worst, np.abs(lhs - rhs).max(), np.abs(radon(x, g).values.ravel() - A @ x.ravel()).max())
    return worst <= 1e-9, f"max abs err {worst:.2e}"


def check_dose(rng, trials):
    ok = dose_reduction(50, 500) == 90.0 and dose_reduction(7, 7) == 0.0
    return ok, "dose(50, 500) = 90.0"


CHECKS = {
    "ground-truth identity": check_identity,
    "exhaustive equivalence": check_exhaustive,
    "annealer vs enumeration": check_sa,
    "projector linearity": check_projector,
    "dose formula": check_dose,
}


def run_checks(level: str = "tiny", seed: int = 0) -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    trials = 5 if level == "tiny" else 25
    out = []
    for name, fn in CHECKS.items():
        rng = np.random.default_rng([seed, len(out)])
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng, trials)
        except Exception as exc:  # a crash is a failed check, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
