"""End-to-end acceptance checks. Each test prints one PASS/FAIL line and the
terminal summary repeats them in order."""

import json
import time

import numpy as np

from qtomo.cli import main as cli_main
from qtomo.encoding import radix2, unit_step
from qtomo.errors import IntegrityError, ProtocolError, TransportError
from qtomo.mock_service import MockSolverService
from qtomo.phantom import disk_phantom, generate_shepp_logan
from qtomo.pipeline import ReconConfig, refine_region, single_stage_reconstruct, sparse_view_reconstruct
from qtomo.projector import Geometry, Region, radon
from qtomo.qubo import build_region_qubo, decode_solution, encode_region, evaluate_energy
from qtomo.remote import EndpointConfig, solve_remote
from qtomo.report import dose_reduction, pixel_accuracy
from qtomo.resample import DownscaleSpec, downscale_full_view
from qtomo.solver import SolverConfig, solve_exhaustive

DESK_SOLVER = SolverConfig("sa", sweeps=1000, restarts=4)


def desk_binary_config(seed=7):
    return ReconConfig(DownscaleSpec(2, 2), radix2(1), DESK_SOLVER, max_iterations=3, seed=seed)


def test_ground_truth_energy_identity(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        img = rng.integers(0, 2, (8, 8)).astype(float)
        r0, c0 = rng.integers(0, 5, 2)
        region = Region(int(r0), int(c0), 4, 4)
        g = Geometry.uniform(8, int(rng.integers(4, 12)))
        p = build_region_qubo(img, region, radon(img, g), g, radix2(1))
        e = evaluate_energy(p, encode_region(img[region.slices()], radix2(1)))
        worst = max(worst, abs(e - p.target_min) / abs(p.target_min))
    dt = time.perf_counter() - t0
    criterion(1, worst <= 1e-6 and dt < 10, f"max rel err {worst:.2e}, {dt:.2f} s")


def test_exhaustive_oracle_equivalence(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst, wrong = 0.0, 0
    for _ in range(20):
        img = rng.integers(0, 2, (8, 8)).astype(float)
        r0, c0 = rng.integers(0, 6, 2)
        region = Region(int(r0), int(c0), 3, 3)
        g = Geometry.uniform(8, 6)
        p = build_region_qubo(img, region, radon(img, g), g, radix2(1))
        res = solve_exhaustive(p)
        worst = max(worst, abs(res.energy - p.target_min) / abs(p.target_min))
        wrong += not np.array_equal(decode_solution(res.bits, p, radix2(1), (3, 3)), img[region.slices()])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and wrong == 0 and dt < 30
    criterion(2, ok, f"max rel err {worst:.2e}, {wrong}/20 wrong argmin, {dt:.2f} s")


def test_variable_count_structural_match(criterion):
    g = Geometry.uniform(100, 4)
    target = radon(np.ones((100, 100)), g)
    counts = {
        m: build_region_qubo(np.zeros((100, 100)), Region(0, 0, 50, 50), target, g, radix2(m)).n_vars
        for m in (1, 3)
    }
    criterion(3, counts == {1: 2500, 3: 7500}, f"variables {counts}")


def test_desk_binary_full_view(criterion):
    ph = generate_shepp_logan(32, "binary")
    P = radon(ph, Geometry.uniform(32, 32))
    t0 = time.perf_counter()
    img, ledger = single_stage_reconstruct(P, desk_binary_config())
    dt = time.perf_counter() - t0
    acc = pixel_accuracy(img, ph, (0, 1))
    regions = {r.region for r in ledger if r.iteration > 0}
    final_gap = ledger[-1].abs_gap
    iters = max(r.iteration for r in ledger)
    ok = acc >= 0.99 and final_gap <= 1e-6 and dt < 600 and iters <= 3 and len(regions) == 4
    criterion(4, ok, f"accuracy {acc:.4f}, final gap {final_gap:.2e}, {iters} iterations, {dt:.1f} s")


def test_desk_integer_sparse_view(criterion):
    ph = generate_shepp_logan(32, "integer", 4)
    P = radon(ph, Geometry.uniform(32, 16))
    cfg = ReconConfig(
        DownscaleSpec(1, 2),
        unit_step(3),
        SolverConfig("sa", sweeps=2000, restarts=4),
        max_iterations=2,
        gaussian_sigma=1.0,
        seed=7,
    )
    t0 = time.perf_counter()
    img, ledger = sparse_view_reconstruct(P, cfg, n_full_angles=32)
    dt = time.perf_counter() - t0
    acc = pixel_accuracy(img, ph, (0, 1, 2, 3))
    gaps = [r.abs_gap for r in ledger if r.iteration == 2]
    monotone = len(gaps) > 0 and all(b <= a for a, b in zip(gaps, gaps[1:]))
    ok = acc >= 0.97 and monotone and dt < 1200
    shown = ", ".join(f"{g:.3g}" for g in gaps)
    criterion(5, ok, f"accuracy {acc:.4f}, iteration-2 gaps [{shown}], {dt:.1f} s")


def test_path_length_correction(criterion):
    img = disk_phantom(64, 20.0).pixels
    g = Geometry.uniform(64, 32)
    coarse = img.reshape(32, 2, 32, 2).mean(axis=(1, 3))
    reduced = downscale_full_view(radon(img, g), DownscaleSpec(2, 2, "mean", "mean_projection"))
    direct = radon(coarse, reduced.geometry).values
    rel = np.sqrt(np.mean((direct - reduced.values) ** 2)) / np.sqrt(np.mean(direct**2))
    criterion(6, rel < 0.05, f"relative RMSE {rel:.4f}")


def test_dose_formula(criterion):
    d = dose_reduction(50, 500)
    criterion(7, d == 90.0, f"dose_reduction(50, 500) = {d!r}")


def test_determinism(criterion, tmp_path):
    manifest = {
        "sample": "binary32",
        "source": {"phantom": {"size": 32, "mode": "binary"}},
        "geometry": {"n_angles": 32},
        "strategy": "single",
        "downscale": {"d1": 2, "d2": 2},
        "encoding": {"mode": "radix2", "bits": 1},
        "solver": DESK_SOLVER.to_dict(),
        "refine": {"max_iterations": 3},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(manifest))
    for name in ("first", "second"):
        assert cli_main(["reconstruct", "--manifest", str(path), "--seed", "7", "--out-dir", str(tmp_path / name)]) == 0
    same = {
        f: (tmp_path / "first" / f).read_bytes() == (tmp_path / "second" / f).read_bytes()
        for f in ("image.txt", "ledger.csv")
    }
    criterion(8, all(same.values()), f"byte-identical {same}")


def test_locality(criterion):
    rng = np.random.default_rng(9)
    solvers = [
        SolverConfig("exhaustive").make(),
        SolverConfig("greedy").make(),
        SolverConfig("sa", sweeps=20, restarts=1).make(),
    ]
    encodings = [radix2(1), radix2(2), unit_step(2)]
    geometries = [Geometry.uniform(n, a) for n in (5, 6, 8) for a in (1, 3, 7)]
    touched = 0
    for k in range(1000):
        g = geometries[k % len(geometries)]
        n = g.image_size
        enc = encodings[int(rng.integers(3))]
        h, w = (int(v) for v in rng.integers(1, 4, 2))
        region = Region(int(rng.integers(0, n - h + 1)), int(rng.integers(0, n - w + 1)), h, w)
        img = rng.random((n, n)) * 3
        before = img.copy()
        target = radon(rng.random((n, n)) * 3, g)
        solver = solvers[k % 3] if h * w * enc.bits <= 24 else solvers[1 + k % 2]
        out, _ = refine_region(img, region, target, g, enc, solver, seed=k)
        mask = np.ones((n, n), bool)
        mask[region.slices()] = False
        touched += not np.array_equal(out[mask], before[mask]) or not np.array_equal(img, before)
    criterion(9, touched == 0, f"{touched}/1000 calls modified pixels outside the region")


def test_remote_conformance(criterion):
    rng = np.random.default_rng(10)
    problems = []
    for _ in range(10):
        img = rng.integers(0, 2, (6, 6)).astype(float)
        g = Geometry.uniform(6, 4)
        region = Region(int(rng.integers(0, 4)), int(rng.integers(0, 4)), 3, 3)
        problems.append(build_region_qubo(img, region, radon(img, g), g, radix2(1)))
    with MockSolverService() as svc:
        ep = EndpointConfig(svc.url, backoff_s=0.01, timeout_s=5)
        matches = 0
        for p in problems:
            got, ref = solve_remote(p, ep), solve_exhaustive(p)
            matches += bool(np.array_equal(got.bits, ref.bits) and got.energy == ref.energy)
    expected = {
        "server_error": TransportError,
        "wrong_length": ProtocolError,
        "malformed": ProtocolError,
        "bad_energy": IntegrityError,
    }
    surfaced = {}
    for fault, exc in expected.items():
        with MockSolverService(fault=fault) as svc:
            ep = EndpointConfig(svc.url, backoff_s=0.01, timeout_s=5)
            try:
                solve_remote(problems[0], ep)
                surfaced[fault] = "none"
            except (TransportError, ProtocolError, IntegrityError) as e:
                surfaced[fault] = type(e).__name__
    faults_ok = all(surfaced[f] == e.__name__ for f, e in expected.items())
    criterion(10, matches == 10 and faults_ok, f"{matches}/10 match exhaustive, faults {surfaced}")
