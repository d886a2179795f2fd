"""Local QUBO backends: exhaustive enumeration, simulated annealing and
greedy single-flip descent.

Every backend returns a :class:`SolveResult` whose energy is recomputed with
:func:`qtomo.qubo.evaluate_energy`, never taken from an incremental tally.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, InvalidArgument
from .qubo import QuboProblem, evaluate_energy

EXHAUSTIVE_MAX_VARS = 24


@dataclass
class SolveResult:
    bits: np.ndarray
    energy: float
    solver_id: str
    seed: int = 0
    runtime_s: float = 0.0
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AnnealParams:
    """Geometric inverse-temperature schedule, one beta per sweep.

    ``sweeps=None`` means ``200 * n_vars`` full sweeps.
    """

    sweeps: int | None = None
    restarts: int = 8
    beta_min: float = 0.1
    beta_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.sweeps is not None and self.sweeps < 1:
            raise InvalidArgument("sweeps must be >= 1")
        if self.restarts < 1:
            raise InvalidArgument("restarts must be >= 1")
        if not 0 < self.beta_min < self.beta_max:
            raise InvalidArgument("need 0 < beta_min < beta_max")

    def n_sweeps(self, n_vars: int) -> int:
        return self.sweeps if self.sweeps is not None else 200 * max(n_vars, 1)

    def betas(self, n_vars: int) -> np.ndarray:
        return np.geomspace(self.beta_min, self.beta_max, self.n_sweeps(n_vars))


def _better(e1: float, b1: np.ndarray, e0: float, b0: np.ndarray | None) -> bool:
    """Lower energy wins; exact ties go to the lexicographically smaller string."""
    if b0 is None or e1 < e0:
        return True
    if e1 > e0:
        return False
    diff = np.flatnonzero(b1 != b0)
    return diff.size > 0 and b1[diff[0]] < b0[diff[0]]


# -- exhaustive -------------------------------------------------------------


def solve_exhaustive(problem: QuboProblem, chunk_bits: int = 14) -> SolveResult:
    """Global minimum by enumeration; ties go to the lexicographically
    smallest bitstring (variable 0 most significant)."""
    n = problem.n_vars
    if n > EXHAUSTIVE_MAX_VARS:
        raise CapacityError(f"exhaustive solver limited to {EXHAUSTIVE_MAX_VARS} vars, got {n}")
    t0 = time.perf_counter()
    if n == 0:
        return SolveResult(np.zeros(0, np.uint8), 0.0, "exhaustive", 0, time.perf_counter() - t0)
    Q = problem.dense()
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n
    step = 1 << min(chunk_bits, n)
    best_e, best_k = np.inf, -1
    for start in range(0, total, step):
        k = np.arange(start, min(start + step, total), dtype=np.int64)
        X = ((k[:, None] >> shifts[None, :]) & 1).astype(float)
        E = np.einsum("ki,ij,kj->k", X, Q, X)
        j = int(np.argmin(E))
        # chunks ascend in k, so strict < keeps the earliest (lexicographic) tie
        if E[j] < best_e:
            best_e, best_k = E[j], int(k[j])
    bits = ((best_k >> shifts) & 1).astype(np.uint8)
    return SolveResult(
        bits, evaluate_energy(problem, bits), "exhaustive", 0, time.perf_counter() - t0
    )


# -- annealing kernels ------------------------------------------------------


@njit(cache=True)
def _local_fields(indptr, indices, data, x):
    n = x.size
    f = np.zeros(n)
    for i in range(n):
        if x[i]:
            for k in range(indptr[i], indptr[i + 1]):
                f[indices[k]] += data[k]
    return f


@njit(cache=True)
def _anneal(indptr, indices, data, diag, betas, x0, seed):
    np.random.seed(seed)
    n = x0.size
    x = x0.copy()
    f = _local_fields(indptr, indices, data, x)
    e = 0.0
    for i in range(n):
        if x[i]:
            e += diag[i] + 0.5 * f[i]
    best_e = e
    best_x = x.copy()
    for beta in betas:
        for i in range(n):
            delta = (diag[i] + f[i]) * (1 - 2 * x[i])
            if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                x[i] = 1 - x[i]
                e += delta
                s = 1.0 if x[i] else -1.0
                for k in range(indptr[i], indptr[i + 1]):
                    f[indices[k]] += s * data[k]
                if e < best_e:
                    best_e = e
                    best_x[:] = x
    return best_x


@njit(cache=True)
def _descend(indptr, indices, data, diag, x0):
    x = x0.copy()
    f = _local_fields(indptr, indices, data, x)
    n = x.size
    changed = True
    while changed:
        changed = False
        for i in range(n):
            delta = (diag[i] + f[i]) * (1 - 2 * x[i])
            if delta < 0.0:
                x[i] = 1 - x[i]
                s = 1.0 if x[i] else -1.0
                for k in range(indptr[i], indptr[i + 1]):
                    f[indices[k]] += s * data[k]
                changed = True
    return x


def polish_greedy(problem: QuboProblem, bits) -> SolveResult:
    """Single-bit-flip descent (in-order sweeps) to a 1-flip local optimum."""
    x0 = np.asarray(bits, dtype=np.uint8)
    if x0.shape != (problem.n_vars,):
        raise InvalidArgument(f"expected {problem.n_vars} bits, got {x0.shape}")
    t0 = time.perf_counter()
    start = evaluate_energy(problem, x0)
    x = _descend(*problem.adjacency(), x0.copy()) if problem.n_vars else x0.copy()
    e = evaluate_energy(problem, x)
    if e > start:
        # rounding can only matter at the last ulp; never return something worse
        x, e = x0.copy(), start
    return SolveResult(x, e, "greedy", 0, time.perf_counter() - t0)


def solve_sa(
    problem: QuboProblem,
    params: AnnealParams = AnnealParams(),
    polish: bool = False,
    initial=None,
) -> SolveResult:
    """Simulated annealing with ``params.restarts`` independent restarts.

    Restart ``r`` uses seed ``params.seed + r`` and starts from uniform random
    bits, except that ``initial`` (if given) replaces the start of restart 0.
    The best result over restarts wins (energy, then lexicographic order).
    """
    t0 = time.perf_counter()
    n = problem.n_vars
    if n == 0:
        return SolveResult(np.zeros(0, np.uint8), 0.0, "sa", params.seed, 0.0)
    adj = problem.adjacency()
    betas = params.betas(n)
    best_e, best_x = np.inf, None
    for r in range(params.restarts):
        seed = (params.seed + r) % (2**32)
        rng = np.random.default_rng(seed)
        if r == 0 and initial is not None:
            x0 = np.asarray(initial, dtype=np.uint8).copy()
            if x0.shape != (n,):
                raise InvalidArgument(f"initial state must have {n} bits")
        else:
            x0 = rng.integers(0, 2, n).astype(np.uint8)
        x = _anneal(*adj, betas, x0, seed)
        if polish:
            x = _descend(*adj, x)
        e = evaluate_energy(problem, x)
        e0 = evaluate_energy(problem, x0)
        if e0 < e:
            x, e = x0, e0
        if _better(e, x, best_e, best_x):
            best_e, best_x = e, x
    if best_e > 0.0:
        best_x, best_e = np.zeros(n, np.uint8), 0.0
    return SolveResult(
        best_x, best_e, "sa+greedy" if polish else "sa", params.seed, time.perf_counter() - t0
    )


# -- backend selection ------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Which backend to use and how; ``make()`` turns it into a callable
    ``backend(problem, seed, initial=None) -> SolveResult``."""

    name: str = "sa"
    sweeps: int | None = None
    restarts: int = 8
    beta_min: float = 0.1
    beta_max: float = 10.0
    polish: bool = True
    time_limit_s: float = 10.0
    url: str | None = None
    token_env: str = "QTOMO_SOLVER_TOKEN"

    def __post_init__(self):
        if self.name not in ("exhaustive", "sa", "greedy", "remote"):
            raise InvalidArgument(f"unknown solver {self.name!r}")

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.name == "sa":
            d.update(
                sweeps=self.sweeps,
                restarts=self.restarts,
                beta_min=self.beta_min,
                beta_max=self.beta_max,
                polish=self.polish,
            )
        if self.name == "remote":
            d.update(url=self.url, time_limit_s=self.time_limit_s)
        return d

    def make(self):
        if self.name == "exhaustive":
            return lambda problem, seed=0, initial=None: solve_exhaustive(problem)
        if self.name == "greedy":

            def greedy(problem, seed=0, initial=None):
                start = np.zeros(problem.n_vars, np.uint8) if initial is None else initial
                return polish_greedy(problem, start)

            return greedy
        if self.name == "remote":
            from .remote import EndpointConfig, solve_remote

            endpoint = EndpointConfig.from_env(url=self.url, time_limit_s=self.time_limit_s)
            return lambda problem, seed=0, initial=None: solve_remote(problem, endpoint)

        def sa(problem, seed=0, initial=None):
            params = AnnealParams(self.sweeps, self.restarts, self.beta_min, self.beta_max, seed)
            return solve_sa(problem, params, polish=self.polish, initial=initial)

        return sa
