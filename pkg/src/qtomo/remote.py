"""HTTP client for a remote (hybrid annealer style) QUBO service.

Wire protocol, ``POST <url>/solve`` with JSON::

    request:  {"n_vars": int, "entries": [[i, j, coeff], ...], "time_limit_s": float}
    response: {"bits": [0|1, ...], "energy": float, "runtime_s": float}

The bearer token is read from ``QTOMO_SOLVER_TOKEN`` and the endpoint from
``QTOMO_SOLVER_URL`` unless given explicitly.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np
import requests

from .errors import IntegrityError, InvalidArgument, ProtocolError, TransportError
from .qubo import QuboProblem, evaluate_energy
from .solver import SolveResult

log = logging.getLogger(__name__)

URL_ENV = "QTOMO_SOLVER_URL"
TOKEN_ENV = "QTOMO_SOLVER_TOKEN"


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    token: str | None = None
    time_limit_s: float = 10.0
    timeout_s: float = 30.0
    attempts: int = 3
    backoff_s: float = 0.5
    rtol: float = 1e-6

    @classmethod
    def from_env(cls, url: str | None = None, **kw) -> "EndpointConfig":
        url = url or os.environ.get(URL_ENV)
        if not url:
            raise InvalidArgument(f"no solver URL given and {URL_ENV} is unset")
        return cls(url=url, token=os.environ.get(TOKEN_ENV), **kw)


def problem_payload(problem: QuboProblem, time_limit_s: float) -> dict:
    return {
        "n_vars": int(problem.n_vars),
        "entries": [
            [int(i), int(j), float(c)] for i, j, c in zip(problem.rows, problem.cols, problem.vals)
        ],
        "time_limit_s": float(time_limit_s),
    }


def payload_problem(payload: dict) -> QuboProblem:
    """Inverse of :func:`problem_payload` (used by services)."""
    try:
        n = int(payload["n_vars"])
        ent = payload["entries"]
        rows = [int(e[0]) for e in ent]
        cols = [int(e[1]) for e in ent]
        vals = [float(e[2]) for e in ent]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProtocolError(f"bad request payload: {exc}") from None
    return QuboProblem(n, rows, cols, vals)


def _post(endpoint: EndpointConfig, body: dict) -> dict:
    headers = {"Content-Type": "application/json"}
    if endpoint.token:
        headers["Authorization"] = f"Bearer {endpoint.token}"
    url = endpoint.url.rstrip("/") + "/solve"
    last = None
    for attempt in range(endpoint.attempts):
        if attempt:
            time.sleep(endpoint.backoff_s * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=endpoint.timeout_s)
        except requests.RequestException as exc:
            last = exc
            log.warning("solve request failed (attempt %d/%d): %s", attempt + 1, endpoint.attempts, exc)
            continue
        if resp.status_code >= 500:
            last = f"HTTP {resp.status_code}"
            log.warning("solver returned %s (attempt %d/%d)", last, attempt + 1, endpoint.attempts)
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"solver rejected request: HTTP {resp.status_code} {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError:
            raise ProtocolError("solver response is not JSON") from None
    raise TransportError(f"{url} unreachable after {endpoint.attempts} attempts: {last}")


def solve_remote(problem: QuboProblem, endpoint: EndpointConfig) -> SolveResult:
    """Send ``problem`` to the service; re-verify the returned energy locally."""
    t0 = time.perf_counter()
    data = _post(endpoint, problem_payload(problem, endpoint.time_limit_s))
    if not isinstance(data, dict):
        raise ProtocolError("solver response is not a JSON object")
    try:
        bits = np.asarray(data["bits"])
        reported = float(data["energy"])
        runtime = float(data.get("runtime_s", time.perf_counter() - t0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed solver response: {exc}") from None
    if bits.shape != (problem.n_vars,) or not np.all(np.isin(bits, (0, 1))):
        raise ProtocolError(
            f"expected {problem.n_vars} binary values, got shape {bits.shape}"
        )
    bits = bits.astype(np.uint8)
    energy = evaluate_energy(problem, bits)
    scale = max(abs(energy), abs(reported), 1.0)
    if abs(energy - reported) > endpoint.rtol * scale:
        raise IntegrityError(f"reported energy {reported} but bits evaluate to {energy}")
    return SolveResult(bits, energy, f"remote:{endpoint.url}", 0, runtime)
