"""Loopback QUBO service speaking the remote wire protocol.

Solves with the exhaustive backend (falling back to annealing above its size
guard). ``fault`` injects misbehaviour for client conformance tests:

- ``"wrong_length"``: drops the last bit of the answer
- ``"bad_energy"``: reports an energy that does not match the bits
- ``"malformed"``: replies with non-JSON text
- ``"server_error"``: always answers HTTP 503

Run standalone with ``python -m qtomo.mock_service --port 8765``.
"""

from __future__ import annotations

import argparse
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import QtomoError
from .remote import payload_problem
from .solver import EXHAUSTIVE_MAX_VARS, AnnealParams, solve_exhaustive, solve_sa

FAULTS = (None, "wrong_length", "bad_energy", "malformed", "server_error")


class _Handler(BaseHTTPRequestHandler):
    server_version = "qtomo-mock/0.1"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send(self, code: int, body: bytes, ctype="application/json"):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        srv = self.server
        srv.requests += 1
        if self.path.rstrip("/") != "/solve":
            return self._send(404, b'{"error": "not found"}')
        if srv.token and self.headers.get("Authorization") != f"Bearer {srv.token}":
            return self._send(401, b'{"error": "unauthorized"}')
        if srv.fault == "server_error":
            return self._send(503, b'{"error": "unavailable"}')
        try:
            length = int(self.headers.get("Content-Length", 0))
            problem = payload_problem(json.loads(self.rfile.read(length)))
        except (ValueError, QtomoError) as exc:
            return self._send(400, json.dumps({"error": str(exc)}).encode())
        t0 = time.perf_counter()
        if problem.n_vars <= EXHAUSTIVE_MAX_VARS:
            res = solve_exhaustive(problem)
        else:
            res = solve_sa(problem, AnnealParams(sweeps=1000, restarts=4), polish=True)
        bits = [int(b) for b in res.bits]
        energy = res.energy
        if srv.fault == "malformed":
            return self._send(200, b"this is not json", "text/plain")
        if srv.fault == "wrong_length":
            bits = bits[:-1]
        if srv.fault == "bad_energy":
            energy = energy - 1.0 - abs(energy)
        body = {"bits": bits, "energy": energy, "runtime_s": time.perf_counter() - t0}
        self._send(200, json.dumps(body).encode())


class MockSolverService:
    """Context manager running the service on a background thread.

    >>> with MockSolverService() as svc:
    ...     url = svc.url
    """

    def __init__(self, host="127.0.0.1", port=0, fault=None, token=None):
        if fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}")
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.fault = fault
        self.httpd.token = token
        self.httpd.requests = 0
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def requests(self) -> int:
        return self.httpd.requests

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--fault", choices=[f for f in FAULTS if f])
    args = ap.parse_args(argv)
    svc = MockSolverService(args.host, args.port, args.fault)
    print(f"serving on {svc.url}", flush=True)
    try:
        svc.httpd.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
