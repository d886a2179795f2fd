import numpy as np
import pytest
import requests

from qtomo.errors import IntegrityError, InvalidArgument, ProtocolError, TransportError
from qtomo.mock_service import MockSolverService
from qtomo.qubo import QuboProblem
from qtomo.remote import EndpointConfig, payload_problem, problem_payload, solve_remote
from qtomo.solver import SolverConfig, solve_exhaustive


def problem(seed, n=6):
    r = np.random.default_rng(seed)
    c = {(i, j): r.normal() for i in range(n) for j in range(i, n) if r.random() < 0.6}
    return QuboProblem.from_dict(c, n)


def endpoint(url, **kw):
    kw.setdefault("backoff_s", 0.01)
    kw.setdefault("timeout_s", 5)
    return EndpointConfig(url, **kw)


@pytest.fixture(scope="module")
def service():
    with MockSolverService() as svc:
        yield svc


def test_payload_round_trip():
    p = problem(0)
    assert payload_problem(problem_payload(p, 1.0)).as_dict() == p.as_dict()


def test_payload_rejects_garbage():
    with pytest.raises(ProtocolError):
        payload_problem({"n_vars": 2})


@pytest.mark.parametrize("seed", range(5))
def test_matches_exhaustive(service, seed):
    p = problem(seed)
    res = solve_remote(p, endpoint(service.url))
    ref = solve_exhaustive(p)
    assert np.array_equal(res.bits, ref.bits) and res.energy == ref.energy


def test_bearer_token(monkeypatch):
    with MockSolverService(token="s3cret") as svc:
        monkeypatch.setenv("QTOMO_SOLVER_TOKEN", "s3cret")
        assert solve_remote(problem(1), EndpointConfig.from_env(svc.url)).bits.size == 6
        with pytest.raises(ProtocolError):
            solve_remote(problem(1), endpoint(svc.url, token="wrong"))


def test_from_env_needs_url(monkeypatch):
    monkeypatch.delenv("QTOMO_SOLVER_URL", raising=False)
    with pytest.raises(InvalidArgument):
        EndpointConfig.from_env()


def test_solver_config_remote_backend(service, monkeypatch):
    monkeypatch.setenv("QTOMO_SOLVER_URL", service.url)
    p = problem(3)
    assert SolverConfig("remote").make()(p, 0).energy == solve_exhaustive(p).energy


def test_unreachable_host_is_transport_error():
    with MockSolverService() as svc:
        url = svc.url
    with pytest.raises(TransportError):
        solve_remote(problem(0), endpoint(url, attempts=2, timeout_s=1))


def test_server_errors_are_retried_then_transport_error():
    with MockSolverService(fault="server_error") as svc:
        with pytest.raises(TransportError):
            solve_remote(problem(0), endpoint(svc.url, attempts=3))
        assert svc.requests == 3


@pytest.mark.parametrize("fault", ["wrong_length", "malformed"])
def test_protocol_faults(fault):
    with MockSolverService(fault=fault) as svc:
        with pytest.raises(ProtocolError):
            solve_remote(problem(0), endpoint(svc.url))


def test_bad_energy_is_integrity_error():
    with MockSolverService(fault="bad_energy") as svc:
        with pytest.raises(IntegrityError):
            solve_remote(problem(0), endpoint(svc.url))


def test_unknown_path_is_404(service):
    assert requests.post(service.url + "/nope", json={}, timeout=5).status_code == 404
