"""Shared fixtures: deterministic RNG, random-system factories, and a
session-wide log of every certificate the suite produces."""

import numpy as np
import pytest

from dissipacert._linalg import controllability_matrix, observability_matrix
from dissipacert.certify import add_certificate_observer, remove_certificate_observer
from dissipacert.lti import StateSpaceModel, simulate
from dissipacert.microgrid import CASE_STUDY_REL_TOL, outage_scenario, run_scenario
from dissipacert.network import SubsystemData, certify_network
from dissipacert.signals import Trajectory


def pytest_collection_modifyitems(items):
    """Run session-sweep tests last so session-wide logs are complete."""
    sweeps = [
        item for item in items if item.get_closest_marker("session_sweep")
    ]
    for item in sweeps:
        items.remove(item)
        items.append(item)


@pytest.fixture(scope="session", autouse=True)
def certificate_log():
    """Collect every certificate any test produces, in emission order.

    Installed autouse at session scope so it is armed before the first
    certificate-producing fixture materializes.
    """
    records = []
    add_certificate_observer(records.append)
    yield records
    remove_certificate_observer(records.append)


@pytest.fixture
def rng():
    return np.random.default_rng(0x5D15)


def random_system(rng, orders=(2, 6), channels=(1, 3), radius=(0.4, 0.92),
                  input_scale=1.0):
    """Random square MIMO system, rejection-sampled until it is Schur
    stable, controllable, and observable."""
    low, high = orders
    while True:
        n = int(rng.integers(low, high + 1))
        m = int(rng.integers(channels[0], channels[1] + 1))
        a = rng.normal(size=(n, n))
        a *= rng.uniform(*radius) / max(np.abs(np.linalg.eigvals(a)).max(), 1e-12)
        b = input_scale * rng.normal(size=(n, m))
        c = rng.normal(size=(m, n))
        if (np.linalg.matrix_rank(controllability_matrix(a, b)) == n
                and np.linalg.matrix_rank(observability_matrix(a, c)) == n):
            return StateSpaceModel(a=a, b=b, c=c)


def minimal_lag(model):
    """Smallest window depth whose observability stack has full rank."""
    n = model.a.shape[0]
    stack = [model.c]
    for depth in range(1, n + 1):
        if np.linalg.matrix_rank(np.vstack(stack)) == n:
            return depth
        stack.append(stack[-1] @ model.a)
    return n


def white_noise_record(model, rng, length=None):
    """Open-loop record (u, y, lag) from an i.i.d. Gaussian input."""
    n, m = model.a.shape[0], model.b.shape[1]
    lag = minimal_lag(model)
    if length is None:
        length = 40 * (lag + n)
    u = Trajectory(rng.normal(size=(m, length)), dt=1.0)
    _, y = simulate(model, np.zeros(n), u)
    return u, y, lag


@pytest.fixture
def make_system():
    return random_system


@pytest.fixture
def make_record():
    return white_noise_record


@pytest.fixture(scope="session")
def baseline_run():
    """The default outage scenario, simulated once for the whole session."""
    return run_scenario(outage_scenario(4))


@pytest.fixture(scope="session")
def case_study_runs(baseline_run):
    runs = {4: baseline_run}
    for fault in (2, 3):
        runs[fault] = run_scenario(outage_scenario(fault))
    return runs


@pytest.fixture(scope="session")
def case_study_certificates(case_study_runs):
    """Network certificates for both windows of all three outage runs."""
    certificates = {}
    for fault in sorted(case_study_runs):
        run = case_study_runs[fault]
        for window_name, windows in (("pre", run.pre), ("post", run.post)):
            records = [
                SubsystemData(u=w.u, y=w.y, lag=w.lag, order=w.order)
                for w in windows
            ]
            certificates[fault, window_name] = certify_network(
                records, run.graph, tolerance=1e-3, rel_tol=CASE_STUDY_REL_TOL
            )
    return certificates
