import numpy as np
import pytest

from etcabs.bounds import build_embedding, compute_bounds
from etcabs.partition import isotropic_cover
from etcabs.plant import Plant
from etcabs.quotient import build_quotient, to_timed_automaton
from etcabs.reachability import compute_flow_pipes, transitions

# numerical example: alpha = 0.05, N_conv = 5, l = 100, m_bar = 10, sigma_bar = 1 s
A_EX = [[0.0, 1.0], [-2.0, 3.0]]
B_EX = [[0.0], [1.0]]
K_EX = [[1.0, -4.0]]
ALPHA_EX = 0.05


@pytest.fixture(scope="session")
def plant():
    return Plant(A_EX, B_EX, K_EX, ALPHA_EX)


@pytest.fixture(scope="session")
def tables(plant):
    return build_embedding(plant, 1.0, 100, 5)


@pytest.fixture(scope="session")
def partition():
    return isotropic_cover(2, 10)


@pytest.fixture(scope="session")
def abstraction(plant, tables, partition):
    bounds, tau_prime = compute_bounds(plant, tables, partition)
    pipes = compute_flow_pipes(plant, partition, bounds, 0.01)
    trans = transitions(partition, pipes)
    qs = build_quotient(partition, bounds, trans, "all")
    return {"bounds": bounds, "tau_prime": tau_prime, "pipes": pipes,
            "transitions": trans, "quotient": qs, "automaton": to_timed_automaton(qs)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_directions(rng, count, n=2):
    X = rng.standard_normal((count, n))
    return X / np.linalg.norm(X, axis=1)[:, None]


def sample_cone(rng, region, count):
    """Random unit directions inside a planar sector."""
    lo, hi = region.angular_box[0]
    th = rng.uniform(lo, hi, count)
    return np.column_stack([np.cos(th), np.sin(th)])
