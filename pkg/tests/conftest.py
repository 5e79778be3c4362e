import numpy as np
import pytest

from sphereqp import ProblemInstance, SymMatrix


def example_hard():
    """diag(-1, 1), f = (0, -1.8), r = 1: f has no weight on the negative eigenvector."""
    return ProblemInstance(SymMatrix.diag([-1.0, 1.0]), [0.0, -1.8], 1.0)


def example_easy():
    """diag(-1, 1), f = (0, -3), r = 1: root of psi at sigma = 2."""
    return ProblemInstance(SymMatrix.diag([-1.0, 1.0]), [0.0, -3.0], 1.0)


def spd_instance(n, seed, scale=0.1):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    Q = B @ B.T / n + np.eye(n)
    f = scale * rng.standard_normal(n)
    return ProblemInstance(SymMatrix.from_dense(Q), f, 1.0 + rng.uniform())


def random_instance(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return ProblemInstance(SymMatrix.from_dense(A + A.T), rng.standard_normal(n), 1.0 + rng.uniform())


@pytest.fixture
def hard_example():
    return example_hard()


@pytest.fixture
def easy_example():
    return example_easy()
