import math
from pathlib import Path

import numpy as np
import pytest

from dpextend.mechanism import PartialMechanism, measured_epsilon
from dpextend.spaces import HypothesisSet, explicit_space

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def random_metric(rng: np.random.Generator, n: int):
    """Shortest-path metric of a random weighted complete graph."""
    if rng.random() < 0.3:
        w = rng.integers(1, 4, size=(n, n)).astype(float)
    else:
        w = rng.uniform(0.2, 3.0, size=(n, n))
    w = np.minimum(w, w.T)
    np.fill_diagonal(w, 0.0)
    for k in range(n):
        w = np.minimum(w, w[:, k : k + 1] + w[k : k + 1, :])
    return explicit_space([f"d{i}" for i in range(n)], w)


def random_private_mechanism(rng, space, h_size: int, n_out: int, eps: float) -> PartialMechanism:
    """Exponential mechanism with a 1-Lipschitz score, so eps-DP on all of space.

    Score of output w at dataset D is d(D, c_w) + b_w for a random center c_w.
    """
    n = len(space)
    members = sorted(rng.choice(n, size=h_size, replace=False).tolist())
    centers = rng.integers(0, n, size=n_out)
    offsets = rng.uniform(0, 2, size=n_out)
    d = space.matrix()
    score = d[np.ix_(members, centers)] + offsets[None, :]
    logits = -(eps / 2) * score
    logits -= logits.max(axis=1, keepdims=True)
    table = np.exp(logits)
    table /= table.sum(axis=1, keepdims=True)
    return PartialMechanism(space, [f"o{j}" for j in range(n_out)], HypothesisSet.of(space, members), table)


def random_instance(rng: np.random.Generator):
    """Random (mechanism, eps) with the mechanism eps-DP on its hypothesis set.

    eps is either the measured (tightest) level or a random looser one.
    """
    n = int(rng.integers(2, 11))
    space = random_metric(rng, n)
    h_size = int(rng.integers(1, n + 1))
    n_out = int(rng.integers(1, 9))
    eps_gen = float(rng.uniform(0.05, 3.0))
    m = random_private_mechanism(rng, space, h_size, n_out, eps_gen)
    eps_star = measured_epsilon(m).epsilon
    eps = eps_star if rng.random() < 0.6 else eps_star * float(rng.uniform(1.0, 2.0))
    return m, eps


@pytest.fixture
def worked_instance():
    space = explicit_space(["0", "1", "2"], [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    h = HypothesisSet.of(space, [0, 1])
    m = PartialMechanism(space, ["a", "b"], h, [[0.6, 0.4], [0.52, 0.48]])
    return m, math.log(1.2)
