import numpy as np
import pytest

from rdlab.network import ReactionNetwork, build_network


@pytest.fixture(scope="session")
def two_by_two() -> ReactionNetwork:
    """A + B <-> C + D with unit rates."""
    return build_network([1, 1, 0, 0], [0, 0, 1, 1])


@pytest.fixture(scope="session")
def self_ionization() -> ReactionNetwork:
    """2 W <-> H + OH with unit rates."""
    return build_network([2, 0, 0], [0, 1, 1])


def random_network(rng: np.random.Generator, n_species: int | None = None,
                   coeff_max: int = 3, unit_rates: bool = False) -> ReactionNetwork:
    """Random valid stoichiometry: no catalyzers, both drift signs present."""
    while True:
        q = int(n_species or rng.integers(2, 6))
        alpha = rng.integers(0, coeff_max + 1, q)
        beta = rng.integers(0, coeff_max + 1, q)
        change = beta - alpha
        if np.all(change != 0) and (change > 0).any() and (change < 0).any():
            break
    if unit_rates:
        forward = backward = 1.0
    else:
        forward = float(10.0 ** rng.uniform(-0.5, 0.5))
        backward = float(10.0 ** rng.uniform(-0.5, 0.5))
    return build_network(alpha, beta, forward, backward)
