"""Reversible mass-action reaction networks.

A single reversible reaction between ``q`` species,

    sum_i reactants_i * A_i  <->  sum_i products_i * A_i,

is normalized so that each species carries one effective rate constant.
This module computes that normalization, the conserved linear combinations,
the unique positive steady state compatible with given initial means, and
the sharp kinetic decay constant of the well-mixed dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ReactionNetwork",
    "SteadyState",
    "build_network",
    "normalize_rates",
    "conservation_basis",
    "steady_state",
    "optimal_rate",
    "mass_action",
    "is_two_by_two",
]


def _as_stoichiometry(coeffs, name: str) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise ValueError(f"{name} must contain nonnegative integers")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class ReactionNetwork:
    """Stoichiometry and normalized rates of one reversible reaction.

    Attributes
    ----------
    reactants, products : int arrays, shape (q,)
        Stoichiometric coefficients of the forward and backward side.
    rate_forward, rate_backward : float
        Raw rate constants of the two directions.
    scaling : float array, shape (q,)
        Per-species rescaling factors, chosen so that
        ``prod(scaling ** (reactants - products)) == rate_backward / rate_forward``.
    species_rates : float array, shape (q,)
        Effective per-species rate constants of the rescaled system.
    """

    reactants: np.ndarray
    products: np.ndarray
    rate_forward: float
    rate_backward: float
    scaling: np.ndarray
    species_rates: np.ndarray

    def __post_init__(self):
        change = self.products - self.reactants
        if np.any(change == 0):
            raise ValueError("every species must change across the reaction "
                             "(catalyzer species are not supported)")
        if not (np.any(change > 0) and np.any(change < 0)):
            raise ValueError("mass conservation requires species on both "
                             "sides: products - reactants must change sign")
        if self.rate_forward <= 0 or self.rate_backward <= 0:
            raise ValueError("rate constants must be positive")
        if np.any(self.species_rates <= 0):
            raise ValueError("normalized species rates must be positive")
        ratio = float(np.prod(self.scaling ** (self.reactants - self.products)))
        target = self.rate_backward / self.rate_forward
        if abs(ratio - target) > 1e-12 * target:
            raise ValueError("scaling factors do not reproduce the rate ratio")

    @property
    def n_species(self) -> int:
        return int(self.reactants.size)

    @property
    def signed_rates(self) -> np.ndarray:
        """species_rates * (products - reactants); the stoichiometric drift."""
        return self.species_rates * (self.products - self.reactants)


@dataclass(frozen=True)
class SteadyState:
    """Unique positive steady concentrations for given initial means.

    ``line_parameter`` locates the steady state on the affine line of
    conserved means; ``product_residual`` is how far the detailed-balance
    product condition is from being met, ``|prod(s_i^(p_i - r_i)) - 1|``.
    """

    concentrations: np.ndarray
    line_parameter: float
    product_residual: float


def normalize_rates(reactants, products, rate_forward: float,
                    rate_backward: float) -> tuple[np.ndarray, np.ndarray]:
    """Pick species rescalings absorbing the backward/forward rate ratio.

    The ratio condition leaves the rescaling underdetermined; we fix all
    factors to 1 except the first, which solves the product condition on
    its own (always possible because species 0 changes across the
    reaction).

    Returns
    -------
    scaling, species_rates : float arrays, shape (q,)
    """
    reactants = _as_stoichiometry(reactants, "reactants")
    products = _as_stoichiometry(products, "products")
    if reactants.shape != products.shape:
        raise ValueError("reactants and products must have the same length")
    if np.any(reactants == products):
        raise ValueError("every species must change across the reaction "
                         "(catalyzer species are not supported)")
    if rate_forward <= 0 or rate_backward <= 0:
        raise ValueError("rate constants must be positive")

    q = reactants.size
    scaling = np.ones(q)
    exponent = reactants[0] - products[0]
    scaling[0] = (rate_backward / rate_forward) ** (1.0 / exponent)
    species_rates = scaling * rate_forward / np.prod(scaling ** reactants)
    return scaling, species_rates


def build_network(reactants, products, rate_forward: float = 1.0,
                  rate_backward: float = 1.0) -> ReactionNetwork:
    """Validate stoichiometry and assemble a normalized network."""
    scaling, species_rates = normalize_rates(reactants, products,
                                             rate_forward, rate_backward)
    return ReactionNetwork(
        reactants=_as_stoichiometry(reactants, "reactants"),
        products=_as_stoichiometry(products, "products"),
        rate_forward=float(rate_forward),
        rate_backward=float(rate_backward),
        scaling=scaling,
        species_rates=species_rates,
    )


def conservation_basis(network: ReactionNetwork) -> np.ndarray:
    """Basis of the (q-1)-dimensional space of conserved combinations.

    Every returned row ``z`` satisfies ``z @ network.signed_rates == 0``;
    along such combinations the kinetics cancel and only diffusion acts.
    The basis pairs species 0 with each other species, mirroring the
    pairwise differences used to eliminate variables from the system.
    """
    w = network.signed_rates
    q = network.n_species
    basis = np.zeros((q - 1, q))
    basis[:, 0] = 1.0 / w[0]
    for j in range(q - 1):
        basis[j, j + 1] = -1.0 / w[j + 1]
    return basis


def steady_state(network: ReactionNetwork, means) -> SteadyState:
    """Solve for the unique positive steady state with the given means.

    The steady state lies on the affine line ``means + t * signed_rates``;
    the detailed-balance product condition becomes ``phi(t) = 1`` where
    ``log phi`` is strictly increasing between the two blow-up endpoints,
    so the root is found by bisection on ``log phi``.  Bisection (rather
    than Newton) converges unconditionally near the endpoints.
    """
    means = np.asarray(means, dtype=float)
    if means.shape != (network.n_species,):
        raise ValueError("means must have one entry per species")
    if np.any(means <= 0):
        raise ValueError("all initial means must be strictly positive")

    w = network.signed_rates
    exponents = (network.products - network.reactants).astype(float)
    pos = w > 0
    neg = w < 0
    lower = float(np.max(-means[pos] / w[pos]))
    upper = float(np.min(-means[neg] / w[neg]))
    if not lower < upper:
        raise RuntimeError("empty steady-state bracket; invalid network state")
    span = upper - lower
    pad = 1e-13 * span

    def log_phi(t: float) -> float:
        return float(exponents @ np.log(means + t * w))

    lo, hi = lower + pad, upper - pad
    if not (log_phi(lo) < 0.0 < log_phi(hi)):
        raise RuntimeError("steady-state bracket does not straddle the root")
    t = 0.5 * (lo + hi)
    for _ in range(200):
        t = 0.5 * (lo + hi)
        value = log_phi(t)
        if abs(value) <= 1e-12:
            break
        if value < 0.0:
            lo = t
        else:
            hi = t
        if hi - lo <= 1e-14 * span:
            t = 0.5 * (lo + hi)
            break

    concentrations = means + t * w
    residual = abs(float(np.expm1(log_phi(t))))
    return SteadyState(concentrations=concentrations, line_parameter=t,
                       product_residual=residual)


def optimal_rate(network: ReactionNetwork, steady: SteadyState) -> float:
    """Sharp exponential decay constant of the well-mixed kinetics.

    Equals ``prod(s_i^reactants_i) * sum_i k_i (p_i - r_i)^2 / s_i`` at the
    steady state ``s``; the well-mixed trajectory approaches ``s`` exactly
    at this rate.
    """
    s = steady.concentrations
    change = network.products - network.reactants
    return float(np.prod(s ** network.reactants)
                 * np.sum(network.species_rates * change.astype(float) ** 2 / s))


def mass_action(network: ReactionNetwork, v) -> float:
    """Net mass-action rate: forward monomial minus backward monomial."""
    v = np.asarray(v, dtype=float)
    if v.shape != (network.n_species,):
        raise ValueError("v must have one entry per species")
    if not np.all(np.isfinite(v)):
        raise ValueError("v must be finite")
    return float(np.prod(v ** network.reactants) - np.prod(v ** network.products))


def is_two_by_two(network: ReactionNetwork) -> bool:
    """True for A + B <-> C + D with unit effective rates (canonical order)."""
    return (network.n_species == 4
            and np.array_equal(network.reactants, [1, 1, 0, 0])
            and np.array_equal(network.products, [0, 0, 1, 1])
            and bool(np.allclose(network.species_rates, 1.0, rtol=1e-12, atol=0.0)))
