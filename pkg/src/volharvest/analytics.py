"""Closed-form rebalancing analytics for two-asset binomial and Gaussian markets.

Every wealth product is evaluated in log space; a year of daily factors close
to one loses precision when multiplied directly.

The Gaussian growth rates (``log_growth_asset``, ``log_growth_balanced`` and
friends) are second-order expansions, returned exactly as the expansion reads.
With gross-return drifts (mu near 1) they carry a constant offset relative to
``E log R``; with net drifts they approximate the log growth of net returns.
Differences between strategies are offset-free either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Literal

from .errors import (
    DegenerateMarketError,
    InfeasibleCorrelationError,
    ParameterError,
    SingularCovarianceError,
)

# slack for rounding in the beta formulas, not for infeasible inputs
_BETA_SLACK = 1e-15


@dataclass(frozen=True)
class JointBernoulli:
    """Joint law of two Bernoulli(p) drivers.

    ``beta1`` is P[both up], ``beta2`` is P[exactly one up] and ``beta3`` is
    P[both down]. The single-up mass splits evenly between (1, 0) and (0, 1).
    """

    beta1: float
    beta2: float
    beta3: float

    @property
    def marginal(self) -> float:
        return self.beta1 + 0.5 * self.beta2


def joint_bernoulli(p: float, rho: float) -> JointBernoulli:
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    q = 1.0 - p
    shared = p * q * rho
    beta1 = shared + p * p
    beta3 = shared + q * q
    beta2 = 2.0 * p * q * (1.0 - rho)
    for name, value in (("beta1", beta1), ("beta2", beta2), ("beta3", beta3)):
        if value < -_BETA_SLACK or value > 1.0 + _BETA_SLACK:
            raise InfeasibleCorrelationError(
                f"rho={rho} is infeasible for p={p}: {name}={value:.6g} outside [0, 1]"
            )
    clip = lambda v: min(max(v, 0.0), 1.0)  # noqa: E731
    return JointBernoulli(clip(beta1), clip(beta2), clip(beta3))


def feasible_rho_range(p: float) -> tuple[float, float]:
    """Smallest and largest correlation two Bernoulli(p) drivers can have."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    q = 1.0 - p
    return -min(p, q) / max(p, q), 1.0


@dataclass(frozen=True)
class BinomialParams:
    """Two assets returning ``mu`` or ``mu + r`` each period.

    Set ``paper_normalized`` to demand ``mu + r/2 == 1``, i.e. a zero-drift
    game with symmetric swings.
    """

    p: float
    mu: float
    r: float
    rho: float = 0.0
    steps: int = 250
    paper_normalized: bool = False

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        if not self.r > 0.0:
            raise ParameterError(f"r must be positive, got {self.r}")
        if not self.mu - self.r > 0.0:
            raise ParameterError(
                f"mu - r must be positive so wealth stays positive (mu={self.mu}, r={self.r})"
            )
        if int(self.steps) != self.steps or self.steps < 0:
            raise ParameterError(f"steps must be a non-negative integer, got {self.steps}")
        if self.paper_normalized and abs(self.mu + 0.5 * self.r - 1.0) >= 1e-12:
            raise ParameterError(
                f"normalization requires mu + r/2 = 1, got {self.mu + 0.5 * self.r!r}"
            )
        joint_bernoulli(self.p, self.rho)

    @property
    def joint(self) -> JointBernoulli:
        return joint_bernoulli(self.p, self.rho)


@dataclass(frozen=True)
class GaussianParams:
    """Two assets with gross returns ``mu_i + sigma_i * X_i``, Corr(X1, X2) = rho."""

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float = 0.0
    steps: int = 250

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ParameterError("volatilities must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [-1, 1], got {self.rho}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ParameterError(f"steps must be a non-negative integer, got {self.steps}")

    @classmethod
    def symmetric(cls, mu: float, sigma: float, rho: float = 0.0, steps: int = 250):
        return cls(mu, mu, sigma, sigma, rho, steps)


@dataclass(frozen=True)
class KellyInputs:
    mu1: float
    mu2: float
    cov11: float
    cov12: float
    cov22: float

    def __post_init__(self):
        if self.cov11 <= 0 or self.cov22 <= 0:
            raise SingularCovarianceError("variances must be positive")
        if self.determinant <= 0:
            raise SingularCovarianceError(
                f"covariance determinant must be positive, got {self.determinant:.6g}"
            )

    @property
    def determinant(self) -> float:
        return self.cov11 * self.cov22 - self.cov12 * self.cov12

    @classmethod
    def from_vols(cls, mu1, mu2, sigma1, sigma2, rho):
        return cls(mu1, mu2, sigma1 * sigma1, rho * sigma1 * sigma2, sigma2 * sigma2)


# ---------------------------------------------------------------------------
# Binomial game
# ---------------------------------------------------------------------------

def fair_game_median(r: float, rounds: int) -> float:
    """Median wealth after ``rounds`` even-odds bets winning or losing ``r``."""
    if not 0.0 < r < 1.0:
        raise ParameterError(f"r must lie in (0, 1), got {r}")
    if rounds < 0 or rounds % 2:
        raise ParameterError(f"rounds must be even and non-negative, got {rounds}")
    return math.exp(0.5 * rounds * math.log1p(-r * r))


def imbalanced_modal_value(params: BinomialParams) -> float:
    """Most likely terminal wealth when holding a single asset."""
    p, mu, r, m = params.p, params.mu, params.r, params.steps
    return math.exp(m * (p * math.log(mu + r) + (1.0 - p) * math.log(mu)))


def balanced_modal_value(params: BinomialParams) -> float:
    """Most likely terminal wealth of the 50/50 rebalanced portfolio."""
    mu, r, m = params.mu, params.r, params.steps
    jb = params.joint
    log_w = (
        jb.beta1 * math.log(mu + r)
        + jb.beta2 * math.log(mu + 0.5 * r)
        + jb.beta3 * math.log(mu)
    )
    return math.exp(m * log_w)


def modal_ratio(params: BinomialParams) -> float:
    """Imbalanced over balanced modal value; below one whenever the drivers can disagree.

    Only meaningful for normalized (zero-drift) games, where it reduces to
    ``((mu + r) * mu) ** (beta2 * M / 2)``.
    """
    if not params.paper_normalized:
        raise ParameterError("modal_ratio requires a normalized game (paper_normalized=True)")
    log_imb = math.log(imbalanced_modal_value(params))
    log_bal = math.log(balanced_modal_value(params))
    return math.exp(log_imb - log_bal)


def modal_ratio_closed_form(params: BinomialParams) -> float:
    jb = params.joint
    return math.exp(0.5 * jb.beta2 * params.steps * math.log((params.mu + params.r) * params.mu))


def binomial_expected_value(params: BinomialParams) -> float:
    """Expected terminal wealth, shared by every constant-mix strategy."""
    return math.exp(params.steps * math.log(params.mu + params.r * params.p))


Game = Literal["balanced", "imbalanced"]


def _exact(x: float) -> Fraction:
    # decimal-string route keeps 0.98 as 98/100 rather than its binary expansion
    return Fraction(repr(x))


def outcome_distribution(
    mu: float, r: float, p: float, rho: float, rounds: int, game: Game
) -> dict[Fraction, Fraction]:
    """Exact distribution of terminal wealth, by enumeration of every driver path.

    Returns a mapping wealth -> probability in rational arithmetic. The
    number of driver paths is 4**rounds, so keep ``rounds`` small.
    """
    if rounds < 0:
        raise ParameterError("rounds must be non-negative")
    if game not in ("balanced", "imbalanced"):
        raise ParameterError(f"unknown game {game!r}")
    jb = joint_bernoulli(p, rho)
    mu_q, r_q, p_q, rho_q = _exact(mu), _exact(r), _exact(p), _exact(rho)
    q_q = 1 - p_q
    beta1 = p_q * q_q * rho_q + p_q * p_q
    beta3 = p_q * q_q * rho_q + q_q * q_q
    half2 = (1 - beta1 - beta3) / 2
    assert abs(float(beta1) - jb.beta1) < 1e-12
    law = {(1, 1): beta1, (1, 0): half2, (0, 1): half2, (0, 0): beta3}

    dist: dict[Fraction, Fraction] = {}
    for path in product(law, repeat=rounds):
        wealth, prob = Fraction(1), Fraction(1)
        for b1, b2 in path:
            prob *= law[(b1, b2)]
            if game == "imbalanced":
                wealth *= mu_q + r_q * b1
            else:
                wealth *= mu_q + r_q * Fraction(b1 + b2, 2)
        if prob:
            dist[wealth] = dist.get(wealth, Fraction(0)) + prob
    return dist


@dataclass(frozen=True)
class OutcomeRow:
    game: str
    rounds: int
    above: Fraction
    even: Fraction
    below: Fraction

    @property
    def at_least(self) -> Fraction:
        return self.above + self.even

    def as_floats(self) -> tuple[float, float, float, float]:
        return float(self.above), float(self.even), float(self.below), float(self.at_least)


def outcome_table(rounds: int, game: Game, r: float = 0.02) -> OutcomeRow:
    """P[R > 1], P[R = 1], P[R < 1] for the fair coin game with swing ``r``.

    Two independent even-odds games; the table is independent of ``r``.
    """
    if rounds not in (1, 2):
        raise ParameterError("the outcome table covers rounds 1 and 2")
    dist = outcome_distribution(1 - r, 2 * r, 0.5, 0.0, rounds, game)
    above = sum((pr for w, pr in dist.items() if w > 1), Fraction(0))
    even = sum((pr for w, pr in dist.items() if w == 1), Fraction(0))
    below = sum((pr for w, pr in dist.items() if w < 1), Fraction(0))
    return OutcomeRow(game, rounds, above, even, below)


def table1() -> list[OutcomeRow]:
    return [outcome_table(n, g) for n in (1, 2) for g in ("imbalanced", "balanced")]


# ---------------------------------------------------------------------------
# Gaussian growth expansions
# ---------------------------------------------------------------------------

def rebalancing_bonus(sigma: float, rho: float) -> float:
    """Growth-rate gain of the 50/50 rebalanced pair over either asset alone."""
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    if not -1.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [-1, 1], got {rho}")
    return 0.25 * sigma * sigma * (1.0 - rho)


def log_growth_asset(mu: float, sigma: float) -> float:
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    return mu - 0.5 * sigma * sigma


def log_growth_balanced(theta: float, params: GaussianParams) -> float:
    """Second-order log growth of a portfolio rebalanced to (theta, 1 - theta)."""
    if not 0.0 <= theta <= 1.0:
        raise ParameterError(f"theta must lie in [0, 1], got {theta}")
    s1, s2 = params.sigma1, params.sigma2
    u = 1.0 - theta
    return (
        theta * params.mu1
        + u * params.mu2
        - 0.5 * (theta * theta * s1 * s1 + u * u * s2 * s2)
        - theta * u * s1 * s2 * params.rho
    )


def optimal_theta(params: GaussianParams) -> float:
    """Weight on asset 1 maximizing ``log_growth_balanced`` over [0, 1]."""
    s1, s2, rho = params.sigma1, params.sigma2, params.rho
    curvature = s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * rho
    if curvature <= 0.0:
        raise DegenerateMarketError(
            "growth is linear in theta (identical volatilities, perfect correlation)"
        )
    theta = (params.mu1 - params.mu2 + s2 * s2 - s1 * s2 * rho) / curvature
    return min(max(theta, 0.0), 1.0)


def kelly_weights(inputs: KellyInputs) -> tuple[float, float]:
    """Growth-optimal holdings ``inv(Sigma) @ mu`` via the explicit 2x2 inverse."""
    det = inputs.determinant
    w1 = (inputs.cov22 * inputs.mu1 - inputs.cov12 * inputs.mu2) / det
    w2 = (inputs.cov11 * inputs.mu2 - inputs.cov12 * inputs.mu1) / det
    return w1, w2


def kelly_residual(inputs: KellyInputs, weights: tuple[float, float]) -> float:
    w1, w2 = weights
    e1 = inputs.cov11 * w1 + inputs.cov12 * w2 - inputs.mu1
    e2 = inputs.cov12 * w1 + inputs.cov22 * w2 - inputs.mu2
    return math.hypot(e1, e2)


@dataclass(frozen=True)
class ShannonGrowth:
    growth: float
    in_window: bool
    asset_growth: float


def shannon_growth(mu1: float, sigma1: float) -> ShannonGrowth:
    """Growth of a 50/50 mix of a volatile asset (net drift ``mu1``) with zero-rate cash.

    The window ``sigma1**2 / 4 < mu1 <= sigma1**2 / 2`` is where the mix grows
    although the asset alone does not.
    """
    if not sigma1 > 0:
        raise ParameterError("sigma1 must be positive")
    var = sigma1 * sigma1
    growth = 0.5 * mu1 - 0.125 * var
    in_window = 0.5 * var >= mu1 > 0.25 * var
    return ShannonGrowth(growth, in_window, log_growth_asset(mu1, sigma1))
