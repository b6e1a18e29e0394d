"""Monte Carlo wealth ensembles for rebalanced and buy-and-hold strategies.

All strategies in one run read the same counter-addressed draws (common
random numbers), so pairwise comparisons are path-by-path. Paths are
processed in fixed-size chunks whose boundaries do not depend on the worker
count, which keeps results bit-identical for any ``workers`` value.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .analytics import (
    BinomialParams,
    GaussianParams,
    ShannonGrowth,
    log_growth_balanced,
    shannon_growth,
)
from .dynamics import SeedSpec, returns_from_uniforms, uniforms
from .errors import EmptyEnsembleError, ParameterError

CHUNK_PATHS = 256
_LOG_HALF = math.log(0.5)

Market = Union[BinomialParams, GaussianParams]


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Balanced:
    """Rebalance to (theta, 1 - theta) at the start of every period."""

    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ParameterError(f"theta must lie in [0, 1], got {self.theta}")

    @property
    def label(self) -> str:
        return f"balanced:{self.theta:g}"


@dataclass(frozen=True)
class Imbalanced:
    """Hold one asset outright."""

    asset: int = 1

    def __post_init__(self):
        if self.asset not in (1, 2):
            raise ParameterError(f"asset must be 1 or 2, got {self.asset}")

    @property
    def label(self) -> str:
        return f"imbalanced:{self.asset}"


@dataclass(frozen=True)
class InitialBalanced:
    """Split 50/50 once, then never trade."""

    @property
    def label(self) -> str:
        return "initial_balanced"


StrategySpec = Union[Balanced, Imbalanced, InitialBalanced]


def parse_strategy(text: str) -> StrategySpec:
    """Parse ``balanced[:theta]``, ``imbalanced[:asset]`` or ``initial_balanced``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower().replace("-", "_")
    try:
        if name == "balanced":
            return Balanced(float(arg) if arg else 0.5)
        if name == "imbalanced":
            return Imbalanced(int(arg) if arg else 1)
        if name == "initial_balanced" and not arg:
            return InitialBalanced()
    except ValueError as exc:
        raise ParameterError(f"bad strategy {text!r}: {exc}") from None
    raise ParameterError(f"unknown strategy {text!r}")


def _log_path(strategy: StrategySpec, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Cumulative log wealth, shape (n, steps); NaN from the ruin step onward."""
    with np.errstate(invalid="ignore", divide="ignore"):
        if isinstance(strategy, Balanced):
            t = strategy.theta
            rp = t * r1 + (1.0 - t) * r2
            return np.cumsum(np.log(np.where(rp > 0, rp, np.nan)), axis=1)
        if isinstance(strategy, Imbalanced):
            ra = r1 if strategy.asset == 1 else r2
            return np.cumsum(np.log(np.where(ra > 0, ra, np.nan)), axis=1)
        if isinstance(strategy, InitialBalanced):
            c1 = np.cumsum(np.log(np.where(r1 > 0, r1, np.nan)), axis=1)
            c2 = np.cumsum(np.log(np.where(r2 > 0, r2, np.nan)), axis=1)
            return np.logaddexp(c1, c2) + _LOG_HALF
    raise ParameterError(f"unsupported strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass
class PathEnsemble:
    """Terminal (and optionally per-step) wealth of surviving paths.

    Ruined paths, those that saw a non-positive gross return, are dropped
    from ``path_index``/``log_wealth`` and counted in ``ruin_count``.
    """

    strategy: StrategySpec
    n_paths: int
    steps: int
    master_seed: int
    path_index: np.ndarray
    log_wealth: np.ndarray
    ruin_count: int
    wealth_trajectories: np.ndarray | None = field(default=None, repr=False)

    @property
    def terminal_wealth(self) -> np.ndarray:
        return np.exp(self.log_wealth)


def _as_seed(seed) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


def _simulate(
    market: Market,
    strategies: Sequence[StrategySpec],
    n_paths: int,
    seed,
    checkpoints: Sequence[int] | None = None,
    keep_paths: bool = False,
    workers: int = 1,
):
    """Log wealth at each checkpoint for every path and strategy.

    Returns ``(paths, logs, trajectories)`` where ``logs[k]`` has shape
    (n_paths, len(checkpoints)) with NaN marking ruin.
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be at least 1")
    if workers < 1:
        raise ParameterError("workers must be at least 1")
    seed = _as_seed(seed)
    steps = market.steps
    if checkpoints is None:
        checkpoints = [steps]
    checkpoints = [int(c) for c in checkpoints]
    if any(c < 0 or c > steps for c in checkpoints):
        raise ParameterError("checkpoints must lie in [0, steps]")
    cols = np.asarray(checkpoints) - 1
    paths = seed.path_index + np.arange(n_paths, dtype=np.int64)
    bounds = [(i, min(i + CHUNK_PATHS, n_paths)) for i in range(0, n_paths, CHUNK_PATHS)]

    def run_chunk(bound):
        lo, hi = bound
        u = uniforms(seed.master_seed, paths[lo:hi], steps, seed.step_index)
        r1, r2 = returns_from_uniforms(market, u)
        del u
        logs, trajs = [], []
        for strategy in strategies:
            cum = _log_path(strategy, r1, r2)
            padded = np.concatenate([np.zeros((hi - lo, 1)), cum], axis=1)
            logs.append(padded[:, cols + 1])
            if keep_paths:
                trajs.append(padded)
        return logs, trajs

    if workers == 1 or len(bounds) == 1:
        results = [run_chunk(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, bounds))

    logs = [np.concatenate([res[0][k] for res in results]) for k in range(len(strategies))]
    trajs = None
    if keep_paths:
        trajs = [np.concatenate([res[1][k] for res in results]) for k in range(len(strategies))]
    return paths, logs, trajs


def _ensemble(strategy, market, seed, paths, log_col, traj) -> PathEnsemble:
    alive = ~np.isnan(log_col)
    return PathEnsemble(
        strategy=strategy,
        n_paths=len(paths),
        steps=market.steps,
        master_seed=_as_seed(seed).master_seed,
        path_index=paths[alive],
        log_wealth=log_col[alive],
        ruin_count=int((~alive).sum()),
        wealth_trajectories=None if traj is None else np.exp(traj[alive]),
    )


def run_strategies(
    market: Market,
    strategies: Sequence[StrategySpec],
    n_paths: int,
    seed,
    keep_paths: bool = False,
    workers: int = 1,
) -> list[PathEnsemble]:
    """Run several strategies on common random numbers."""
    paths, logs, trajs = _simulate(market, strategies, n_paths, seed, None, keep_paths, workers)
    return [
        _ensemble(s, market, seed, paths, logs[k][:, 0], None if trajs is None else trajs[k])
        for k, s in enumerate(strategies)
    ]


def run_ensemble(
    market: Market,
    strategy: StrategySpec,
    n_paths: int,
    seed,
    keep_paths: bool = False,
    workers: int = 1,
) -> PathEnsemble:
    return run_strategies(market, [strategy], n_paths, seed, keep_paths, workers)[0]


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSummary:
    n: int
    ruin_count: int
    mean: float
    std_error: float
    median: float
    mode_estimate: float
    q05: float
    q25: float
    q75: float
    q95: float
    prob_below_one: float
    log_growth_mean: float
    log_growth_median: float


def fd_histogram(values: np.ndarray):
    """Histogram with Freedman-Diaconis bin width; returns (counts, edges).

    Collapses to a single zero-width bin when the interquartile range or
    the data range is zero.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    q25, q75 = np.quantile(values, [0.25, 0.75])
    width = 2.0 * (q75 - q25) * len(values) ** (-1.0 / 3.0)
    if hi == lo or width <= 0.0:
        return np.array([len(values)]), np.array([lo, hi])
    nbins = max(1, int(math.ceil((hi - lo) / width)))
    return np.histogram(values, bins=nbins, range=(lo, hi))


def summarize(ensemble: PathEnsemble) -> DistributionSummary:
    log_w = ensemble.log_wealth
    n = len(log_w)
    if n == 0:
        raise EmptyEnsembleError("no surviving paths to summarize")
    wealth = np.exp(log_w)
    q05, q25, q50, q75, q95 = np.quantile(wealth, [0.05, 0.25, 0.5, 0.75, 0.95])
    counts, edges = fd_histogram(log_w)
    top = int(np.argmax(counts))
    mode = math.exp(0.5 * (edges[top] + edges[top + 1]))
    steps = ensemble.steps
    growth = log_w / steps if steps else np.zeros_like(log_w)
    return DistributionSummary(
        n=n,
        ruin_count=ensemble.ruin_count,
        mean=float(wealth.mean()),
        std_error=float(wealth.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        median=float(np.median(wealth)),
        mode_estimate=mode,
        q05=float(q05),
        q25=float(q25),
        q75=float(q75),
        q95=float(q95),
        prob_below_one=float(np.mean(log_w < 0.0)),
        log_growth_mean=float(growth.mean()),
        log_growth_median=float(np.median(growth)),
    )


def density_points(ensemble: PathEnsemble):
    """Histogram density of terminal wealth (bin centres, density) on FD bins in log space."""
    counts, edges = fd_histogram(ensemble.log_wealth)
    lo, hi = np.exp(edges[:-1]), np.exp(edges[1:])
    centres = np.exp(0.5 * (edges[:-1] + edges[1:]))
    widths = hi - lo
    total = counts.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(widths > 0, counts / (total * widths), np.inf)
    return centres, density


# ---------------------------------------------------------------------------
# Paired comparisons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    label_a: str
    label_b: str
    n_compared: int
    ruined: int
    prob_a_ge_b: float
    mean_difference: float
    log_growth_differential: float
    log_growth_se: float
    summary_a: DistributionSummary
    summary_b: DistributionSummary


def paired_comparison(a: PathEnsemble, b: PathEnsemble) -> Comparison:
    """Compare two ensembles path-by-path on the paths where both survived."""
    if a.n_paths != b.n_paths or a.steps != b.steps or a.master_seed != b.master_seed:
        raise ParameterError("ensembles were not generated on common random numbers")
    common, ia, ib = np.intersect1d(a.path_index, b.path_index, return_indices=True)
    if len(common) == 0:
        raise EmptyEnsembleError("no path survived under both strategies")
    la, lb = a.log_wealth[ia], b.log_wealth[ib]
    diff = (la - lb) / a.steps if a.steps else np.zeros_like(la)
    n = len(common)
    return Comparison(
        label_a=a.strategy.label,
        label_b=b.strategy.label,
        n_compared=n,
        ruined=a.n_paths - n,
        prob_a_ge_b=float(np.mean(la >= lb)),
        mean_difference=float(np.mean(np.exp(la) - np.exp(lb))),
        log_growth_differential=float(diff.mean()),
        log_growth_se=float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        summary_a=summarize(a),
        summary_b=summarize(b),
    )


def compare_strategies(
    market: Market,
    a: StrategySpec,
    b: StrategySpec,
    n_paths: int,
    seed,
    workers: int = 1,
) -> Comparison:
    ens_a, ens_b = run_strategies(market, [a, b], n_paths, seed, workers=workers)
    return paired_comparison(ens_a, ens_b)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioPoint:
    steps: int
    median_ratio: float
    expected_ratio: float
    prob_first_ahead: float
    n_compared: int


def proposition1_experiment(
    template: GaussianParams,
    rho1: float,
    rho2: float,
    m_grid: Sequence[int],
    n_paths: int,
    seed,
    theta: float = 0.5,
    workers: int = 1,
) -> list[RatioPoint]:
    """Median wealth ratio of two rebalanced pairs differing only in correlation.

    Both markets read the same draws, so the ratio is taken path-by-path.
    ``expected_ratio`` is exp(M * growth gap) from the second-order expansion.
    """
    m_grid = [int(m) for m in m_grid]
    if rho1 > rho2:
        raise ParameterError("expected rho1 <= rho2")
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ParameterError("m_grid must be strictly increasing")
    horizon = max(m_grid)
    strategy = Balanced(theta)
    m1 = replace(template, rho=rho1, steps=horizon)
    m2 = replace(template, rho=rho2, steps=horizon)
    _, (log1,), _ = _simulate(m1, [strategy], n_paths, seed, m_grid, workers=workers)
    _, (log2,), _ = _simulate(m2, [strategy], n_paths, seed, m_grid, workers=workers)
    gap = log_growth_balanced(theta, m1) - log_growth_balanced(theta, m2)

    points = []
    for k, m in enumerate(m_grid):
        d = log1[:, k] - log2[:, k]
        d = d[~np.isnan(d)]
        if len(d) == 0:
            raise EmptyEnsembleError(f"every path ruined by step {m}")
        points.append(
            RatioPoint(
                steps=m,
                median_ratio=float(np.median(np.exp(d))),
                expected_ratio=math.exp(gap * m),
                prob_first_ahead=float(np.mean(d > 0)),
                n_compared=len(d),
            )
        )
    return points


@dataclass(frozen=True)
class ShannonDemo:
    comparison: Comparison
    analytic: ShannonGrowth
    balanced_median_log_growth: float
    asset_median_log_growth: float


def shannon_market(mu1: float, sigma1: float, steps: int) -> GaussianParams:
    """Volatile asset with net drift ``mu1`` next to zero-rate cash."""
    return GaussianParams(mu1=1.0 + mu1, mu2=1.0, sigma1=sigma1, sigma2=0.0, rho=0.0, steps=steps)


def shannon_demo(
    mu1: float, sigma1: float, steps: int, n_paths: int, seed, workers: int = 1
) -> ShannonDemo:
    """Rebalance 50/50 between a non-growing volatile asset and cash."""
    analytic = shannon_growth(mu1, sigma1)
    if not analytic.in_window:
        warnings.warn(
            f"(mu1={mu1}, sigma1={sigma1}) lies outside sigma^2/4 < mu1 <= sigma^2/2",
            stacklevel=2,
        )
    cmp = compare_strategies(
        shannon_market(mu1, sigma1, steps), Balanced(0.5), Imbalanced(1), n_paths, seed, workers
    )
    return ShannonDemo(
        comparison=cmp,
        analytic=analytic,
        balanced_median_log_growth=cmp.summary_a.log_growth_median,
        asset_median_log_growth=cmp.summary_b.log_growth_median,
    )


def jensen_gaps(x1: np.ndarray, x2: np.ndarray, thetas: Sequence[float]) -> np.ndarray:
    """log(t*x1 + (1-t)*x2) - (t*log x1 + (1-t)*log x2) per sample, shape (len(thetas), n).

    Evaluated as log(t*exp((1-t)*d) + (1-t)*exp(-t*d)) with d = log(x1/x2),
    which has no cancellation between two nearly equal logs; for |d| < 1e-3 a
    fourth-order series is used instead.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if np.any(x1 <= 0) or np.any(x2 <= 0):
        raise ParameterError("Jensen gaps need strictly positive returns")
    d = np.log(x1) - np.log(x2)
    small = np.abs(d) < 1e-3
    out = np.empty((len(thetas), len(x1)))
    for k, t in enumerate(thetas):
        t = float(t)
        v = t * (1.0 - t)
        big = np.log1p(t * np.expm1((1.0 - t) * d[~small]) + (1.0 - t) * np.expm1(-t * d[~small]))
        ds = d[small]
        d2 = ds * ds
        series = v * d2 * (0.5 + ds * (1.0 - 2.0 * t) / 6.0 + d2 * (1.0 - 6.0 * v) / 24.0)
        out[k, ~small] = big
        out[k, small] = series
    return out
