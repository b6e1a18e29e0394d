"""Two-asset historical backtests: daily rebalanced versus initial-balanced.

Input files are wide CSV: a ``date`` column (YYYY-MM-DD) followed by one
column per asset. Empty cells mean "no quote that day"; pairs are aligned
by inner join, never by interpolation.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParameterError, RuinError
from .simulation import Balanced, Imbalanced, InitialBalanced, StrategySpec

REPORT_COLUMNS = (
    "asset_a",
    "asset_b",
    "n_days",
    "ann_rebalanced",
    "ann_initial_balanced",
    "ann_differential",
    "turnover",
    "est_annual_cost_flat",
    "est_annual_cost_turnover",
)


@dataclass(frozen=True)
class PriceSeries:
    asset_id: str
    dates: tuple[dt.date, ...]
    prices: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise DataError(f"{self.asset_id}: dates and prices differ in length")
        if len(self.dates) < 2:
            raise DataError(f"{self.asset_id}: need at least 2 observations")
        if np.any(~(np.asarray(self.prices) > 0)):
            raise DataError(f"{self.asset_id}: prices must be positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.asset_id}: dates must be strictly increasing")


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    dates: tuple[dt.date, ...]
    returns: np.ndarray  # gross

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class CostModel:
    half_spread: float = 0.0
    trading_days_per_year: int = 250
    assumed_daily_vol: float = 0.0075

    def __post_init__(self):
        if self.half_spread < 0:
            raise ParameterError("half_spread must be non-negative")
        if self.trading_days_per_year <= 0:
            raise ParameterError("trading_days_per_year must be positive")


def estimate_annual_cost(cost: CostModel) -> float:
    """Flat yearly cost: two legs traded by one daily vol each day, at the half-spread."""
    return 2 * cost.trading_days_per_year * cost.assumed_daily_vol * cost.half_spread


def to_returns(prices: PriceSeries) -> ReturnSeries:
    p = np.asarray(prices.prices, dtype=np.float64)
    return ReturnSeries(prices.asset_id, tuple(prices.dates[1:]), p[1:] / p[:-1])


@dataclass(frozen=True)
class Aligned:
    a: ReturnSeries
    b: ReturnSeries
    dropped_a: tuple[dt.date, ...]
    dropped_b: tuple[dt.date, ...]


def align(a: ReturnSeries, b: ReturnSeries) -> Aligned:
    """Inner-join two return series on date, reporting what each side lost."""
    if len(a) == 0 or len(b) == 0:
        raise DataError("cannot align an empty series")
    common = sorted(set(a.dates) & set(b.dates))
    if not common:
        raise DataError(f"no common dates between {a.asset_id} and {b.asset_id}")
    keep = set(common)

    def restrict(s: ReturnSeries):
        mask = np.array([d in keep for d in s.dates])
        dropped = tuple(d for d in s.dates if d not in keep)
        return ReturnSeries(s.asset_id, tuple(common), s.returns[mask]), dropped

    ra, da = restrict(a)
    rb, db = restrict(b)
    return Aligned(ra, rb, da, db)


# ---------------------------------------------------------------------------
# Pair backtest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BacktestReport:
    asset_a: str
    asset_b: str
    n_days: int
    ann_rebalanced: float
    ann_initial_balanced: float
    ann_differential: float
    turnover: float
    est_annual_cost_flat: float
    est_annual_cost_turnover: float
    wealth_rebalanced: float
    wealth_initial_balanced: float
    net: bool = False

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def annualize(wealth: float, n_days: int, days_per_year: int = 250) -> float:
    return wealth ** (days_per_year / n_days) - 1.0


def _hold(r: np.ndarray) -> float:
    return math.exp(float(np.sum(np.log(r))))


def _run_leg(strategy, ra, rb, dates, half_spread):
    """Terminal wealth and summed |weight change| of one strategy."""
    if isinstance(strategy, InitialBalanced):
        return 0.5 * _hold(ra) + 0.5 * _hold(rb), 0.0
    if isinstance(strategy, Imbalanced):
        return _hold(ra if strategy.asset == 1 else rb), 0.0
    if not isinstance(strategy, Balanced):
        raise ParameterError(f"unsupported strategy {strategy!r}")

    theta = strategy.theta
    growth = theta * ra + (1.0 - theta) * rb
    bad = np.flatnonzero(growth <= 0)
    if bad.size:
        raise RuinError(f"non-positive portfolio return on {dates[bad[0]]}", dates[bad[0]])
    # weight on a drifts to theta*ra/growth; restoring it moves both legs by this much
    traded = 2.0 * theta * (1.0 - theta) * np.abs(ra - rb) / growth
    factors = growth
    if half_spread:
        factors = growth * (1.0 - half_spread * traded)
        bad = np.flatnonzero(factors <= 0)
        if bad.size:
            raise RuinError(f"costs exhausted the portfolio on {dates[bad[0]]}", dates[bad[0]])
    return _hold(factors), float(traded.sum())


def run_pair_backtest(
    a: ReturnSeries,
    b: ReturnSeries,
    strategy: StrategySpec = Balanced(0.5),
    cost: CostModel | None = None,
) -> BacktestReport:
    """Compare ``strategy`` with the 50/50 buy-and-hold benchmark on aligned series.

    With a cost model the rebalanced leg pays ``half_spread`` on each day's
    traded notional (net report); the benchmark never trades after
    inception, and that inception trade is not counted.
    """
    if a.dates != b.dates:
        raise DataError(f"{a.asset_id}/{b.asset_id}: series are not aligned; call align() first")
    n = len(a)
    if n == 0:
        raise DataError("no returns to backtest")
    days = cost.trading_days_per_year if cost else 250
    hs = cost.half_spread if cost else 0.0
    ra = np.asarray(a.returns, dtype=np.float64)
    rb = np.asarray(b.returns, dtype=np.float64)

    w_reb, turnover = _run_leg(strategy, ra, rb, a.dates, hs)
    w_init, _ = _run_leg(InitialBalanced(), ra, rb, a.dates, 0.0)
    ann_reb = annualize(w_reb, n, days)
    ann_init = annualize(w_init, n, days)
    return BacktestReport(
        asset_a=a.asset_id,
        asset_b=b.asset_id,
        n_days=n,
        ann_rebalanced=ann_reb,
        ann_initial_balanced=ann_init,
        ann_differential=ann_reb - ann_init,
        turnover=turnover,
        est_annual_cost_flat=estimate_annual_cost(cost) if cost else 0.0,
        est_annual_cost_turnover=hs * turnover * days / n,
        wealth_rebalanced=w_reb,
        wealth_initial_balanced=w_init,
        net=bool(hs),
    )


@dataclass(frozen=True)
class PairFailure:
    asset_a: str
    asset_b: str
    error: str


@dataclass
class UniverseResult:
    reports: list[BacktestReport]
    failures: list[PairFailure] = field(default_factory=list)

    @property
    def n_positive(self) -> int:
        return sum(r.ann_differential > 0 for r in self.reports)

    def summary_line(self) -> str:
        return (
            f"{self.n_positive} of {len(self.reports)} pairs: rebalanced beat initial balanced"
            + (f" ({len(self.failures)} pairs failed)" if self.failures else "")
        )


def run_universe(
    series: Sequence[ReturnSeries],
    cost: CostModel | None = None,
    strategy: StrategySpec = Balanced(0.5),
    workers: int = 1,
) -> UniverseResult:
    """Backtest every unordered pair; failing pairs are recorded, not raised."""
    if len(series) < 2:
        raise DataError("a universe needs at least two series")

    def one(pair):
        sa, sb = pair
        try:
            al = align(sa, sb)
            return run_pair_backtest(al.a, al.b, strategy, cost)
        except (DataError, RuinError) as exc:
            return PairFailure(sa.asset_id, sb.asset_id, str(exc))

    pairs = list(combinations(series, 2))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, pairs))
    else:
        outcomes = [one(p) for p in pairs]
    result = UniverseResult([], [])
    for o in outcomes:
        (result.failures if isinstance(o, PairFailure) else result.reports).append(o)
    return result


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_wide_csv(path, positive: bool = True) -> dict[str, tuple[list[dt.date], list[float]]]:
    """Parse a wide file into {column: (dates, values)}; blank cells are skipped.

    Errors carry the 1-based line number of the offending row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _parse_wide(fh, str(path), positive)


def _parse_wide(fh: Iterable[str], name: str, positive: bool):
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{name}: empty file") from None
    if not header or header[0].lower() != "date":
        raise DataError(f"{name}:1: first column must be 'date'")
    assets = header[1:]
    if not assets:
        raise DataError(f"{name}:1: no asset columns")
    if len(set(assets)) != len(assets) or any(not a for a in assets):
        raise DataError(f"{name}:1: asset column names must be unique and non-empty")
    out = {a: ([], []) for a in assets}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{name}:{line}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"{name}:{line}: bad date {row[0]!r}") from None
        for asset, cell in zip(assets, row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{name}:{line}: bad number {cell!r} for {asset}") from None
            if not math.isfinite(value) or (positive and value <= 0):
                raise DataError(f"{name}:{line}: {asset} value must be positive, got {cell}")
            dates, values = out[asset]
            if dates and day <= dates[-1]:
                raise DataError(f"{name}:{line}: dates must be strictly increasing")
            dates.append(day)
            values.append(value)
    return out


def load_price_series(paths: Sequence) -> list[PriceSeries]:
    """Read one or more wide price files; asset names must be unique across files."""
    series: dict[str, PriceSeries] = {}
    for p in paths:
        for asset, (dates, values) in read_wide_csv(p).items():
            if asset in series:
                raise DataError(f"{p}: asset {asset!r} defined twice")
            try:
                series[asset] = PriceSeries(asset, tuple(dates), np.array(values))
            except DataError as exc:
                raise DataError(f"{p}: {exc}") from None
    return list(series.values())


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, str):
        return x
    return f"{x:.10g}"


def write_report(reports: Sequence[BacktestReport], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([fmt(v) for v in r.row().values()])


def report_csv(reports: Sequence[BacktestReport]) -> str:
    buf = io.StringIO()
    write_report(reports, buf)
    return buf.getvalue()
