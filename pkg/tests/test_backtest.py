import datetime as dt
import io

import numpy as np
import pytest

from volharvest import backtest as bt
from volharvest.errors import DataError, ParameterError, RuinError
from volharvest.simulation import Balanced, Imbalanced, InitialBalanced

D0 = dt.date(2001, 1, 2)


def days(n, start=0):
    return tuple(D0 + dt.timedelta(days=start + i) for i in range(n))


def series(name, returns, start=0):
    returns = np.asarray(returns, dtype=float)
    return bt.ReturnSeries(name, days(len(returns), start), returns)


def alternating(n=500):
    ra = np.where(np.arange(n) % 2 == 0, 1.02, 0.98)
    rb = np.where(np.arange(n) % 2 == 0, 0.98, 1.02)
    return series("A", ra), series("B", rb)


def noisy_universe(k, n, sigma, seed):
    rng = np.random.default_rng(seed)
    return [series(f"X{i}", np.exp(rng.normal(0.0, sigma, n))) for i in range(k)]


class TestReturns:
    def test_ratio(self):
        ps = bt.PriceSeries("A", days(3), np.array([100, 102, 100.98]))
        rs = bt.to_returns(ps)
        assert rs.returns == pytest.approx([1.02, 0.99], rel=1e-15)
        assert rs.dates == days(3)[1:]

    def test_constant(self):
        rs = bt.to_returns(bt.PriceSeries("A", days(5), np.full(5, 7.5)))
        assert np.all(rs.returns == 1.0)

    @pytest.mark.parametrize(
        "dates,prices",
        [
            (days(1), [100.0]),
            (days(3), [100.0, 0.0, 1.0]),
            ((D0, D0, D0 + dt.timedelta(1)), [1.0, 2.0, 3.0]),
        ],
    )
    def test_invalid(self, dates, prices):
        with pytest.raises(DataError):
            bt.PriceSeries("A", dates, np.array(prices))


class TestAlign:
    def test_identical_calendars(self):
        a, b = alternating(10)
        al = bt.align(a, b)
        assert al.dropped_a == () and al.dropped_b == ()
        assert len(al.a) == len(al.b) == 10

    def test_disjoint(self):
        with pytest.raises(DataError):
            bt.align(series("A", [1.0, 1.0]), series("B", [1.0, 1.0], start=10))

    def test_missing_day(self):
        a = series("A", np.ones(5))
        full = series("B", np.arange(1, 6, dtype=float))
        holed = bt.ReturnSeries("A", a.dates[:2] + a.dates[3:], np.ones(4))
        al = bt.align(holed, full)
        assert al.dropped_b == (full.dates[2],)
        assert al.dropped_a == ()
        assert list(al.b.returns) == [1.0, 2.0, 4.0, 5.0]


class TestPairBacktest:
    def test_anticorrelated_fixture(self):
        a, b = alternating(500)
        rep = bt.run_pair_backtest(a, b)
        assert rep.wealth_rebalanced == 1.0
        assert rep.ann_rebalanced == 0.0
        expect_init = 0.5 * np.prod(a.returns) + 0.5 * np.prod(b.returns)
        assert rep.wealth_initial_balanced == pytest.approx(expect_init, rel=1e-12)
        assert rep.wealth_initial_balanced < 1
        assert rep.ann_differential > 0

    def test_identical_series(self):
        rng = np.random.default_rng(1)
        a = series("A", np.exp(rng.normal(0, 0.01, 300)))
        b = bt.ReturnSeries("B", a.dates, a.returns.copy())
        for theta in (0.5, 0.3):
            rep = bt.run_pair_backtest(a, b, Balanced(theta))
            assert rep.turnover == 0.0
            if theta == 0.5:
                assert rep.ann_differential == 0.0

    def test_shannon_configuration(self):
        # cash against a zero log-drift coin (price multiplies by e^{+-s}); growth s^2/8 per day
        wins = []
        for seed in range(60):
            rng = np.random.default_rng(seed)
            coin = np.exp(0.05 * rng.choice([-1.0, 1.0], 2500))
            rep = bt.run_pair_backtest(series("CASH", np.ones(2500)), series("COIN", coin))
            wins.append(rep.ann_differential > 0)
        assert np.mean(wins) > 0.6

    def test_initial_balanced_never_trades(self):
        a, b = alternating(50)
        rep = bt.run_pair_backtest(a, b, InitialBalanced(), bt.CostModel(0.001))
        assert rep.turnover == 0.0
        assert rep.ann_differential == 0.0

    def test_imbalanced_leg(self):
        a, b = alternating(50)
        rep = bt.run_pair_backtest(a, b, Imbalanced(1))
        assert rep.wealth_rebalanced == pytest.approx(np.prod(a.returns), rel=1e-12)

    def test_turnover_of_alternating_pair(self):
        a, b = alternating(4)
        rep = bt.run_pair_backtest(a, b)
        # weights drift to 0.51/0.49 each day; restoring trades 0.01 on each leg
        assert rep.turnover == pytest.approx(4 * 0.02, rel=1e-12)

    def test_unaligned_rejected(self):
        with pytest.raises(DataError):
            bt.run_pair_backtest(series("A", [1.0, 1.0]), series("B", [1.0, 1.0], start=1))

    def test_ruin(self):
        a, b = alternating(10)
        with pytest.raises(RuinError) as info:
            bt.run_pair_backtest(a, b, cost=bt.CostModel(half_spread=100.0))
        assert info.value.date == a.dates[0]


class TestInvariants:
    @pytest.fixture
    def pair(self):
        rng = np.random.default_rng(5)
        return (
            series("A", np.exp(rng.normal(0, 0.01, 750))),
            series("B", np.exp(rng.normal(0, 0.012, 750))),
        )

    def test_scale_invariance(self, pair):
        a, b = pair
        rng = np.random.default_rng(6)
        prices = np.cumprod(np.r_[1.0, a.returns])
        ps = bt.PriceSeries("A", (D0 - dt.timedelta(1),) + a.dates, prices)
        scaled = bt.PriceSeries("A", ps.dates, prices * rng.uniform(10, 1000))
        r1 = bt.run_pair_backtest(bt.to_returns(ps), b, cost=bt.CostModel(0.0002))
        r2 = bt.run_pair_backtest(bt.to_returns(scaled), b, cost=bt.CostModel(0.0002))
        for k, v in r1.row().items():
            if isinstance(v, float):
                assert getattr(r2, k) == pytest.approx(v, rel=1e-9, abs=1e-14)
            else:
                assert getattr(r2, k) == v

    def test_swap_symmetry(self, pair):
        a, b = pair
        ab = bt.run_pair_backtest(a, b)
        ba = bt.run_pair_backtest(b, a)
        assert ab.ann_differential == pytest.approx(ba.ann_differential, rel=1e-12, abs=1e-15)
        assert ab.turnover == pytest.approx(ba.turnover, rel=1e-12)

    def test_net_below_gross(self, pair):
        gross = bt.run_pair_backtest(*pair)
        net = bt.run_pair_backtest(*pair, cost=bt.CostModel(half_spread=0.0001))
        assert gross.turnover > 0
        assert net.ann_rebalanced < gross.ann_rebalanced
        assert net.ann_initial_balanced == gross.ann_initial_balanced
        assert net.est_annual_cost_turnover == pytest.approx(
            0.0001 * net.turnover * 250 / net.n_days
        )

    def test_reconstruction(self, pair):
        rep = bt.run_pair_backtest(*pair, cost=bt.CostModel(0.0003))
        years = rep.n_days / 250
        assert (1 + rep.ann_rebalanced) ** years == pytest.approx(rep.wealth_rebalanced, rel=1e-10)
        assert (1 + rep.ann_initial_balanced) ** years == pytest.approx(
            rep.wealth_initial_balanced, rel=1e-10
        )
        assert rep.ann_differential == rep.ann_rebalanced - rep.ann_initial_balanced


class TestCost:
    def test_known_values(self):
        assert bt.estimate_annual_cost(bt.CostModel(half_spread=0.0001)) == 0.000375
        assert bt.estimate_annual_cost(bt.CostModel(half_spread=0.00025)) == 0.0009375
        assert bt.estimate_annual_cost(bt.CostModel(half_spread=0.0)) == 0.0

    def test_validation(self):
        with pytest.raises(ParameterError):
            bt.CostModel(half_spread=-1e-4)
        with pytest.raises(ParameterError):
            bt.CostModel(trading_days_per_year=0)


class TestUniverse:
    def test_nine_series(self):
        res = bt.run_universe(noisy_universe(9, 300, 0.01, 2))
        assert len(res.reports) == 36
        assert len({(r.asset_a, r.asset_b) for r in res.reports}) == 36

    def test_two_identical(self):
        a = series("A", np.exp(np.random.default_rng(3).normal(0, 0.01, 100)))
        res = bt.run_universe([a, bt.ReturnSeries("B", a.dates, a.returns)])
        assert len(res.reports) == 1
        assert res.reports[0].ann_differential == 0.0

    def test_noisy_universe_mostly_positive(self):
        res = bt.run_universe(noisy_universe(9, 2500, 0.02, 0))
        assert res.n_positive > 18

    def test_failing_pair_is_reported(self):
        uni = noisy_universe(3, 50, 0.01, 4) + [series("LATE", np.ones(5), start=400)]
        res = bt.run_universe(uni)
        assert len(res.reports) == 3
        assert len(res.failures) == 3
        assert all("LATE" in (f.asset_a, f.asset_b) for f in res.failures)

    def test_workers_do_not_change_results(self):
        uni = noisy_universe(6, 200, 0.01, 8)
        assert bt.run_universe(uni).reports == bt.run_universe(uni, workers=4).reports


class TestFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "px.csv"
        path.write_text(
            "date,EUR,JPY\n2001-01-02,1.0,100\n2001-01-03,1.02,\n2001-01-04,1.0098,101\n",
            encoding="utf-8",
        )
        loaded = bt.load_price_series([path])
        assert [s.asset_id for s in loaded] == ["EUR", "JPY"]
        assert len(loaded[0].dates) == 3 and len(loaded[1].dates) == 2

    @pytest.mark.parametrize(
        "body,needle",
        [
            ("date,A\n2001-01-02,1\n2001-13-03,2\n", ":3: bad date"),
            ("date,A\n2001-01-02,1\n2001-01-03,-2\n", ":3:"),
            ("date,A\n2001-01-02,1\n2001-01-03,abc\n", ":3: bad number"),
            ("date,A\n2001-01-03,1\n2001-01-02,2\n", ":3: dates must be strictly increasing"),
            ("day,A\n2001-01-02,1\n", ":1:"),
            ("date,A,A\n2001-01-02,1,1\n", ":1:"),
            ("date,A\n2001-01-02,1,5\n", ":2: expected 2 fields"),
        ],
    )
    def test_errors_name_line(self, tmp_path, body, needle):
        path = tmp_path / "bad.csv"
        path.write_text(body, encoding="utf-8")
        with pytest.raises(DataError, match=needle):
            bt.load_price_series([path])

    def test_duplicate_asset_across_files(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            (tmp_path / name).write_text("date,A\n2001-01-02,1\n2001-01-03,2\n", encoding="utf-8")
        with pytest.raises(DataError, match="defined twice"):
            bt.load_price_series([tmp_path / "a.csv", tmp_path / "b.csv"])

    def test_report_schema(self):
        rep = bt.run_pair_backtest(*alternating(250), cost=bt.CostModel(0.0001))
        text = bt.report_csv([rep])
        header, row = text.strip().split("\n")
        assert header == ",".join(bt.REPORT_COLUMNS)
        assert header == (
            "asset_a,asset_b,n_days,ann_rebalanced,ann_initial_balanced,ann_differential,"
            "turnover,est_annual_cost_flat,est_annual_cost_turnover"
        )
        cells = row.split(",")
        assert cells[:3] == ["A", "B", "250"]
        assert cells[7] == "0.000375"
        for c in cells[3:]:
            digits = c.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 10
        assert float(cells[5]) == pytest.approx(rep.ann_differential, rel=1e-9)
