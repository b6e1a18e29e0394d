"""Command-line entry point: ``volharvest {analytics,simulate,backtest,kelly}``.

Every command builds a record of named sections (lists of flat rows) and
renders it as an aligned table, delimited text, or a JSON document. Data
goes to stdout or ``--output``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analytics as an
from . import backtest as bt
from . import simulation as sim
from .errors import DataError, VolHarvestError

FORMATS = ("table", "delimited", "structured-record")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _cell(v, human: bool) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{v:.10g}" if human else repr(float(v))
    if v is None:
        return ""
    return str(v)


def render(record: dict, fmt: str) -> str:
    if fmt == "structured-record":
        clean = {
            "command": record["command"],
            "parameters": {k: _jsonable(v) for k, v in record["parameters"].items()},
            "sections": {
                name: [{k: _jsonable(v) for k, v in row.items()} for row in rows]
                for name, rows in record["sections"].items()
            },
        }
        return json.dumps(clean, indent=2, sort_keys=True) + "\n"

    out = io.StringIO()
    for i, (name, rows) in enumerate(record["sections"].items()):
        if i:
            out.write("\n")
        columns = list(rows[0]) if rows else []
        if fmt == "delimited":
            out.write(f"# {name}\n")
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row[c], human=False) for c in columns])
        else:
            out.write(f"== {name} ==\n")
            cells = [[_cell(row[c], human=True) for c in columns] for row in rows]
            widths = [max(len(c), *(len(r[j]) for r in cells)) for j, c in enumerate(columns)]
            out.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip() + "\n")
            for r in cells:
                out.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")
    return out.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _record(command: str, parameters: dict, **sections) -> dict:
    return {"command": command, "parameters": parameters, "sections": sections}


# ---------------------------------------------------------------------------
# Parameter helpers
# ---------------------------------------------------------------------------

def _binomial(args, steps_default=250) -> an.BinomialParams:
    steps = args.steps if args.steps is not None else steps_default
    normalized = abs(args.mu + 0.5 * args.r - 1.0) < 1e-12
    return an.BinomialParams(args.p, args.mu, args.r, args.rho, steps, normalized)


def _or(value, default):
    return default if value is None else value


def _gaussian(args, steps_default=250) -> an.GaussianParams:
    steps = _or(args.steps, steps_default)
    return an.GaussianParams(
        _or(args.mu1, 1.0), _or(args.mu2, 1.0), _or(args.sigma1, 0.02), _or(args.sigma2, 0.02),
        args.rho, steps,
    )


# ---------------------------------------------------------------------------
# analytics
# ---------------------------------------------------------------------------

def _analytics_rows(args) -> tuple[dict, list[dict]]:
    f = args.formula
    if f == "table1":
        rows = []
        for row in an.table1():
            above, even, below, at_least = row.as_floats()
            rows.append({
                "game": row.game, "rounds": row.rounds,
                "p_above": above, "p_even": even, "p_below": below, "p_at_least": at_least,
                "exact": f"{row.above}|{row.even}|{row.below}|{row.at_least}",
            })
        return {}, rows
    if f == "bonus":
        return (
            {"sigma": args.sigma, "rho": args.rho},
            [{"formula": "sigma^2*(1-rho)/4", "bonus": an.rebalancing_bonus(args.sigma, args.rho)}],
        )
    if f == "bernoulli":
        jb = an.joint_bernoulli(args.p, args.rho)
        return (
            {"p": args.p, "rho": args.rho},
            [{"formula": "b1=p(1-p)rho+p^2; b3=p(1-p)rho+(1-p)^2; b2=2p(1-p)(1-rho)",
              "beta1": jb.beta1, "beta2": jb.beta2, "beta3": jb.beta3}],
        )
    if f in ("modal", "expected"):
        params = _binomial(args)
        p = {"p": params.p, "mu": params.mu, "r": params.r, "rho": params.rho, "steps": params.steps}
        if f == "expected":
            return p, [{"formula": "(mu+r*p)^M", "expected": an.binomial_expected_value(params)}]
        row = {
            "formula": "bal=(mu+r)^(b1 M)(mu+r/2)^(b2 M)mu^(b3 M); imb=(mu+r)^(pM)mu^((1-p)M)",
            "balanced": an.balanced_modal_value(params),
            "imbalanced": an.imbalanced_modal_value(params),
            "ratio": an.modal_ratio(params) if params.paper_normalized else None,
            "expected": an.binomial_expected_value(params),
        }
        return p, [row]
    if f == "fair-median":
        steps = args.steps if args.steps is not None else 2
        return (
            {"r": args.r, "rounds": steps},
            [{"formula": "(1-r^2)^(M/2)", "median": an.fair_game_median(args.r, steps)}],
        )
    if f in ("growth", "theta"):
        params = _gaussian(args)
        p = {"mu1": params.mu1, "mu2": params.mu2, "sigma1": params.sigma1,
             "sigma2": params.sigma2, "rho": params.rho}
        if f == "theta":
            t = an.optimal_theta(params)
            return p, [{"formula": "(mu1-mu2+s2^2-s1 s2 rho)/(s1^2+s2^2-2 s1 s2 rho) clamped",
                        "theta": t, "growth": an.log_growth_balanced(t, params)}]
        p["theta"] = args.theta
        return p, [{
            "formula": "t mu1+(1-t)mu2-[t^2 s1^2+(1-t)^2 s2^2]/2-t(1-t)s1 s2 rho",
            "balanced": an.log_growth_balanced(args.theta, params),
            "asset1": an.log_growth_asset(params.mu1, params.sigma1),
            "asset2": an.log_growth_asset(params.mu2, params.sigma2),
        }]
    if f == "shannon":
        mu1, sigma1 = _or(args.mu1, 0.015), _or(args.sigma1, 0.2)
        g = an.shannon_growth(mu1, sigma1)
        return (
            {"mu1": mu1, "sigma1": sigma1},
            [{"formula": "mu1/2-sigma1^2/8; window sigma1^2/4<mu1<=sigma1^2/2",
              "growth": g.growth, "in_window": g.in_window, "asset_growth": g.asset_growth}],
        )
    raise VolHarvestError(f"unknown formula {f!r}")


def cmd_analytics(args) -> dict:
    params, rows = _analytics_rows(args)
    params = {"formula": args.formula, **params}
    return _record("analytics", params, result=rows)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _summary_row(label: str, s: sim.DistributionSummary) -> dict:
    return {"strategy": label, **asdict(s)}


def _comparison_row(c: sim.Comparison) -> dict:
    return {
        "a": c.label_a, "b": c.label_b, "n_compared": c.n_compared, "ruined": c.ruined,
        "prob_a_ge_b": c.prob_a_ge_b, "mean_difference": c.mean_difference,
        "log_growth_differential": c.log_growth_differential, "log_growth_se": c.log_growth_se,
    }


def cmd_simulate(args) -> dict:
    exp = args.experiment
    base = {"experiment": exp, "seed": args.seed, "paths": args.paths}

    if exp == "prop1":
        template = _gaussian(args)
        grid = [int(m) for m in args.m_grid.split(",")]
        points = sim.proposition1_experiment(
            template, args.rho, args.rho2, grid, args.paths, args.seed, args.theta, args.workers
        )
        params = {**base, "mu1": template.mu1, "mu2": template.mu2, "sigma1": template.sigma1,
                  "sigma2": template.sigma2, "rho1": args.rho, "rho2": args.rho2,
                  "theta": args.theta, "m_grid": args.m_grid}
        return _record("simulate", params, ratio_trajectory=[asdict(p) for p in points])

    if exp == "shannon":
        steps = _or(args.steps, 4000)
        drift, sigma1 = args.net_drift, _or(args.sigma1, 0.2)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            demo = sim.shannon_demo(drift, sigma1, steps, args.paths, args.seed, args.workers)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        params = {**base, "net_drift": drift, "sigma1": sigma1, "steps": steps}
        row = {
            "analytic_growth": demo.analytic.growth, "in_window": demo.analytic.in_window,
            "balanced_median_log_growth": demo.balanced_median_log_growth,
            "asset_median_log_growth": demo.asset_median_log_growth,
        }
        c = demo.comparison
        return _record(
            "simulate", params, shannon=[row],
            summaries=[_summary_row(c.label_a, c.summary_a), _summary_row(c.label_b, c.summary_b)],
            comparison=[_comparison_row(c)],
        )

    if args.market == "binomial":
        market = _binomial(args)
        params = {**base, "market": "binomial", "p": market.p, "mu": market.mu, "r": market.r,
                  "rho": market.rho, "steps": market.steps}
    else:
        market = _gaussian(args)
        params = {**base, "market": "gaussian", "mu1": market.mu1, "mu2": market.mu2,
                  "sigma1": market.sigma1, "sigma2": market.sigma2, "rho": market.rho,
                  "steps": market.steps}
    strategies = [sim.parse_strategy(s) for s in (args.strategy or ["balanced:0.5", "imbalanced:1"])]
    params["strategies"] = ",".join(s.label for s in strategies)
    ensembles = sim.run_strategies(market, strategies, args.paths, args.seed, workers=args.workers)
    sections = {
        "summaries": [_summary_row(e.strategy.label, sim.summarize(e)) for e in ensembles],
    }
    if len(ensembles) >= 2:
        sections["comparison"] = [
            _comparison_row(sim.paired_comparison(ensembles[0], e)) for e in ensembles[1:]
        ]
    if args.dump:
        _write_dump(args.dump, ensembles)
    if args.histogram:
        _write_histogram(args.histogram, ensembles)
    return _record("simulate", params, **sections)


def _write_dump(path, ensembles) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_index", "strategy", "terminal_wealth"])
        for e in ensembles:
            for idx, wealth in zip(e.path_index, e.terminal_wealth):
                w.writerow([int(idx), e.strategy.label, repr(float(wealth))])


def _write_histogram(path, ensembles) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "wealth", "density"])
        for e in ensembles:
            for x, d in zip(*sim.density_points(e)):
                w.writerow([e.strategy.label, repr(float(x)), repr(float(d))])


# ---------------------------------------------------------------------------
# backtest / kelly
# ---------------------------------------------------------------------------

def cmd_backtest(args) -> dict:
    prices = bt.load_price_series(args.input)
    series = [bt.to_returns(p) for p in prices]
    cost = bt.CostModel(half_spread=args.half_spread) if args.half_spread else None
    result = bt.run_universe(series, cost, sim.Balanced(args.theta), workers=args.workers)
    for f in result.failures:
        print(f"error: pair {f.asset_a}/{f.asset_b}: {f.error}", file=sys.stderr)
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            bt.write_report(result.reports, fh)
    params = {"inputs": ",".join(str(p) for p in args.input), "half_spread": args.half_spread,
              "theta": args.theta}
    summary = [{"pairs": len(result.reports), "positive_differential": result.n_positive,
                "failed": len(result.failures)}]
    return _record("backtest", params, pairs=[r.row() for r in result.reports], summary=summary)


def _kelly_inputs_from_file(args):
    cols = bt.read_wide_csv(args.input, positive=(args.columns == "prices"))
    names = args.assets.split(",") if args.assets else list(cols)
    if len(names) != 2:
        raise DataError(f"{args.input}: kelly needs exactly two columns, got {names}")
    for n in names:
        if n not in cols:
            raise DataError(f"{args.input}: no column {n!r}")
    if args.columns == "prices":
        rs = [bt.to_returns(bt.PriceSeries(n, tuple(cols[n][0]), np.array(cols[n][1])))
              for n in names]
        al = bt.align(*rs)
        x1, x2 = al.a.returns - 1.0, al.b.returns - 1.0
    else:
        rs = [bt.ReturnSeries(n, tuple(cols[n][0]), np.array(cols[n][1])) for n in names]
        al = bt.align(*rs)
        x1, x2 = al.a.returns, al.b.returns
    if len(x1) < 3:
        raise DataError(f"{args.input}: too few joint observations to estimate moments")
    cov = np.cov(np.vstack([x1, x2]), ddof=1)
    inputs = an.KellyInputs(float(x1.mean()), float(x2.mean()),
                            float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1]))
    return inputs, {"input": str(args.input), "assets": ",".join(names), "n_obs": len(x1)}


def cmd_kelly(args) -> dict:
    if args.input:
        inputs, params = _kelly_inputs_from_file(args)
    else:
        if args.cov11 is not None:
            inputs = an.KellyInputs(args.mu1, args.mu2, args.cov11, args.cov12 or 0.0, args.cov22)
        else:
            inputs = an.KellyInputs.from_vols(args.mu1, args.mu2, args.sigma1, args.sigma2, args.rho)
        params = {}
    w = an.kelly_weights(inputs)
    params.update({"mu1": inputs.mu1, "mu2": inputs.mu2, "cov11": inputs.cov11,
                   "cov12": inputs.cov12, "cov22": inputs.cov22})
    row = {"formula": "inv(Sigma) mu", "w1": w[0], "w2": w[1],
           "residual": an.kelly_residual(inputs, w)}
    return _record("kelly", params, weights=[row])


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="table")
    common.add_argument("--output", help="write the rendered record here instead of stdout")
    common.add_argument("--seed", type=_u64, default=1)
    common.add_argument("--workers", type=int, default=1)

    binom = argparse.ArgumentParser(add_help=False)
    binom.add_argument("--p", type=float, default=0.5)
    binom.add_argument("--mu", type=float, default=0.98)
    binom.add_argument("--r", type=float, default=0.04)
    binom.add_argument("--rho", type=float, default=0.0)
    binom.add_argument("--steps", type=int)

    gauss = argparse.ArgumentParser(add_help=False)
    gauss.add_argument("--mu1", type=float)
    gauss.add_argument("--mu2", type=float)
    gauss.add_argument("--sigma1", type=float)
    gauss.add_argument("--sigma2", type=float)
    gauss.add_argument("--theta", type=float, default=0.5)

    parser = argparse.ArgumentParser(prog="volharvest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analytics", parents=[common, binom, gauss], help="closed-form values",
                        conflict_handler="resolve")
    pa.add_argument("formula", choices=["table1", "bonus", "bernoulli", "modal", "expected",
                                        "fair-median", "growth", "theta", "shannon"])
    pa.add_argument("--sigma", type=float, default=0.02)
    pa.set_defaults(func=cmd_analytics)

    ps = sub.add_parser("simulate", parents=[common, binom, gauss], help="Monte Carlo ensembles",
                        conflict_handler="resolve")
    ps.add_argument("--market", choices=["binomial", "gaussian"], default="binomial")
    ps.add_argument("--experiment", choices=["ensemble", "prop1", "shannon"], default="ensemble")
    ps.add_argument("--strategy", action="append",
                    help="balanced[:theta] | imbalanced[:asset] | initial_balanced (repeatable)")
    ps.add_argument("--paths", type=int, default=1000)
    ps.add_argument("--rho2", type=float, default=1.0)
    ps.add_argument("--m-grid", default="250,1000,4000")
    ps.add_argument("--net-drift", type=float, default=0.015,
                    help="shannon: net drift of the volatile asset (sigma from --sigma1, default 0.2)")
    ps.add_argument("--dump", help="per-path terminal wealth CSV")
    ps.add_argument("--histogram", help="density points CSV")
    ps.set_defaults(func=cmd_simulate)

    pb = sub.add_parser("backtest", parents=[common], help="pairwise historical backtests")
    pb.add_argument("--input", action="append", required=True, type=Path)
    pb.add_argument("--half-spread", type=float, default=0.0)
    pb.add_argument("--theta", type=float, default=0.5)
    pb.set_defaults(func=cmd_backtest)

    pk = sub.add_parser("kelly", parents=[common], help="growth-optimal weights")
    pk.add_argument("--mu1", type=float, default=0.05)
    pk.add_argument("--mu2", type=float, default=0.05)
    pk.add_argument("--cov11", type=float)
    pk.add_argument("--cov12", type=float)
    pk.add_argument("--cov22", type=float)
    pk.add_argument("--sigma1", type=float, default=0.1)
    pk.add_argument("--sigma2", type=float, default=0.1)
    pk.add_argument("--rho", type=float, default=0.0)
    pk.add_argument("--input", type=Path, help="wide CSV to estimate moments from")
    pk.add_argument("--columns", choices=["returns", "prices"], default="returns")
    pk.add_argument("--assets", help="two column names, comma separated")
    pk.set_defaults(func=cmd_kelly)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        record = args.func(args)
        # backtest --output is the pair report itself; its record goes to stdout
        _emit(render(record, args.format), None if args.command == "backtest" else args.output)
    except (VolHarvestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
