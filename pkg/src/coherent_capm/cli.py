"""Batch command-line front end.

Exit status: 0 success, 2 usage or configuration error, 3 numerical
non-convergence, 4 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import capm, extreme, frontier, pricing, scenarios, spectral
from .errors import CoherentRiskError, ConfigError, NonConvergenceError
from .report import Table, kv_table, render_csv, render_text

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4

PAYOFF_HELP = (
    "payoffs must be discounted: a call pays max(S1 - K, 0) as given, so fold any "
    "discount factor into the strike/table values or pass --discount"
)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _measure(text: str):
    try:
        return spectral.parse_measure(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _gen(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "hist" and not arg:
            return ("hist",)
        if kind == "whist":
            lam = float(arg)
            if not 0 < lam < 1:
                raise ValueError("lambda must lie in (0, 1)")
            return ("whist", lam)
        if kind == "boot":
            n, t = (int(v) for v in arg.split(","))
            if n < 1 or t < 1:
                raise ValueError("n and T must be positive")
            return ("boot", n, t)
        if kind == "mc":
            t = int(arg) if arg else None
            if t is not None and t < 1:
                raise ValueError("T must be positive")
            return ("mc", t)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --gen {text!r}: {exc}") from None
    raise argparse.ArgumentTypeError(f"bad --gen {text!r}; expected hist, whist:<l>, boot:<n>,<T> or mc[:<T>]")


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="JSON file of option values; flags override it")
    g.add_argument("--data", help="return CSV: date,<label1>,... (oldest row first)")
    g.add_argument("--index", help="label of the index column")
    g.add_argument("--rf", type=float, default=0.0, help="risk-free rate per period (default 0)")
    g.add_argument("--s0", type=_floats, help="spot prices per asset column (default 1 each)")
    g.add_argument("--measure", type=_measure, default="tail:0.05",
                   help="tail:<l> | alpha:<a> | beta:<a>,<b> | atomic:<l1>=<w1>,... (default tail:0.05)")
    g.add_argument("--gen", type=_gen, default="hist",
                   help="scenario generation: hist | whist:<l> | boot:<n>,<T> | mc[:<T>] (default hist)")
    g.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    g.add_argument("--csv", action="store_true", help="comma-separated output")
    g.add_argument("--out", help="write the report to this path instead of stdout")

    solver = argparse.ArgumentParser(add_help=False)
    s = solver.add_argument_group("solver options")
    s.add_argument("--method", choices=frontier.METHODS, default="cutting-plane")
    s.add_argument("--tol", type=float, default=1e-8, help="relative optimality tolerance (default 1e-8)")
    s.add_argument("--max-iter", type=_positive_int, default=50000)

    parser = argparse.ArgumentParser(
        prog="coherent-capm",
        description="Coherent-risk portfolio analytics over discrete scenario data.",
        epilog="exit status: 0 ok, 2 usage/config error, 3 non-convergence, 4 data error",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("risk", parents=[common], help="spectral risk per asset and of a portfolio")
    p.add_argument("--portfolio", type=_floats, help="weights on the return columns")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("contrib", parents=[common], help="risk contributions to the index and rewards")
    p.add_argument("--draws", type=_positive_int, default=20000, help="Monte Carlo groups (default 20000)")
    p.set_defaults(func=cmd_contrib)

    p = sub.add_parser("optimize", parents=[common, solver], help="optimal strategy, R* and frontier")
    p.add_argument("--frontier", type=_floats, default=[0.0, 0.5, 1.0, 1.5, 2.0], help="risk levels c")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sml", parents=[common, solver], help="coherent betas and SML residuals")
    p.set_defaults(func=cmd_sml)

    p = sub.add_parser("equilibrium", parents=[common, solver], help="equilibrium R* and agent allocations")
    p.add_argument("--economy", help="CSV with header endowment,aversion")
    p.add_argument("--market", type=_floats, help="market holdings H* (default: the optimal strategy)")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("price", parents=[common, solver], help="NBC price of a claim", epilog=PAYOFF_HELP)
    p.add_argument("--payoff", choices=("call", "put", "table"), default="call")
    p.add_argument("--strike", type=float)
    p.add_argument("--table", help="two-column S1,F CSV for --payoff table")
    p.add_argument("--discount", type=float, default=1.0, help="discount factor applied to call/put payoffs")
    p.add_argument("--underlier", help="label of the underlier column")
    p.add_argument("--spot", type=float, help="underlier spot price")
    p.add_argument("--rstar", type=float, help="reward/risk ratio (default: from the optimizer)")
    p.add_argument("--draws", type=_positive_int, default=pricing.DEFAULT_GROUPS,
                   help="Monte Carlo groups for Beta/Alpha V@R empirical prices")
    p.set_defaults(func=cmd_price)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    # re-parse with config values injected as defaults so explicit flags win
    extra = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv or any(a.startswith(flag + "=") for a in argv):
            continue
        if value is True:
            extra.append(flag)
        elif value is False or value is None:
            continue
        else:
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            extra += [flag, str(value)]
    return parser.parse_args(list(argv) + extra)


# ---------------------------------------------------------------- helpers


def _scenarios(args) -> scenarios.ScenarioSet:
    if not args.data:
        raise ConfigError("--data is required")
    s = scenarios.load_returns(args.data, index=args.index)
    gen = args.gen
    if gen[0] == "whist":
        s = scenarios.weight_geometric(s, gen[1])
    elif gen[0] == "boot":
        s = scenarios.bootstrap(s, gen[1], gen[2], args.seed)
    elif gen[0] == "mc":
        t = gen[1] or s.n_scenarios
        s = scenarios.monte_carlo(scenarios.fit_gaussian(s), t, args.seed, labels=s.labels, index_col=s.index_col)
    return s


def _model(args, s: scenarios.ScenarioSet) -> scenarios.MarketModel:
    s0 = args.s0
    if s0 is not None and len(s0) == 1:
        s0 = s0 * s.n_assets
    return scenarios.MarketModel(s, r_f=args.rf, s0=s0)


def _universe(model: scenarios.MarketModel) -> scenarios.MarketModel:
    s = model.scenarios
    if s.index_col is None:
        return model
    keep = [i for i in range(s.n_assets) if i != s.index_col]
    if not keep:
        raise ConfigError("no tradable assets besides the index")
    return scenarios.MarketModel(s.select(keep), r_f=model.r_f, s0=model.s0[keep])


def _solve(args, model):
    opts = frontier.SolverOptions(method=args.method, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    return frontier.optimize(model, args.measure, opts)


def _setup(args):
    s = _scenarios(args)
    return s, _model(args, s)


def _header(args, s) -> Table:
    kind, *params = args.gen
    params = [p for p in params if p is not None]
    gen = f"{kind}:{','.join(str(p) for p in params)}" if params else kind
    return kv_table("run", [
        ("measure", spectral.describe(args.measure)),
        ("scenarios", s.n_scenarios),
        ("assets", s.n_assets),
        ("generation", gen),
        ("seed", args.seed),
        ("r_f", args.rf),
    ])


# ---------------------------------------------------------------- commands


def cmd_risk(args):
    s, _ = _setup(args)
    t = Table("risk", ["asset", "risk", "mean"])
    for i, label in enumerate(s.labels):
        col = s.outcomes[:, i]
        t.add(label, spectral.risk_of(col, s.weights, args.measure), float(s.weights @ col))
    if args.portfolio is not None:
        w = np.asarray(args.portfolio)
        if w.size != s.n_assets:
            raise ConfigError(f"--portfolio needs {s.n_assets} weights, got {w.size}")
        pv = s.outcomes @ w
        t.add("portfolio", spectral.risk_of(pv, s.weights, args.measure), float(s.weights @ pv))
    return [_header(args, s), t]


def cmd_contrib(args):
    if not args.index:
        raise ConfigError("contrib needs --index")
    s, model = _setup(args)
    mu = args.measure
    group = isinstance(mu, spectral.BetaFamily) and mu.is_integer
    y = s.index_values()
    index = spectral.Sample(y, s.weights)
    t = Table("contributions", ["asset", "contribution", "mc_contribution", "mc_std_err", "reward_q"])
    for i, label in enumerate(s.labels):
        x = s.outcomes[:, i]
        exact = extreme.risk_contribution(x, index, mu)
        mc = se = None
        if group:
            src = scenarios.pair_sampler(x, y, s.weights)
            est = extreme.mc_contribution_beta(src, int(mu.alpha), int(mu.beta), args.draws, args.seed)
            mc, se = est.value, est.std_err
        t.add(label, exact, mc, se, extreme.reward_estimate(model, mu, i))
    return [_header(args, s), t]


def _optimum_tables(args, model, res):
    resid = capm.sml_residuals(model, args.measure, res)
    pnl = model.pnl()
    summary = kv_table("optimum", [
        ("method", res.method),
        ("r_star", res.r_star),
        ("risk", 1.0),
        ("reward", float(model.weights @ (pnl @ res.h_star))),
        ("iterations", res.iterations),
        ("relative_gap", res.gap),
        ("max_sml_residual", float(np.abs(resid).max())),
    ])
    hold = Table("strategy", ["asset", "h_star", "sml_residual"])
    for label, h, r in zip(model.scenarios.labels, res.h_star, resid):
        hold.add(label, h, r)
    return summary, hold, resid


def cmd_optimize(args):
    s, model = _setup(args)
    model = _universe(model)
    res = _solve(args, model)
    summary, hold, _ = _optimum_tables(args, model, res)
    fr = Table("frontier", ["risk", "reward"])
    for c, e in frontier.frontier(res, args.frontier):
        fr.add(c, e)
    return [_header(args, s), summary, hold, fr]


def cmd_sml(args):
    s, model = _setup(args)
    model = _universe(model)
    res = _solve(args, model)
    summary, _, resid = _optimum_tables(args, model, res)
    betas = capm.sml_betas(model, args.measure, res)
    ex = model.excess_returns()
    rm = capm.market_excess(model, res.h_star)
    q = res.q.q
    t = Table("sml", ["asset", "beta", "excess_p", "beta_x_market_p", "sml_residual"])
    mkt_p = float(model.weights @ rm)
    for label, b, e, r in zip(model.scenarios.labels, betas, model.weights @ ex, resid):
        t.add(label, b, e, b * mkt_p, r)
    t.add("market", capm.beta_of(rm, q, rm), mkt_p, mkt_p, 0.0)
    return [_header(args, s), summary, t]


def cmd_equilibrium(args):
    if not args.economy:
        raise ConfigError("equilibrium needs --economy")
    econ = capm.load_economy(args.economy)
    s, model = _setup(args)
    model = _universe(model)
    if args.market is not None:
        H = np.asarray(args.market)
        if H.size != model.scenarios.n_assets:
            raise ConfigError(f"--market needs {model.scenarios.n_assets} holdings, got {H.size}")
        source = "given"
    else:
        H = _solve(args, model).h_star
        source = "optimal strategy"
    r_star, mv, rv = capm.equilibrium_from_market(econ, model, args.measure, H)
    summary = kv_table("equilibrium", [
        ("market_holdings", source),
        ("expected_market_value", mv),
        ("market_risk", rv),
        ("tolerance_sum", econ.tolerance_sum),
        ("r_star", r_star),
    ])
    labels = model.scenarios.labels
    t = Table("allocations", ["agent", "endowment", "aversion", *labels])
    for n, h in enumerate(capm.agent_allocations(econ, H)):
        t.add(n + 1, econ.endowments[n], econ.aversions[n], *h)
    return [_header(args, s), summary, t]


def _claim(args, s):
    if not args.underlier:
        raise ConfigError("price needs --underlier")
    if args.spot is None:
        raise ConfigError("price needs --spot")
    s.col(args.underlier)
    if args.payoff == "table":
        if not args.table:
            raise ConfigError("--payoff table needs --table <csv>")
        return pricing.load_payoff_table(args.table, args.underlier, args.spot)
    if args.strike is None:
        raise ConfigError(f"--payoff {args.payoff} needs --strike")
    make = pricing.vanilla_call if args.payoff == "call" else pricing.vanilla_put
    return make(args.strike, args.underlier, args.spot, discount=args.discount)


def cmd_price(args):
    s, model = _setup(args)
    claim = _claim(args, s)
    mu = args.measure
    if args.rstar is not None and args.rstar < 0:
        raise ConfigError("--rstar must be nonnegative")
    res = None
    if args.rstar is None or s.index_col is None:
        res = _solve(args, _universe(model))
    r_star = args.rstar if args.rstar is not None else res.r_star
    if s.index_col is not None:
        q = extreme.extreme_measure(spectral.Sample(s.index_values(), s.weights), mu)
        q_source = "index"
    else:
        q = res.q
        q_source = "optimum"
    ck = capm.contact_measure(s.weights, q, r_star)
    price = pricing.nbc_price(claim, ck, s)
    exact, first = pricing.risk_adjustment(claim, ck, s)
    p_mean = price - exact
    sens = pricing.nbc_sensitivity(claim, ck, s)
    rows = [
        ("claim", claim.kind if claim.strike is None else f"{claim.kind} {claim.strike:.10g}"),
        ("underlier", args.underlier),
        ("spot", claim.s0),
        ("r_star", r_star),
        ("extreme_measure", q_source),
        ("nbc_price", price),
        ("p_mean", p_mean),
        ("sensitivity", sens),
        ("adjustment_exact", exact),
        ("adjustment_first_order", first),
    ]
    if s.index_col is not None:
        v, se = pricing.empirical_price(claim, mu, r_star, s, seed=args.seed, k=args.draws)
        rows += [("empirical_price", v), ("empirical_std_err", se)]
    return [_header(args, s), kv_table("price", rows)]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        tables = args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_NUMERIC
    except CoherentRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    text = render_csv(tables) if args.csv else render_text(tables)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_DATA
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
