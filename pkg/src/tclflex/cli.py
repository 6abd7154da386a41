"""Command-line interface: ``tclflex [global flags] <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backtest as bt
from .admm import solve_admm
from .config import RunConfig, load_config
from .errors import ConfigError, InvalidInputError, ParseError, SchemaError, SolverError, TclFlexError
from .loadshift import build_load_shift, solve_load_shift, write_plan_csv
from .milp import BINARY_NAMES, MilpResult, baseline_start, build_oracle, build_stochastic_mfrr, export_model, solve
from .prices import PriceDay, load_price_csv
from .scenario import generate_historical, generate_lookback, write_scenarios_csv
from .thermal import hourly_to_steps, simulate_day

logger = logging.getLogger("tclflex")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4


def _header(handle, cfg: RunConfig) -> None:
    for line in cfg.header():
        handle.write(f"# {line}\n")


def _write_csv(path: Path, cfg: RunConfig, columns: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        _header(handle, cfg)
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def _prepend_header(path: Path, cfg: RunConfig) -> None:
    body = path.read_text(encoding="utf-8")
    with path.open("w", encoding="utf-8", newline="") as handle:
        _header(handle, cfg)
        handle.write(body)


def _f(x) -> str:
    return repr(float(x))


def _prices(cfg: RunConfig) -> list[PriceDay]:
    path = cfg.prices_path
    if path is None:
        raise ConfigError("no price file configured (data.prices or --prices)")
    days = load_price_csv(path)
    if not days:
        raise SchemaError(f"{path}: no complete days")
    return days


def _day(days: Sequence[PriceDay], date: dt.date) -> PriceDay:
    for d in days:
        if d.date == date:
            return d
    raise InvalidInputError(f"no prices for {date}")


def _penalty(cfg: RunConfig, days: Sequence[PriceDay]) -> float:
    value = cfg.raw["freezer"]["lambda_penalty"]
    if value is not None:
        return float(value)
    factor = cfg.raw["backtest"]["penalty_factor"]
    return max(0.0, factor * max(float(d.lambda_b.max()) for d in days))


def read_profile(path: Path, n_hours: int, steps_per_hour: int) -> np.ndarray:
    """Power profile CSV with columns ``hour,power_kw`` (hourly) or ``step,power_kw``."""
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(row for row in handle if not row.startswith("#"))
        header = next(reader, None)
        if header is None or len(header) < 2 or header[1].strip() != "power_kw" or header[0].strip() not in ("hour", "step"):
            raise SchemaError(f"{path}: expected header 'hour,power_kw' or 'step,power_kw'")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx, value = int(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad profile row {row!r}", lineno) from exc
            if idx != len(values):
                raise ParseError(f"expected index {len(values)}, got {idx}", lineno)
            if not np.isfinite(value) or value < 0:
                raise ParseError(f"power must be finite and >= 0, got {value}", lineno)
            values.append(value)
    kind = header[0].strip()
    expected = n_hours if kind == "hour" else n_hours * steps_per_hour
    if len(values) != expected:
        raise SchemaError(f"{path}: {len(values)} {kind} rows, expected {expected}")
    arr = np.array(values)
    return hourly_to_steps(arr, steps_per_hour) if kind == "hour" else arr


def cmd_simulate(cfg: RunConfig, args) -> int:
    params = cfg.thermal()
    exo = cfg.exogenous(params)
    spec = cfg.freezer(params)
    if args.profile:
        power = read_profile(Path(args.profile), params.n_hours, params.steps_per_hour)
    else:
        power = hourly_to_steps(spec.p_base, params.steps_per_hour)
    traj = simulate_day(params, exo, power)
    rows = [
        [t, _f(t * params.dt), _f(power[t]), _f(traj.t_food[t]), _f(traj.t_air[t])]
        for t in range(params.J)
    ]
    path = _write_csv(cfg.out_dir / "trajectory.csv", cfg, ("step", "time_h", "power_kw", "t_food", "t_air"), rows)
    print(path)
    return EXIT_OK


def _write_solution(cfg: RunConfig, res: MilpResult) -> list[Path]:
    fs = res.first_stage
    out = cfg.out_dir
    decision = _write_csv(
        out / "decision.csv", cfg, ("hour", "p_reserve_kw", "alpha", "beta"),
        [[h, _f(p), _f(fs.alpha), _f(fs.beta)] for h, p in enumerate(fs.p_reserve)],
    )
    cols = ("scenario", "hour", "p_kw", "p_up_kw", "p_dn_kw", "slack_kw", "bid_price") + BINARY_NAMES
    rows = []
    for w, d in enumerate(res.dispatch):
        for h in range(len(d.p)):
            rows.append(
                [w, h, _f(d.p[h]), _f(d.p_up[h]), _f(d.p_dn[h]), _f(d.slack[h]), _f(d.lambda_bid[h])]
                + [int(getattr(d, name)[h]) for name in BINARY_NAMES]
            )
    dispatch = _write_csv(out / "dispatch.csv", cfg, cols, rows)
    return [decision, dispatch]


def cmd_solve(cfg: RunConfig, args) -> int:
    days = _prices(cfg)
    date = dt.date.fromisoformat(args.date) if args.date else days[-1].date
    params = cfg.thermal()
    exo = cfg.exogenous(params)
    spec = cfg.freezer(params).with_penalty(_penalty(cfg, days))
    bcfg = cfg.backtest(args.jobs)
    backend = bcfg.backend()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "loadshift":
        day = _day(days, date)
        if args.export:
            export_model(build_load_shift(spec, params, exo, day, cfg.milp()), args.export)
        plan = solve_load_shift(spec, params, exo, day, backend, cfg.milp())
        path = write_plan_csv(plan, day, spec, cfg.out_dir / "plan.csv")
        _prepend_header(path, cfg)
        print(path)
        print(f"savings: {plan.savings:.6f}")
        return EXIT_OK

    decision = None
    if args.mode == "oracle":
        handle = build_oracle(spec, params, exo, _day(days, date), options=cfg.milp())
    else:
        history = [d for d in days if d.date < date]
        sc = cfg.raw["scenario"]
        if args.scenarios == "historical":
            scen = generate_historical(history, int(sc["n_scenarios"]), cfg.seed)
        else:
            scen = generate_lookback(history, date, int(sc["lookback_k"]))
        if args.method == "admm":
            result = solve_admm(spec, params, exo, scen, cfg.admm(args.jobs), cfg.milp())
            decision = result.decision
            handle = build_stochastic_mfrr(spec, params, exo, scen, options=cfg.milp(), fixed=decision)
            result.write_diagnostics(cfg.out_dir / "admm_diagnostics.csv")
            _prepend_header(cfg.out_dir / "admm_diagnostics.csv", cfg)
        else:
            handle = build_stochastic_mfrr(spec, params, exo, scen, options=cfg.milp())
    if args.export:
        export_model(handle, args.export)
    if args.mode == "mfrr" and args.method == "extensive":
        backend = bcfg.backend(stochastic=True)
    res = solve(handle, backend, start=baseline_start(handle, decision))
    for path in _write_solution(cfg, res):
        print(path)
    print(f"objective: {res.objective:.9f} status: {res.status}")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, args) -> int:
    days = _prices(cfg)
    params = cfg.thermal()
    sc = cfg.raw["scenario"]
    variants = [bt.ModelVariant(n, int(sc["n_scenarios"]), int(sc["lookback_k"])) for n in args.variants]
    report = bt.run_backtest(
        variants, days, cfg.freezer(params), params, cfg.exogenous(params), cfg.backtest(args.jobs)
    )
    paths = report.write(cfg.out_dir, cfg.header())
    for p in paths.values():
        print(p)
    for v in report.variants:
        print(f"{v}: total {report.total(v):.4f}, savings {report.savings_pct(v):.2f}%")
    failed = sum(len(x) for x in report.failed.values())
    limit = int(cfg.raw["backtest"]["max_failed_days"])
    if failed > limit:
        logger.error("%d failed day evaluations exceed the allowed %d", failed, limit)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    days = _prices(cfg)
    params = cfg.thermal()
    bcfg = cfg.backtest(args.jobs)
    train, evaluation = bt.split_dataset(days, [bt.ModelVariant("mfrr_historical")], bcfg)
    if not train:
        # No explicit split: train on the first half.
        half = max(1, len(days) // 2)
        train, evaluation = days[:half], days[half:]
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = bt.scenario_sweep(counts, train, evaluation, cfg.freezer(params), params, cfg.exogenous(params), bcfg)
    path = bt.write_sweep_csv(rows, cfg.out_dir / "sweep.csv", cfg.header())
    print(path)
    return EXIT_OK


def cmd_scenarios(cfg: RunConfig, args) -> int:
    days = _prices(cfg)
    sc = cfg.raw["scenario"]
    if args.kind == "historical":
        scen = generate_historical(days, args.count or int(sc["n_scenarios"]), cfg.seed)
    else:
        date = dt.date.fromisoformat(args.date) if args.date else days[-1].date + dt.timedelta(days=1)
        scen = generate_lookback(days, date, args.count or int(sc["lookback_k"]))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = write_scenarios_csv(scen, cfg.out_dir / "scenarios.csv")
    _prepend_header(path, cfg)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tclflex", description="Freezer flexibility: load shifting and mFRR bidding.")
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    parser.add_argument("--out-dir", help="override output.dir")
    parser.add_argument("--prices", help="override data.prices")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a power profile through the thermal model")
    p.add_argument("--profile", help="CSV with hour,power_kw or step,power_kw (default: baseline)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="solve one day")
    p.add_argument("mode", choices=("mfrr", "loadshift", "oracle"))
    p.add_argument("--date", help="target day (default: last day in the price file)")
    p.add_argument("--scenarios", choices=("lookback", "historical"), default="lookback")
    p.add_argument("--method", choices=("extensive", "admm"), default="extensive")
    p.add_argument("--export", help="also write the model as .lp or .mps")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("backtest", help="replay the price window for all strategies")
    p.add_argument("--variants", nargs="+", default=list(bt.VARIANT_NAMES), choices=bt.VARIANT_NAMES)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", help="in/out-of-sample cost versus number of scenarios")
    p.add_argument("--counts", default="1,5,10,25,50")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scenarios", help="export a generated scenario set")
    p.add_argument("--kind", choices=("historical", "lookback"), default="historical")
    p.add_argument("--count", type=int, help="scenario count / lookback length")
    p.add_argument("--date", help="lookback target day")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        overrides: dict = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out_dir:
            overrides["output"] = {"dir": args.out_dir}
        if args.prices:
            overrides["data"] = {"prices": str(Path(args.prices).resolve())}
        cfg = load_config(args.config, overrides)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (TclFlexError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
