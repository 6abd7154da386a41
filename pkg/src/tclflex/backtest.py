"""Out-of-sample replay of a price window for the five bidding strategies.

Every evaluated day is settled with realized prices: the day-ahead schedule
is bought at spot, reserves earn the reservation price, delivered
up-regulation earns the balancing price, rebound is bought back at the
balancing price and undelivered activated reserve pays the penalty price.
"""

from __future__ import annotations

import csv
import datetime as dt
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .admm import AdmmConfig, solve_admm
from .errors import InvalidInputError, TclFlexError
from .loadshift import energy_cost, solve_load_shift
from .milp import (
    ENERGY_SCALE,
    FirstStageDecision,
    MilpOptions,
    MilpResult,
    SecondStageDispatch,
    _default_beta_max,
    baseline_start,
    build_oracle,
    build_stochastic_mfrr,
    solve,
)
from .prices import FreezerSpec, PriceDay
from .scenario import ScenarioSet, generate_historical, generate_lookback
from .solvers import SolverBackend, make_backend
from .thermal import ExogenousDay, ThermalParams

logger = logging.getLogger(__name__)

VARIANT_NAMES = ("base_cost", "load_shifting", "mfrr_historical", "mfrr_lookback", "mfrr_oracle")
MFRR_POLICIES = ("mfrr_historical", "mfrr_lookback")
REPORT_COLUMNS = (
    "date", "variant", "energy_cost", "reservation_revenue", "activation_revenue",
    "rebound_cost", "penalty_cost", "net_cost", "cumulative_net_cost",
)
SUMMARY_COLUMNS = ("variant", "days", "failed_days", "total_net_cost", "savings_pct")
CURVE_COLUMNS = ("date", "variant", "cumulative_net_cost")


@dataclass(frozen=True)
class ModelVariant:
    name: str
    n_scenarios: int = 50
    lookback_k: int = 5

    def __post_init__(self) -> None:
        if self.name not in VARIANT_NAMES:
            raise InvalidInputError(f"unknown variant {self.name!r}; expected one of {VARIANT_NAMES}")
        if self.n_scenarios < 1 or self.lookback_k < 1:
            raise InvalidInputError("scenario count and lookback length must be >= 1")


def default_variants(n_scenarios: int = 50, lookback_k: int = 5) -> list[ModelVariant]:
    return [ModelVariant(name, n_scenarios, lookback_k) for name in VARIANT_NAMES]


@dataclass(frozen=True)
class BacktestConfig:
    seed: int = 0
    penalty_factor: float = 1.5
    lambda_penalty: float | None = None
    eval_range: tuple[dt.date | None, dt.date | None] = (None, None)
    train_range: tuple[dt.date | None, dt.date | None] = (None, None)
    solver: str = "highs"
    time_limit: float | None = None
    mip_gap: float = 1e-6
    node_limit: int | None = None
    lookback_method: str = "extensive"
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    milp: MilpOptions = field(default_factory=MilpOptions)
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.lookback_method not in ("extensive", "admm"):
            raise InvalidInputError(f"lookback_method must be 'extensive' or 'admm', got {self.lookback_method!r}")
        if self.penalty_factor < 0:
            raise InvalidInputError("penalty_factor must be >= 0")

    def backend(self, stochastic: bool = False) -> SolverBackend:
        """Solver for single-day models; ``stochastic=True`` also applies the node limit,
        which is meant for the multi-scenario extensive form only."""
        node_limit = self.node_limit if stochastic else None
        return make_backend(self.solver, self.time_limit, self.mip_gap, node_limit)


@dataclass
class DailyResult:
    """Settlement of one day for one variant (currency)."""

    date: dt.date
    variant: str
    energy_cost: float
    reservation_revenue: float = 0.0
    activation_revenue: float = 0.0
    rebound_cost: float = 0.0
    penalty_cost: float = 0.0
    net_cost: float = field(init=False)
    p: np.ndarray | None = None
    dispatch: SecondStageDispatch | None = None
    first_stage: FirstStageDecision | None = None
    status: str = "optimal"

    def __post_init__(self) -> None:
        self.net_cost = (
            self.energy_cost
            - self.reservation_revenue
            - self.activation_revenue
            + self.rebound_cost
            + self.penalty_cost
        )


def base_result(date: dt.date, realized: PriceDay, spec: FreezerSpec) -> DailyResult:
    return DailyResult(date, "base_cost", energy_cost(realized.lambda_s, spec.p_base), p=spec.p_base.copy())


def settle_mfrr(
    date: dt.date, variant: str, realized: PriceDay, spec: FreezerSpec, res: MilpResult
) -> DailyResult:
    d = res.dispatch[0]
    lb = realized.lambda_b
    return DailyResult(
        date,
        variant,
        energy_cost(realized.lambda_s, spec.p_base),
        float(ENERGY_SCALE * np.dot(realized.lambda_r, res.first_stage.p_reserve)),
        float(ENERGY_SCALE * np.dot(lb, d.p_up)),
        float(ENERGY_SCALE * np.dot(lb, d.p_dn)),
        float(ENERGY_SCALE * spec.lambda_penalty * d.slack.sum()),
        p=d.p.copy(),
        dispatch=d,
        first_stage=res.first_stage,
        status=res.status,
    )


def train_historical(
    train_days: Sequence[PriceDay],
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    n_scenarios: int = 50,
    config: BacktestConfig | None = None,
):
    """Fixed policy learnt once with ADMM on up-sampled history scenarios."""
    config = config or BacktestConfig()
    scen = generate_historical(train_days, n_scenarios, config.seed)
    return solve_admm(spec, params, exo, scen, config.admm, config.milp), scen


def lookback_policy(
    history: Sequence[PriceDay],
    date: dt.date,
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    k: int = 5,
    config: BacktestConfig | None = None,
    backend: SolverBackend | None = None,
) -> FirstStageDecision:
    """Policy re-solved on the ``k`` most recent days (all first-stage variables)."""
    config = config or BacktestConfig()
    scen = generate_lookback(history, date, k)
    if config.lookback_method == "admm":
        return solve_admm(spec, params, exo, scen, config.admm, config.milp).decision
    handle = build_stochastic_mfrr(spec, params, exo, scen, options=config.milp)
    return solve(handle, backend or config.backend(stochastic=True), start=baseline_start(handle)).first_stage


def dispatch_policy(
    decision: FirstStageDecision,
    realized: PriceDay,
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    backend: SolverBackend,
    options: MilpOptions | None = None,
) -> MilpResult:
    """Second-stage response to realized prices with the first stage fixed."""
    handle = build_oracle(spec, params, exo, realized, options=options, fixed=decision)
    return solve(handle, backend, start=baseline_start(handle, decision))


def solve_oracle(
    realized: PriceDay,
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    backend: SolverBackend,
    options: MilpOptions | None = None,
    starts: Sequence[MilpResult] = (),
) -> MilpResult:
    """Perfect-information optimum, warm-started from the given policy dispatches.

    The policy bounds are widened to contain every start, so each start stays
    feasible and the oracle can only improve on it.
    """
    options = options or MilpOptions()
    single = ScenarioSet.single(realized)
    beta_max = options.beta_max if options.beta_max is not None else _default_beta_max(single, options.alpha_max)
    alpha_max = options.alpha_max
    for r in starts:
        alpha_max = max(alpha_max, r.first_stage.alpha)
        beta_max = max(beta_max, r.first_stage.beta)
    options = replace(options, alpha_max=alpha_max, beta_max=beta_max)
    handle = build_oracle(spec, params, exo, realized, options=options)
    best = max(starts, key=lambda r: r.objective, default=None)
    start = best.solution.x if best is not None else baseline_start(handle)
    res = solve(handle, backend, start=start)
    if best is not None and best.objective > res.objective:
        return best
    return res


def evaluate_day(
    variant: ModelVariant | str,
    date: dt.date,
    history: Sequence[PriceDay],
    realized: PriceDay,
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    backend: SolverBackend | None = None,
    config: BacktestConfig | None = None,
    policy: FirstStageDecision | None = None,
    oracle_starts: Sequence[MilpResult] = (),
) -> tuple[DailyResult, MilpResult | None]:
    """Settle one day; also returns the solved dispatch model for mFRR variants.

    ``policy`` is required for ``mfrr_historical`` (train it with
    :func:`train_historical`).
    """
    if isinstance(variant, str):
        variant = ModelVariant(variant)
    config = config or BacktestConfig()
    backend = backend or config.backend()
    if any(d.date >= date for d in history):
        raise InvalidInputError(f"history must strictly precede {date}")
    if spec.lambda_penalty is None:
        raise InvalidInputError("freezer spec has no penalty price")
    name = variant.name
    if name == "base_cost":
        return base_result(date, realized, spec), None
    if name == "load_shifting":
        plan = solve_load_shift(spec, params, exo, realized, backend, config.milp)
        cost = energy_cost(realized.lambda_s, plan.p)
        base = base_result(date, realized, spec)
        if cost > base.energy_cost:
            # The baseline is always feasible, so a worse plan is solver noise.
            return replace(base, variant=name, status=plan.status), None
        return DailyResult(date, name, cost, p=plan.p, dispatch=plan.dispatch, status=plan.status), None
    if name == "mfrr_oracle":
        res = solve_oracle(realized, spec, params, exo, backend, config.milp, oracle_starts)
        # Every start is feasible for the oracle; keep whichever settles cheapest.
        settled = [settle_mfrr(date, name, realized, spec, r) for r in (res, *oracle_starts)]
        best = min(range(len(settled)), key=lambda i: settled[i].net_cost)
        return settled[best], (res, *oracle_starts)[best]
    else:
        if name == "mfrr_lookback":
            policy = lookback_policy(history, date, spec, params, exo, variant.lookback_k, config)
        elif policy is None:
            raise InvalidInputError("mfrr_historical needs a trained policy")
        res = dispatch_policy(policy, realized, spec, params, exo, backend, config.milp)
    return settle_mfrr(date, name, realized, spec, res), res


@dataclass
class BacktestReport:
    variants: list[str]
    results: dict[str, list[DailyResult]]
    failed: dict[str, list[dt.date]] = field(default_factory=dict)
    policy: FirstStageDecision | None = None

    def cumulative(self, variant: str) -> list[float]:
        return list(itertools.accumulate(r.net_cost for r in self.results[variant]))

    def total(self, variant: str) -> float:
        c = self.cumulative(variant)
        return c[-1] if c else 0.0

    def savings_pct(self, variant: str) -> float:
        base = self.total("base_cost") if "base_cost" in self.results else float("nan")
        if not base:
            return float("nan")
        return 100.0 * (base - self.total(variant)) / base

    def report_rows(self) -> Iterable[list[str]]:
        cumulative = {v: self.cumulative(v) for v in self.variants}
        rows = []
        for v in self.variants:
            for r, c in zip(self.results[v], cumulative[v]):
                rows.append((r.date, VARIANT_NAMES.index(v), [
                    r.date.isoformat(), v, *(_fmt(x) for x in (
                        r.energy_cost, r.reservation_revenue, r.activation_revenue,
                        r.rebound_cost, r.penalty_cost, r.net_cost, c,
                    ))
                ]))
        rows.sort(key=lambda t: (t[0], t[1]))
        return [row for _, _, row in rows]

    def summary_rows(self) -> list[list[str]]:
        return [
            [v, str(len(self.results[v])), str(len(self.failed.get(v, []))),
             _fmt(self.total(v)), _fmt(self.savings_pct(v))]
            for v in self.variants
        ]

    def curve_rows(self) -> list[list[str]]:
        return [
            [r.date.isoformat(), v, _fmt(c)]
            for v in self.variants
            for r, c in zip(self.results[v], self.cumulative(v))
        ]

    def write(self, out_dir: str | Path, header: Sequence[str] = ()) -> dict[str, Path]:
        """Write report.csv, summary.csv and curve.csv.

        ``header`` lines are written first as ``# ...`` comments; everything
        after them depends only on the results.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        failed = sum(len(d) for d in self.failed.values())
        lines = list(header) + [f"failed_days: {failed}"]
        paths = {}
        for name, cols, rows in (
            ("report", REPORT_COLUMNS, self.report_rows()),
            ("summary", SUMMARY_COLUMNS, self.summary_rows()),
            ("curve", CURVE_COLUMNS, self.curve_rows()),
        ):
            path = out / f"{name}.csv"
            with path.open("w", newline="", encoding="utf-8") as handle:
                for line in lines:
                    handle.write(f"# {line}\n")
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(cols)
                writer.writerows(rows)
            paths[name] = path
        return paths


def _fmt(x: float) -> str:
    return repr(float(x))


def read_csv_body(path: str | Path) -> str:
    """File content without the leading ``#`` header lines."""
    text = Path(path).read_text(encoding="utf-8")
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def _in_range(date: dt.date, rng: tuple[dt.date | None, dt.date | None]) -> bool:
    lo, hi = rng
    return (lo is None or date >= lo) and (hi is None or date <= hi)


def split_dataset(
    dataset: Sequence[PriceDay], variants: Sequence[ModelVariant], config: BacktestConfig
) -> tuple[list[PriceDay], list[PriceDay]]:
    """Training days and evaluation days.

    Without an explicit evaluation range, evaluation starts at the first day
    preceded by enough days for the longest lookback; training defaults to
    every day before the evaluation window.
    """
    days = sorted(dataset, key=lambda d: d.date)
    if not days:
        raise InvalidInputError("empty dataset")
    if config.eval_range != (None, None):
        evaluation = [d for d in days if _in_range(d.date, config.eval_range)]
    else:
        skip = max((v.lookback_k for v in variants if v.name in MFRR_POLICIES), default=0)
        evaluation = days[skip:]
    if not evaluation:
        raise InvalidInputError("evaluation window is empty")
    first = evaluation[0].date
    if config.train_range != (None, None):
        training = [d for d in days if _in_range(d.date, config.train_range) and d.date < first]
    else:
        training = [d for d in days if d.date < first]
    return training, evaluation


def _evaluate_date(args) -> tuple[dt.date, dict[str, DailyResult | str]]:
    variants, day, history, spec, params, exo, config, policy = args
    backend = config.backend()
    out: dict[str, DailyResult | str] = {}
    starts = []
    for variant in sorted(variants, key=lambda v: VARIANT_NAMES.index(v.name)):
        try:
            result, res = evaluate_day(
                variant, day.date, history, day, spec, params, exo, backend, config,
                policy if variant.name == "mfrr_historical" else None, starts,
            )
        except TclFlexError as exc:
            out[variant.name] = str(exc)
            continue
        if res is not None and variant.name in MFRR_POLICIES:
            starts.append(res)
        out[variant.name] = result
    return day.date, out


def run_backtest(
    variants: Sequence[ModelVariant | str],
    dataset: Sequence[PriceDay],
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    config: BacktestConfig | None = None,
    policy: FirstStageDecision | None = None,
) -> BacktestReport:
    """Replay the evaluation window day by day.

    A day that fails for a variant is left out of that variant's series with a
    warning and counted in the report.
    """
    config = config or BacktestConfig()
    variants = [ModelVariant(v) if isinstance(v, str) else v for v in variants]
    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise InvalidInputError("duplicate variants")
    training, evaluation = split_dataset(dataset, variants, config)
    penalty = config.lambda_penalty
    if penalty is None:
        penalty = max(0.0, config.penalty_factor * max(float(d.lambda_b.max()) for d in evaluation))
    spec = spec.with_penalty(penalty)

    if "mfrr_historical" in names and policy is None:
        if not training:
            raise InvalidInputError("mfrr_historical needs training days before the evaluation window")
        n = next(v.n_scenarios for v in variants if v.name == "mfrr_historical")
        policy = train_historical(training, spec, params, exo, n, config)[0].decision

    days = sorted(dataset, key=lambda d: d.date)
    tasks = [
        (variants, day, [d for d in days if d.date < day.date], spec, params, exo, config, policy)
        for day in evaluation
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            outcomes = list(pool.map(_evaluate_date, tasks))
    else:
        outcomes = [_evaluate_date(t) for t in tasks]

    ordered = [n for n in VARIANT_NAMES if n in names]
    report = BacktestReport(ordered, {n: [] for n in ordered}, {n: [] for n in ordered}, policy)
    for date, out in outcomes:
        for n in ordered:
            value = out[n]
            if isinstance(value, str):
                logger.warning("%s on %s failed and is excluded: %s", n, date, value)
                report.failed[n].append(date)
            else:
                report.results[n].append(value)
    return report


@dataclass
class SweepRow:
    count: int
    in_sample_cost_per_day: float
    oos_cost_per_day: float


def scenario_sweep(
    counts: Sequence[int],
    train_history: Sequence[PriceDay],
    eval_dataset: Sequence[PriceDay],
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    config: BacktestConfig | None = None,
) -> list[SweepRow]:
    """In-sample and out-of-sample daily cost of the historical policy per scenario count.

    In-sample cost is the expected baseline energy cost of the training
    scenarios minus the policy's expected profit on them.
    """
    config = config or BacktestConfig()
    if not counts or any(c < 1 for c in counts):
        raise InvalidInputError("scenario counts must be >= 1")
    if not train_history or not eval_dataset:
        raise InvalidInputError("sweep needs training and evaluation days")
    evaluation = sorted(eval_dataset, key=lambda d: d.date)
    if config.lambda_penalty is None:
        penalty = max(0.0, config.penalty_factor * max(float(d.lambda_b.max()) for d in evaluation))
    else:
        penalty = config.lambda_penalty
    spec = spec.with_penalty(penalty)
    window = replace(config, eval_range=(evaluation[0].date, evaluation[-1].date), lambda_penalty=penalty)
    dataset = list({d.date: d for d in (*train_history, *evaluation)}.values())
    rows = []
    for count in counts:
        trained, scen = train_historical(train_history, spec, params, exo, count, config)
        base = float(np.mean([energy_cost(s, spec.p_base) for s in scen.lambda_s]))
        report = run_backtest(["mfrr_historical"], dataset, spec, params, exo, window, trained.decision)
        series = report.results["mfrr_historical"]
        oos = float(np.mean([r.net_cost for r in series])) if series else float("nan")
        rows.append(SweepRow(count, base - trained.objective, oos))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path, header: Sequence[str] = ()) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        for line in header:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("count", "in_sample_cost_per_day", "oos_cost_per_day"))
        for r in rows:
            writer.writerow([r.count, _fmt(r.in_sample_cost_per_day), _fmt(r.oos_cost_per_day)])
    return path
