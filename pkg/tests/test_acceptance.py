"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Criteria 2-4 are computed once by module fixtures so that criterion 5 can
audit every instance they solved.
"""

import datetime as dt
import os
import time
from pathlib import Path

import numpy as np
import pytest

import _oracle
from _instances import as_reference, random_scenarios, toy_model
from tclflex import cli
from tclflex.admm import AdmmConfig, solve_admm
from tclflex.backtest import BacktestConfig, ModelVariant, read_csv_body, run_backtest
from tclflex.milp import (
    FirstStageDecision,
    MilpOptions,
    baseline_start,
    build_oracle,
    build_stochastic_mfrr,
    fix_first_stage,
    solve,
)
from tclflex.prices import FreezerSpec, PriceDay, load_price_csv, synthetic_price_days, write_price_csv
from tclflex.scenario import ScenarioSet
from tclflex.solvers import HighsBackend
from tclflex.thermal import ExogenousDay, ThermalParams, simulate_day, step

DK2_ENV = "TCLFLEX_DK2_PRICES"


def _record(acceptance, n, ok, detail):
    acceptance[n] = f"{'PASS' if ok else 'FAIL'} ({detail})"


# ---------------------------------------------------------------- criterion 1


def test_criterion_1_thermal_oracle(acceptance):
    t0 = time.perf_counter()
    params = ThermalParams()
    problems = []

    # Derived case: from the setpoint with the compressor off, daytime, no defrost.
    expected_air = -18.0 + (0.25 / 0.077) * (38.0 / 41.05)
    food, air = step(params, (-18.0, -18.0), (1.0, 20.0, 0.0, 0.0), "day")
    if abs(air - expected_air) > 1e-9 or abs(food + 18.0) > 1e-9:
        problems.append(f"derived case gave ({food}, {air})")
    if round(air, 3) != -14.994:
        problems.append(f"derived case rounds to {air:.3f}")

    rng = np.random.default_rng(1)
    for _ in range(200):
        tf, tc = rng.uniform(-30, 10, 2)
        od, t_in, df, p = rng.uniform(0, 1), rng.uniform(10, 30), float(rng.integers(0, 2)), rng.uniform(0, 2)
        day = bool(rng.integers(0, 2))
        got = step(params, (tf, tc), (od, t_in, df, p), "day" if day else "night")
        want = _oracle.ref_step(tf, tc, p, t_in, od, df, day)
        if max(abs(got[0] - want[0]), abs(got[1] - want[1])) > 1e-9:
            problems.append(f"step mismatch at {(tf, tc, od, t_in, df, p, day)}")
            break

    # Zero power, no defrost: both states rise monotonically towards indoor
    # temperature. The day/night switch changes the air equilibrium, so each
    # regime is held constant here.
    year = ThermalParams(J=96 * 365)
    for opening in ((0.0, 24.0), (0.0, 0.0)):
        exo = ExogenousDay.standard(year, defrost_hours=(), opening_hours=opening)
        traj = simulate_day(year, exo, np.zeros(year.J))
        for name, series in (("food", traj.t_food), ("air", traj.t_air)):
            if np.any(np.diff(series) < -1e-12):
                problems.append(f"{name} temperature not monotone ({opening})")
            if np.any(series > 20.0 + 1e-9):
                problems.append(f"{name} temperature overshoots indoor ({opening})")
            if abs(series[-1] - 20.0) > 1e-6:
                problems.append(f"{name} ends at {series[-1]:.6f}, not 20 ({opening})")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1.0:
        problems.append(f"runtime {elapsed:.2f}s")
    _record(acceptance, 1, not problems, "; ".join(problems) or f"air {air:.6f}, {elapsed:.2f}s")
    assert not problems


# ---------------------------------------------------------------- criterion 2

TIE_TOL = 1e-7


@pytest.fixture(scope="module")
def activation_runs():
    """Fixed-first-stage 2-hour dispatches on random price/bid/reserve tuples."""
    rng = np.random.default_rng(2024)
    params, exo, spec0 = toy_model(2)
    pb = spec0.p_base
    t0 = time.perf_counter()
    runs = []
    for _ in range(700):
        ls = rng.uniform(-20.0, 150.0, 2)
        alpha = float(rng.choice([0.0, rng.uniform(0.0, 5.0)]))
        beta = float(rng.uniform(0.0, 150.0))
        bid = np.array([alpha * (ls[1] - ls[0]) + ls[0] + beta, ls[1] + beta])
        delta = np.empty(2)
        for h in range(2):
            kind = rng.random()
            if kind < 0.45:
                delta[h] = bid[h] + rng.uniform(-30.0, 30.0)
            elif kind < 0.55:
                delta[h] = bid[h]
            elif kind < 0.65:
                delta[h] = -rng.uniform(0.0, 50.0)
            else:
                delta[h] = rng.uniform(-50.0, 400.0)
        lb = ls + delta
        # Exact ties stay exact only if they survive the float round trip.
        delta = lb - ls
        p_r = np.where(rng.random(2) < 0.15, 0.0, rng.uniform(0.01, 1.0, 2) * pb)
        day = PriceDay(dt.date(2022, 1, 1), ls, lb, rng.uniform(0.0, 60.0, 2))
        spec = spec0.with_penalty(1.5 * max(1.0, float(np.abs(lb).max())))
        decision = FirstStageDecision(p_r, alpha, beta)
        handle = build_oracle(spec, params, exo, day, fixed=decision)
        res = solve(handle, HighsBackend(), start=baseline_start(handle, decision))
        runs.append(dict(spec=spec, p_r=p_r, ls=ls, lb=lb, bid=bid, delta=delta, dispatch=res.dispatch))
    return runs, time.perf_counter() - t0


def test_criterion_2_activation_equivalence(acceptance, activation_runs):
    runs, elapsed = activation_runs
    checked = ties = 0
    failures = []
    for i, r in enumerate(runs):
        d = r["dispatch"][0]
        for h in range(2):
            delta, bid, p_r = r["delta"][h], r["bid"][h], r["p_r"][h]
            if abs(bid - delta) < TIE_TOL or abs(delta) < TIE_TOL:
                ties += 1
                continue
            checked += 1
            in_money = bid <= delta
            active = p_r > 0 and delta > 0 and in_money
            ok = int(d.g[h]) == int(in_money)
            if active:
                ok &= abs(d.p_up[h] + d.slack[h] - p_r) <= 1e-6 and d.p_up[h] <= p_r + 1e-6
            else:
                ok &= d.p_up[h] <= 1e-6 and d.slack[h] <= 1e-6
            if not ok:
                failures.append((i, h))
    passed = not failures and checked >= 1000 and elapsed < 120
    _record(
        acceptance, 2, passed,
        f"{checked} non-tie tuples, {ties} ties reported, {len(failures)} mismatches, {elapsed:.1f}s",
    )
    print(f"activation ties (reported, not failed): {ties}")
    assert not failures, failures[:10]
    assert checked >= 1000
    assert elapsed < 120


# ---------------------------------------------------------------- criterion 3


@pytest.fixture(scope="module")
def enumeration_runs():
    rng = np.random.default_rng(7)
    alpha_max, beta_max = 5.0, 300.0
    options = MilpOptions(alpha_max=alpha_max, beta_max=beta_max)
    t0 = time.perf_counter()
    runs = []
    for i in range(50):
        n_scen = 1 + i % 2
        scen = random_scenarios(rng, 2, n_scen)
        params, exo, spec = toy_model(2, 1.5 * float(scen.lambda_b.max()))
        handle = build_stochastic_mfrr(spec, params, exo, scen, options=options)
        res = solve(handle, HighsBackend(mip_gap=1e-9), start=baseline_start(handle))
        n_binaries = 3 * 2 * n_scen
        reference, n_lp = _oracle.brute_force(as_reference(spec, scen, alpha_max, beta_max))
        runs.append(dict(spec=spec, res=res, reference=reference, n_lp=n_lp, binaries=n_binaries))
    return runs, time.perf_counter() - t0


def test_criterion_3_brute_force(acceptance, enumeration_runs):
    runs, elapsed = enumeration_runs
    worst = 0.0
    bad = []
    for i, r in enumerate(runs):
        ref, got = r["reference"], r["res"].objective
        err = abs(got - ref)
        worst = max(worst, err / max(abs(ref), 1e-12))
        if err > 1e-6 * abs(ref) + 1e-12:
            bad.append((i, got, ref))
    ok = not bad and len(runs) >= 50 and elapsed < 300 and max(r["binaries"] for r in runs) <= 12
    _record(acceptance, 3, ok, f"{len(runs)} instances, worst relative error {worst:.2e}, {elapsed:.1f}s")
    assert not bad, bad
    assert elapsed < 300


# ---------------------------------------------------------------- criterion 4


@pytest.fixture(scope="module")
def admm_runs():
    params, exo, _ = toy_model(6)
    config = AdmmConfig(direct_solve_cap=0)
    t0 = time.perf_counter()
    runs = []
    for seed in range(100, 120):
        days = synthetic_price_days(3, seed=seed, n_hours=6)
        spec = FreezerSpec.standard(params, lambda_penalty=1.5 * max(d.lambda_b.max() for d in days), defrost_hours=())
        scen = ScenarioSet.from_days(days)
        ext = build_stochastic_mfrr(spec, params, exo, scen)
        direct = solve(ext, HighsBackend(), start=baseline_start(ext))
        admm = solve_admm(spec, params, exo, scen, config)
        fixed = solve(fix_first_stage(ext, admm.decision), HighsBackend())
        runs.append(dict(spec=spec, direct=direct, fixed=fixed, admm=admm, decision=admm.decision))
    # A single scenario is solved exactly and must not be flagged heuristic.
    days = synthetic_price_days(1, seed=99, n_hours=6)
    spec = FreezerSpec.standard(params, lambda_penalty=1.5 * days[0].lambda_b.max(), defrost_hours=())
    single = solve_admm(spec, params, exo, ScenarioSet.single(days[0]), config)
    return runs, single, time.perf_counter() - t0


def test_criterion_4_admm_vs_extensive(acceptance, admm_runs):
    runs, single, elapsed = admm_runs
    gaps = []
    for r in runs:
        best = r["direct"].objective
        gaps.append((best - r["fixed"].objective) / max(abs(best), 1e-12))
    within = sum(g <= 0.01 for g in gaps)
    flags_ok = all(r["admm"].heuristic for r in runs) and not single.heuristic
    ok = within >= 18 and flags_ok and elapsed < 600
    _record(
        acceptance, 4, ok,
        f"{within}/20 within 1%, worst gap {max(gaps):.2%}, heuristic flags "
        f"{'correct' if flags_ok else 'WRONG'}, {elapsed:.0f}s",
    )
    assert flags_ok
    assert within >= 18, gaps
    assert elapsed < 600


# ---------------------------------------------------------------- criterion 5


def test_criterion_5_structural_invariants(acceptance, activation_runs, enumeration_runs, admm_runs):
    violations = []
    n_checked = 0

    def audit(label, spec, p_r, dispatches):
        nonlocal n_checked
        for w, d in enumerate(dispatches):
            n_checked += 1
            for msg in _oracle.check_structure(d, spec.p_base, spec.p_min, spec.p_nom, p_r, spec.defrost_mask()):
                violations.append(f"{label} scenario {w}: {msg}")
            # Temperatures must follow the model from the dispatched power.
            tf, _ = _oracle.ref_simulate(np.repeat(d.p, 4), day=_oracle.day_flags(len(d.t_food)))
            if np.max(np.abs(tf - d.t_food)) > 1e-6:
                violations.append(f"{label} scenario {w}: food trajectory inconsistent with power")

    for i, r in enumerate(activation_runs[0]):
        audit(f"activation {i}", r["spec"], r["p_r"], r["dispatch"])
    for i, r in enumerate(enumeration_runs[0]):
        audit(f"enumeration {i}", r["spec"], r["res"].first_stage.p_reserve, r["res"].dispatch)
    for i, r in enumerate(admm_runs[0]):
        audit(f"admm direct {i}", r["spec"], r["direct"].first_stage.p_reserve, r["direct"].dispatch)
        audit(f"admm fixed {i}", r["spec"], r["decision"].p_reserve, r["fixed"].dispatch)
    _record(acceptance, 5, not violations, f"{n_checked} dispatches audited, {len(violations)} violations")
    assert not violations, violations[:20]


def test_defrost_prohibition_on_full_day():
    """Criterion 5 instances have no defrost, so audit the defrost rule on a real day too."""
    params = ThermalParams()
    exo = ExogenousDay.standard(params)
    days = synthetic_price_days(2, seed=5)
    spec = FreezerSpec.standard(params, lambda_penalty=1.5 * max(d.lambda_b.max() for d in days))
    handle = build_oracle(spec, params, exo, days[0])
    res = solve(handle, HighsBackend(mip_gap=1e-4), start=baseline_start(handle))
    assert res.first_stage.p_reserve[list(spec.defrost_hours)].max() <= 1e-9
    assert not _oracle.check_structure(
        res.dispatch[0], spec.p_base, spec.p_min, spec.p_nom, res.first_stage.p_reserve, spec.defrost_mask()
    )


# ---------------------------------------------------------------- criterion 6


def test_criterion_6_backtest_dominance(acceptance):
    t0 = time.perf_counter()
    params = ThermalParams()
    exo = ExogenousDay.standard(params)
    days = synthetic_price_days(33, start=dt.date(2023, 3, 1), seed=11)
    config = BacktestConfig(seed=0, node_limit=20, admm=AdmmConfig(max_iters=3, direct_solve_cap=0))
    variants = [
        ModelVariant("base_cost"),
        ModelVariant("load_shifting"),
        ModelVariant("mfrr_historical", n_scenarios=3, lookback_k=3),
        ModelVariant("mfrr_lookback", n_scenarios=3, lookback_k=3),
        ModelVariant("mfrr_oracle"),
    ]
    spec = FreezerSpec.standard(params)
    report = run_backtest(variants, days, spec, params, exo, config)
    elapsed = time.perf_counter() - t0
    problems = []
    n_days = {v: len(report.results[v]) for v in report.variants}
    if any(n != 30 for n in n_days.values()):
        problems.append(f"evaluated days {n_days}")
    oracle = {r.date: r.net_cost for r in report.results["mfrr_oracle"]}
    for v in ("mfrr_historical", "mfrr_lookback"):
        for r in report.results[v]:
            if oracle[r.date] > r.net_cost:
                problems.append(f"oracle above {v} on {r.date}")
    if report.total("load_shifting") > report.total("base_cost"):
        problems.append("load shifting cumulative cost above base")
    for v in report.variants:
        running = 0.0
        for r, c in zip(report.results[v], report.cumulative(v)):
            net = r.energy_cost - r.reservation_revenue - r.activation_revenue + r.rebound_cost + r.penalty_cost
            running += r.net_cost
            if net != r.net_cost or running != c:
                problems.append(f"accounting identity broken for {v} on {r.date}")
        if report.total(v) != running:
            problems.append(f"total of {v} is not the sum of its days")
    if elapsed >= 600:
        problems.append(f"runtime {elapsed:.0f}s")
    savings = ", ".join(f"{v} {report.savings_pct(v):.1f}%" for v in report.variants[1:])
    _record(acceptance, 6, not problems, "; ".join(problems[:5]) or f"30 days, savings {savings}, {elapsed:.0f}s")
    assert not problems, problems


# ---------------------------------------------------------------- criterion 7


def test_criterion_7_determinism(acceptance, tmp_path):
    prices = tmp_path / "prices.csv"
    write_price_csv(synthetic_price_days(5, start=dt.date(2023, 1, 1), seed=3), prices)
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"data: {{prices: {prices}}}\n"
        "scenario: {n_scenarios: 2, lookback_k: 2}\n"
        "admm: {max_iters: 2, direct_solve_cap: 0}\n"
        "solver: {node_limit: 10}\n"
        "seed: 42\n"
    )
    bodies = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["--config", str(cfg), "--out-dir", str(out), "backtest"]) == 0
        bodies.append({name: read_csv_body(out / f"{name}.csv") for name in ("report", "summary", "curve")})
    same = bodies[0] == bodies[1] and all(bodies[0].values())
    _record(acceptance, 7, same, "report, summary and curve bodies byte-identical" if same else "bodies differ")
    assert same


# ---------------------------------------------------------------- criterion 8


def test_criterion_8_dk2_reproduction(acceptance):
    path = os.environ.get(DK2_ENV)
    if not path:
        acceptance[8] = f"SKIPPED (set {DK2_ENV} to a DK2 2021-2022 price CSV to run)"
        pytest.skip(f"{DK2_ENV} not set")
    days = load_price_csv(Path(path), (dt.date(2021, 1, 1), dt.date(2022, 12, 31)))
    params = ThermalParams()
    exo = ExogenousDay.standard(params)
    config = BacktestConfig(
        eval_range=(dt.date(2022, 1, 1), dt.date(2022, 12, 31)),
        train_range=(dt.date(2021, 1, 1), dt.date(2021, 12, 31)),
        time_limit=60.0,
        mip_gap=1e-4,
    )
    variants = [ModelVariant(n) for n in ("base_cost", "load_shifting", "mfrr_historical", "mfrr_lookback", "mfrr_oracle")]
    report = run_backtest(variants, days, FreezerSpec.standard(params), params, exo, config)
    totals = {v: report.total(v) for v in report.variants}
    s = {v: report.savings_pct(v) for v in report.variants}
    ordering = (
        max(totals, key=totals.get) == "base_cost"
        and min(totals, key=totals.get) == "mfrr_oracle"
        and s["mfrr_lookback"] > s["mfrr_historical"]
        and s["load_shifting"] > s["mfrr_historical"]
    )
    magnitudes = (
        abs(s["load_shifting"] - 13.9) <= 3
        and abs(s["mfrr_lookback"] - 13.9) <= 3
        and abs(s["mfrr_historical"] - 11.6) <= 3
    )
    detail = ", ".join(f"{v} {s[v]:.1f}%" for v in report.variants[1:])
    _record(acceptance, 8, ordering and magnitudes, detail)
    assert ordering, totals
    assert magnitudes, s
