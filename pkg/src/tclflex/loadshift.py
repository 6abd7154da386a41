"""Deterministic load shifting against known day-ahead spot prices.

Same consumption, regulation and rebound rows as the reserve model (so a
reduction must be followed immediately by its rebound), without reserves,
bids or scenarios. The objective is the spot energy bill.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .milp import (
    ENERGY_SCALE,
    MilpOptions,
    ModelHandle,
    SecondStageDispatch,
    _add_dispatch_block,
    _check_dims,
    _temperature_m,
    baseline_start,
    solve,
)
from .model import LinearModel
from .prices import FreezerSpec, PriceDay
from .scenario import ScenarioSet
from .solvers import HighsBackend, SolverBackend
from .thermal import ExogenousDay, TemperatureTrajectory, ThermalParams, baseline_trajectory

PLAN_COLUMNS = ("hour", "p_base_kw", "p_shifted_kw", "spot_price", "trajectory_t_air", "trajectory_t_food")


@dataclass
class ShiftPlan:
    p: np.ndarray
    savings: float
    trajectory: TemperatureTrajectory
    dispatch: SecondStageDispatch | None = None
    status: str = "optimal"

    @property
    def deviation(self) -> np.ndarray:
        """Hourly deviation from the day-ahead baseline (kW), e.g. for pricing imbalance."""
        if self.dispatch is None:
            return np.zeros_like(self.p)
        return self.dispatch.p_dn - self.dispatch.p_up


def energy_cost(lambda_s: np.ndarray, p: np.ndarray) -> float:
    return float(ENERGY_SCALE * np.dot(lambda_s, p))


def savings(plan: ShiftPlan | np.ndarray, day: PriceDay, spec: FreezerSpec) -> float:
    """Spot cost of the baseline minus spot cost of the plan."""
    p = plan.p if isinstance(plan, ShiftPlan) else np.asarray(plan, dtype=float)
    return float(ENERGY_SCALE * np.dot(day.lambda_s, spec.p_base - p))


def build_load_shift(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    day: PriceDay,
    options: MilpOptions | None = None,
) -> ModelHandle:
    options = options or MilpOptions()
    _check_dims(spec, params, exo, day.n_hours)
    base = baseline_trajectory(params, exo, spec.p_base, options.init)
    m_temp = _temperature_m(spec, params, exo, base, options)
    m = LinearModel("loadshift", "min")
    v = _add_dispatch_block(m, spec, params, exo, base, "s0", options, m_temp)
    v["tag"] = "s0"
    m.add_objective({v["p"][h]: ENERGY_SCALE * day.lambda_s[h] for h in range(spec.n_hours)})
    return ModelHandle(
        m, "loadshift", spec, params, exo, base, ScenarioSet.single(day), [v],
        big_m_temperature=m_temp, options=options,
    )


def solve_load_shift(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    day: PriceDay,
    backend: SolverBackend | None = None,
    options: MilpOptions | None = None,
) -> ShiftPlan:
    handle = build_load_shift(spec, params, exo, day, options)
    res = solve(handle, backend or HighsBackend(), start=baseline_start(handle))
    d = res.dispatch[0]
    traj = TemperatureTrajectory(d.t_food.copy(), d.t_air.copy())
    return ShiftPlan(d.p.copy(), savings(d.p, day, spec), traj, d, res.status)


def write_plan_csv(plan: ShiftPlan, day: PriceDay, spec: FreezerSpec, path: str | Path) -> Path:
    """One row per hour; temperatures are taken at the start of each hour."""
    path = Path(path)
    spp = len(plan.trajectory.t_food) // spec.n_hours
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PLAN_COLUMNS)
        for h in range(spec.n_hours):
            writer.writerow([
                h,
                repr(float(spec.p_base[h])),
                repr(float(plan.p[h])),
                repr(float(day.lambda_s[h])),
                repr(float(plan.trajectory.t_air[h * spp])),
                repr(float(plan.trajectory.t_food[h * spp])),
            ])
    return path
