"""YAML run configuration.

Sections mirror the library types; every key is optional::

    data:      {prices: prices.csv}
    thermal:   {C_f: 6.552, ..., setpoint: -18.0}
    freezer:   {p_base: null, p_min: 0.0, p_nom: 1.2, lambda_penalty: null,
                defrost_hours: [7, 8], t_indoor: 20.0, opening_hours: [6, 22]}
    scenario:  {n_scenarios: 50, lookback_k: 5}
    milp:      {alpha_max: 5.0, beta_max: null, big_m_temperature: null, rebound_floor: 0.1}
    admm:      {rho: null, rho_growth: 1.2, max_iters: 200, primal_tol: 0.001, dual_tol: 0.001,
                time_limit_s: 60, direct_solve_cap: 3}
    solver:    {name: highs, time_limit_s: null, mip_gap: 1.0e-6, node_limit: null}  # node limit: extensive form only
    backtest:  {penalty_factor: 1.5, eval_start: null, eval_end: null, train_start: null,
                train_end: null, lookback_method: extensive, max_failed_days: 0}
    output:    {dir: out}
    seed: 0
"""

from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .admm import AdmmConfig
from .backtest import BacktestConfig
from .errors import ConfigError, TclFlexError
from .milp import MilpOptions
from .prices import FreezerSpec
from .thermal import ExogenousDay, ThermalParams

DEFAULTS: dict[str, Any] = {
    "data": {"prices": None},
    "thermal": {f.name: f.default for f in fields(ThermalParams)},
    "freezer": {
        "p_base": None,
        "p_min": 0.0,
        "p_nom": 1.2,
        "lambda_penalty": None,
        "defrost_hours": [7, 8],
        "t_indoor": 20.0,
        "opening_hours": [6, 22],
    },
    "scenario": {"n_scenarios": 50, "lookback_k": 5},
    "milp": {"alpha_max": 5.0, "beta_max": None, "big_m_temperature": None, "rebound_floor": 0.10},
    "admm": {
        "rho": None,
        "rho_growth": 1.2,
        "max_iters": 200,
        "primal_tol": 1e-3,
        "dual_tol": 1e-3,
        "time_limit_s": 60.0,
        "mip_gap": 1e-6,
        "direct_solve_cap": 3,
    },
    "solver": {"name": "highs", "time_limit_s": None, "mip_gap": 1e-6, "node_limit": None},
    "backtest": {
        "penalty_factor": 1.5,
        "eval_start": None,
        "eval_end": None,
        "train_start": None,
        "train_end": None,
        "lookback_method": "extensive",
        "max_failed_days": 0,
    },
    "output": {"dir": "out"},
    "seed": 0,
}


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{where}.{key}" if where else key
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be a mapping")
            out[key] = _merge(base[key], value, path)
        else:
            out[key] = value
    return out


def _date(value, key: str) -> dt.date | None:
    if value is None or isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"{key}: not an ISO date: {value!r}") from exc


@dataclass
class RunConfig:
    raw: dict[str, Any]
    source: Path | None = None

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def prices_path(self) -> Path | None:
        p = self.raw["data"]["prices"]
        if p is None:
            return None
        p = Path(p)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    def hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self) -> list[str]:
        """Metadata lines for output files; the only place with a timestamp."""
        stamp = dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat()
        return [f"config_hash: {self.hash()}", f"seed: {self.seed}", f"generated_at: {stamp}"]

    def thermal(self) -> ThermalParams:
        return ThermalParams(**self.raw["thermal"])

    def exogenous(self, params: ThermalParams | None = None) -> ExogenousDay:
        params = params or self.thermal()
        fz = self.raw["freezer"]
        return ExogenousDay.standard(
            params, defrost_hours=tuple(fz["defrost_hours"]), t_indoor=fz["t_indoor"],
            opening_hours=tuple(fz["opening_hours"]),
        )

    def freezer(self, params: ThermalParams | None = None) -> FreezerSpec:
        params = params or self.thermal()
        fz = self.raw["freezer"]
        if fz["p_base"] is not None:
            return FreezerSpec(fz["p_base"], fz["p_min"], fz["p_nom"], fz["lambda_penalty"], tuple(fz["defrost_hours"]))
        return FreezerSpec.standard(
            params, fz["t_indoor"], fz["p_min"], fz["p_nom"], fz["lambda_penalty"],
            fz["defrost_hours"], tuple(fz["opening_hours"]),
        )

    def milp(self) -> MilpOptions:
        return MilpOptions(**self.raw["milp"])

    def admm(self, jobs: int = 1) -> AdmmConfig:
        a = dict(self.raw["admm"])
        a["time_limit"] = a.pop("time_limit_s")
        return AdmmConfig(rng_seed=self.seed, jobs=jobs, **a)

    def backtest(self, jobs: int = 1) -> BacktestConfig:
        b, s = self.raw["backtest"], self.raw["solver"]
        return BacktestConfig(
            seed=self.seed,
            penalty_factor=b["penalty_factor"],
            lambda_penalty=self.raw["freezer"]["lambda_penalty"],
            eval_range=(_date(b["eval_start"], "eval_start"), _date(b["eval_end"], "eval_end")),
            train_range=(_date(b["train_start"], "train_start"), _date(b["train_end"], "train_end")),
            solver=s["name"],
            time_limit=s["time_limit_s"],
            mip_gap=s["mip_gap"],
            node_limit=s["node_limit"],
            lookback_method=b["lookback_method"],
            admm=self.admm(),
            milp=self.milp(),
            jobs=jobs,
        )

    def validate(self) -> "RunConfig":
        """Build every typed section once so errors surface before any work starts."""
        try:
            params = self.thermal()
            self.exogenous(params)
            self.freezer(params)
            self.backtest().backend()
        except ConfigError:
            raise
        except (TclFlexError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        sc = self.raw["scenario"]
        if int(sc["n_scenarios"]) < 1 or int(sc["lookback_k"]) < 1:
            raise ConfigError("scenario.n_scenarios and scenario.lookback_k must be >= 1")
        if int(self.raw["backtest"]["max_failed_days"]) < 0:
            raise ConfigError("backtest.max_failed_days must be >= 0")
        p = self.prices_path
        if p is not None and not p.is_file():
            raise ConfigError(f"price file not found: {p}")
        return self


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Defaults, then the YAML file, then ``overrides`` (same nesting)."""
    raw = copy.deepcopy(DEFAULTS)
    source = None
    if path is not None:
        source = Path(path)
        try:
            text = source.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{source}: top level must be a mapping")
        raw = _merge(raw, loaded)
    if overrides:
        raw = _merge(raw, overrides)
    return RunConfig(raw, source).validate()
