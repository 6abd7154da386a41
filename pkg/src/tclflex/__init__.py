"""Demand flexibility of a supermarket freezer.

Grey-box thermal model, day-ahead load shifting, and two-stage stochastic
bidding of mFRR up-regulation reserve with an affine bid policy, solved
directly or by consensus ADMM over price scenarios, plus a backtest engine.
"""

from .errors import ConfigError, InvalidInputError, ParseError, SchemaError, SolverError, TclFlexError
from .milp import FirstStageDecision, MilpOptions, build_oracle, build_stochastic_mfrr, solve
from .prices import FreezerSpec, PriceDay, load_price_csv
from .scenario import ScenarioSet, generate_historical, generate_lookback
from .thermal import ExogenousDay, TemperatureTrajectory, ThermalParams, simulate_day, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ExogenousDay", "FirstStageDecision", "FreezerSpec", "InvalidInputError",
    "MilpOptions", "ParseError", "PriceDay", "ScenarioSet", "SchemaError", "SolverError",
    "TclFlexError", "TemperatureTrajectory", "ThermalParams", "build_oracle",
    "build_stochastic_mfrr", "generate_historical", "generate_lookback", "load_price_csv",
    "simulate_day", "solve", "step",
]
