"""Second-order grey-box freezer model.

States are the food temperature (slow, latent) and the air temperature
(fast, measured). One step of length ``dt`` hours is a forward-Euler update::

    T_f' = T_f + dt/C_f * (T_c - T_f)/R_cf
    T_c' = T_c + dt/C_c * ((T_f - T_c)/R_cf + (T_i - T_c)/R_ci - eta*OD*P) + eps*df

with ``R_ci`` switching between opening hours (day) and closing hours (night).

Trajectory convention: a day trajectory holds ``J`` states. Entry 0 is the
initial state; entry ``t + 1`` is obtained by applying step ``t``. The input
of the final step therefore only affects the next day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import InvalidInputError

Regime = Literal["day", "night"]


@dataclass(frozen=True)
class ThermalParams:
    """Fitted constants of the freezer model (capacitances in kWh/degC,
    resistances in degC/kW, ``eps`` in degC per defrost step)."""

    C_f: float = 6.552
    C_c: float = 0.077
    R_cf: float = 5.010
    R_ci_day: float = 41.05
    R_ci_night: float = 61.25
    eta: float = 1.561
    eps: float = 3.372
    dt: float = 0.25
    J: int = 96
    setpoint: float = -18.0

    def __post_init__(self) -> None:
        for name in ("C_f", "C_c", "R_cf", "R_ci_day", "R_ci_night", "eta", "dt"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidInputError(f"{name} must be finite and > 0, got {value}")
        if not math.isfinite(self.eps) or not math.isfinite(self.setpoint):
            raise InvalidInputError("eps and setpoint must be finite")
        if self.J < 1:
            raise InvalidInputError(f"J must be >= 1, got {self.J}")
        spp = 1.0 / self.dt
        if abs(spp - round(spp)) > 1e-9:
            raise InvalidInputError(f"1/dt must be an integer, got dt={self.dt}")
        if self.J % self.steps_per_hour:
            raise InvalidInputError("J*dt must be a whole number of hours")

    @property
    def steps_per_hour(self) -> int:
        return int(round(1.0 / self.dt))

    @property
    def n_hours(self) -> int:
        return self.J // self.steps_per_hour

    def with_horizon(self, n_hours: int) -> "ThermalParams":
        """Same physics over a shorter (or longer) horizon; used for toy instances."""
        from dataclasses import replace

        return replace(self, J=n_hours * self.steps_per_hour)

    def r_ci(self, regime: Regime) -> float:
        if regime == "day":
            return self.R_ci_day
        if regime == "night":
            return self.R_ci_night
        raise InvalidInputError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class ExogenousDay:
    """Per-step exogenous inputs of one day."""

    od: np.ndarray
    t_indoor: np.ndarray
    defrost: np.ndarray
    opening_hours: tuple[float, float] = (6.0, 22.0)
    start_hour: float = 0.0

    def __post_init__(self) -> None:
        od = np.asarray(self.od, dtype=float)
        t_in = np.asarray(self.t_indoor, dtype=float)
        df = np.asarray(self.defrost, dtype=float)
        if not (od.ndim == t_in.ndim == df.ndim == 1) or not (len(od) == len(t_in) == len(df)):
            raise InvalidInputError("od, t_indoor and defrost must be 1-d series of equal length")
        if not (np.all(np.isfinite(od)) and np.all(np.isfinite(t_in))):
            raise InvalidInputError("exogenous series must be finite")
        if np.any(od < 0) or np.any(od > 1):
            raise InvalidInputError("opening degree must lie in [0, 1]")
        if not np.all((df == 0) | (df == 1)):
            raise InvalidInputError("defrost indicator must be 0/1")
        object.__setattr__(self, "od", od)
        object.__setattr__(self, "t_indoor", t_in)
        object.__setattr__(self, "defrost", df)

    @property
    def J(self) -> int:
        return len(self.od)

    @classmethod
    def standard(
        cls,
        params: ThermalParams,
        defrost_hours: Sequence[int] = (7, 8),
        t_indoor: float = 20.0,
        od: float = 1.0,
        od_defrost: float = 0.0,
        opening_hours: tuple[float, float] = (6.0, 22.0),
    ) -> "ExogenousDay":
        """Constant indoor temperature and valve opening, with the valve closed
        (``od_defrost``) and the defrost indicator on during ``defrost_hours``
        (clock hours, 0-based, hour h covering [h:00, h+1:00))."""
        spp = params.steps_per_hour
        df = np.zeros(params.J)
        for h in defrost_hours:
            if 0 <= h < params.n_hours:
                df[h * spp : (h + 1) * spp] = 1.0
        ods = np.where(df > 0, od_defrost, od)
        return cls(od=ods, t_indoor=np.full(params.J, float(t_indoor)), defrost=df, opening_hours=tuple(opening_hours))

    def regime(self, t: int, dt: float) -> Regime:
        clock = (self.start_hour + t * dt) % 24.0
        lo, hi = self.opening_hours
        return "day" if lo <= clock < hi else "night"

    def regimes(self, dt: float) -> list[Regime]:
        return [self.regime(t, dt) for t in range(self.J)]

    def defrost_hour_mask(self, steps_per_hour: int) -> np.ndarray:
        """True for every hour containing at least one defrost step."""
        return self.defrost.reshape(-1, steps_per_hour).max(axis=1) > 0


@dataclass(frozen=True)
class TemperatureTrajectory:
    t_food: np.ndarray
    t_air: np.ndarray

    def __post_init__(self) -> None:
        if len(self.t_food) != len(self.t_air):
            raise InvalidInputError("food and air series differ in length")

    def __len__(self) -> int:
        return len(self.t_food)


@dataclass(frozen=True)
class StepCoefficients:
    """Affine one-step map ``x' = A x + b_p * P + b_i * T_i + eps * df``."""

    A: np.ndarray = field(repr=False)
    b_power: np.ndarray = field(repr=False)
    b_indoor: np.ndarray = field(repr=False)


def step_coefficients(params: ThermalParams, regime: Regime, od: float) -> StepCoefficients:
    a_f = params.dt / (params.C_f * params.R_cf)
    k = params.dt / params.C_c
    r_ci = params.r_ci(regime)
    A = np.array(
        [
            [1.0 - a_f, a_f],
            [k / params.R_cf, 1.0 - k / params.R_cf - k / r_ci],
        ]
    )
    return StepCoefficients(
        A=A,
        b_power=np.array([0.0, -k * params.eta * od]),
        b_indoor=np.array([0.0, k / r_ci]),
    )


def step(
    params: ThermalParams,
    state: tuple[float, float],
    inputs: tuple[float, float, float, float],
    regime: Regime,
) -> tuple[float, float]:
    """Advance ``(t_food, t_air)`` by one step.

    ``inputs`` is ``(od, t_indoor, defrost, power_kW)``.
    """
    t_food, t_air = state
    od, t_indoor, defrost, power = inputs
    values = (t_food, t_air, od, t_indoor, defrost, power)
    if not all(math.isfinite(v) for v in values):
        raise InvalidInputError(f"non-finite thermal input: {values}")
    if power < 0:
        raise InvalidInputError(f"power must be >= 0, got {power}")
    r_ci = params.r_ci(regime)
    food_next = t_food + params.dt / params.C_f * ((t_air - t_food) / params.R_cf)
    air_next = (
        t_air
        + params.dt
        / params.C_c
        * ((t_food - t_air) / params.R_cf + (t_indoor - t_air) / r_ci - params.eta * od * power)
        + params.eps * defrost
    )
    return food_next, air_next


def simulate_day(
    params: ThermalParams,
    exo: ExogenousDay,
    power_profile: Sequence[float] | np.ndarray,
    init: tuple[float, float] | None = None,
) -> TemperatureTrajectory:
    power = np.asarray(power_profile, dtype=float)
    if power.ndim != 1 or len(power) != exo.J:
        raise InvalidInputError(
            f"power profile has {power.size} entries, expected {exo.J} (one per step)"
        )
    if init is None:
        init = (params.setpoint, params.setpoint)
    food = np.empty(exo.J)
    air = np.empty(exo.J)
    state = (float(init[0]), float(init[1]))
    for t in range(exo.J):
        food[t], air[t] = state
        if t + 1 < exo.J:
            state = step(
                params,
                state,
                (exo.od[t], exo.t_indoor[t], exo.defrost[t], power[t]),
                exo.regime(t, params.dt),
            )
    return TemperatureTrajectory(t_food=food, t_air=air)


def hourly_to_steps(values: Sequence[float] | np.ndarray, steps_per_hour: int) -> np.ndarray:
    """Hour h owns steps ``steps_per_hour*h .. steps_per_hour*(h+1)-1``."""
    return np.repeat(np.asarray(values, dtype=float), steps_per_hour)


def baseline_trajectory(
    params: ThermalParams,
    exo: ExogenousDay,
    p_base: Sequence[float] | np.ndarray,
    init: tuple[float, float] | None = None,
) -> TemperatureTrajectory:
    p_base = np.asarray(p_base, dtype=float)
    if len(p_base) * params.steps_per_hour != exo.J:
        raise InvalidInputError(
            f"baseline has {len(p_base)} hours, exogenous day has {exo.J} steps"
        )
    return simulate_day(params, exo, hourly_to_steps(p_base, params.steps_per_hour), init)


def equilibrium_power(params: ThermalParams, regime: Regime, t_indoor: float, od: float = 1.0) -> float:
    """Compressor power that holds both temperatures at the setpoint."""
    return (t_indoor - params.setpoint) / (params.r_ci(regime) * params.eta * od)
