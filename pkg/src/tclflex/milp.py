"""Two-stage stochastic MILP for mFRR reserve bidding of a freezer.

First stage: hourly reserve capacity ``p_reserve`` and the affine bid policy
``(alpha, beta)``. The regulating-power bid in hour ``h`` of a scenario is::

    bid_h = alpha * (spot_{h+1} - spot_h) + spot_h + beta      (h < last)
    bid_last = spot_last + beta

Reserves are activated in hour ``h`` when ``p_reserve_h > 0``, the balancing
price exceeds spot, and ``bid_h <= balancing_h - spot_h``. The activation
condition is encoded with a binary ``g`` and a McCormick auxiliary ``phi``
equal to ``g * p_reserve``.

Second stage (per scenario): consumption, up-regulation, rebound, slack,
regulation state/start/stop binaries and the temperature trajectory. Power is
in kW, prices in currency/MWh; money terms carry a factor 1e-3 (kW over one
hour to MWh).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, SolverError
from .model import INF, LinearModel
from .prices import FreezerSpec, PriceDay
from .scenario import ScenarioSet
from .solvers import INFEASIBLE, OPTIMAL, UNBOUNDED, Solution, SolverBackend
from .thermal import ExogenousDay, TemperatureTrajectory, ThermalParams, baseline_trajectory, simulate_day, step_coefficients

logger = logging.getLogger(__name__)

ENERGY_SCALE = 1e-3
BINARY_NAMES = ("g", "u_up", "u_dn", "y_up", "y_dn", "z_up", "z_dn")


@dataclass(frozen=True)
class FirstStageDecision:
    p_reserve: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        p = np.asarray(self.p_reserve, dtype=float)
        if np.any(p < -1e-9) or self.alpha < -1e-9 or self.beta < -1e-9:
            raise InvalidInputError("reserve bids and policy coefficients must be >= 0")
        object.__setattr__(self, "p_reserve", np.clip(p, 0.0, None))
        object.__setattr__(self, "alpha", max(0.0, float(self.alpha)))
        object.__setattr__(self, "beta", max(0.0, float(self.beta)))

    def bids(self, lambda_s: np.ndarray) -> np.ndarray:
        return bid_prices(lambda_s, self.alpha, self.beta)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p_reserve, [self.alpha, self.beta]])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "FirstStageDecision":
        v = np.asarray(v, dtype=float)
        return cls(v[:-2], float(v[-2]), float(v[-1]))


def bid_slopes(lambda_s: np.ndarray) -> np.ndarray:
    """Coefficient of ``alpha`` in the bid: next-hour spot difference, 0 in the last hour."""
    lambda_s = np.asarray(lambda_s, dtype=float)
    d = np.zeros_like(lambda_s)
    d[..., :-1] = lambda_s[..., 1:] - lambda_s[..., :-1]
    return d


def bid_prices(lambda_s: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    lambda_s = np.asarray(lambda_s, dtype=float)
    return alpha * bid_slopes(lambda_s) + lambda_s + beta


def activation_condition(
    lambda_s: np.ndarray, lambda_b: np.ndarray, bid: np.ndarray, p_reserve: np.ndarray
) -> np.ndarray:
    """Raw activation rule: reservation held, up-regulation hour, bid in the money."""
    lambda_s, lambda_b = np.asarray(lambda_s), np.asarray(lambda_b)
    return (np.asarray(p_reserve) > 0) & (lambda_b > lambda_s) & (np.asarray(bid) <= lambda_b - lambda_s)


@dataclass(frozen=True)
class MilpOptions:
    """Modelling constants not fixed by the formulation itself."""

    alpha_max: float = 5.0
    beta_max: float | None = None
    big_m_temperature: float | None = None
    rebound_floor: float = 0.10
    init: tuple[float, float] | None = None


@dataclass
class SecondStageDispatch:
    p: np.ndarray
    p_up: np.ndarray
    p_dn: np.ndarray
    slack: np.ndarray
    lambda_bid: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    u_up: np.ndarray
    u_dn: np.ndarray
    y_up: np.ndarray
    y_dn: np.ndarray
    z_up: np.ndarray
    z_dn: np.ndarray
    t_air: np.ndarray
    t_food: np.ndarray
    t_air_base: np.ndarray
    t_food_base: np.ndarray


@dataclass
class ModelHandle:
    model: LinearModel
    kind: str
    spec: FreezerSpec
    params: ThermalParams
    exo: ExogenousDay
    baseline: TemperatureTrajectory
    scen: ScenarioSet | None
    scen_vars: list[dict[str, np.ndarray]]
    p_reserve: np.ndarray | None = None
    alpha: int | None = None
    beta: int | None = None
    big_m_price: float = 0.0
    big_m_power: np.ndarray | None = None
    big_m_temperature: np.ndarray | None = None
    options: MilpOptions = field(default_factory=MilpOptions)

    @property
    def first_stage_columns(self) -> np.ndarray:
        return np.concatenate([self.p_reserve, [self.alpha, self.beta]])


@dataclass
class MilpResult:
    first_stage: FirstStageDecision | None
    dispatch: list[SecondStageDispatch]
    objective: float
    bound: float
    status: str
    solution: Solution = field(repr=False)

    @property
    def gap(self) -> float:
        return self.solution.gap

    @property
    def timed_out(self) -> bool:
        return self.status != OPTIMAL


def _check_dims(spec: FreezerSpec, params: ThermalParams, exo: ExogenousDay, n_hours: int | None) -> None:
    spp = params.steps_per_hour
    if exo.J != params.J or spec.n_hours * spp != exo.J:
        raise InvalidInputError(
            f"dimension mismatch: {spec.n_hours} baseline hours, {exo.J} exogenous steps, "
            f"J={params.J}, {spp} steps per hour"
        )
    if n_hours is not None and n_hours != spec.n_hours:
        raise InvalidInputError(f"prices cover {n_hours} hours, freezer spec {spec.n_hours}")


def _temperature_m(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    base: TemperatureTrajectory,
    options: MilpOptions,
) -> np.ndarray:
    """Per-hour bound on the summed food-temperature deviation from baseline.

    The dynamics are monotone in power, so running at ``p_min`` (warmest) and
    ``p_nom`` (coldest) all day brackets every feasible trajectory.
    """
    if options.big_m_temperature is not None:
        if options.big_m_temperature <= 0:
            raise InvalidInputError("big_m_temperature must be > 0")
        return np.full(spec.n_hours, float(options.big_m_temperature))
    warm = simulate_day(params, exo, np.full(exo.J, spec.p_min), options.init)
    cold = simulate_day(params, exo, np.full(exo.J, spec.p_nom), options.init)
    dev = np.maximum(warm.t_food - base.t_food, base.t_food - cold.t_food)
    return dev.reshape(spec.n_hours, -1).sum(axis=1) + 1.0


def _add_dispatch_block(
    m: LinearModel,
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    base: TemperatureTrajectory,
    tag: str,
    options: MilpOptions,
    m_temp: np.ndarray,
) -> dict[str, np.ndarray]:
    """Consumption, regulation logic, rebound and thermal dynamics of one scenario."""
    H, J, spp = spec.n_hours, params.J, params.steps_per_hour
    pb = spec.p_base
    up_cap = pb - spec.p_min
    dn_cap = spec.p_nom - pb
    v = {
        "p": m.add_vars(f"p_{tag}", H, spec.p_min, spec.p_nom),
        "p_up": m.add_vars(f"p_up_{tag}", H, 0.0, INF),
        "p_dn": m.add_vars(f"p_dn_{tag}", H, 0.0, INF),
    }
    for name in BINARY_NAMES[1:]:
        v[name] = m.add_binaries(f"{name}_{tag}", H)
    init = options.init or (params.setpoint, params.setpoint)
    tf_lb = np.full(J, -INF)
    tf_ub = np.full(J, INF)
    tf_lb[0] = tf_ub[0] = init[0]
    tc_lb = np.full(J, -INF)
    tc_ub = np.full(J, INF)
    tc_lb[0] = tc_ub[0] = init[1]
    v["t_food"] = m.add_vars(f"t_food_{tag}", J, tf_lb, tf_ub)
    v["t_air"] = m.add_vars(f"t_air_{tag}", J, tc_lb, tc_ub)

    tf, tc = v["t_food"], v["t_air"]
    for t in range(J - 1):
        h = t // spp
        co = step_coefficients(params, exo.regime(t, params.dt), exo.od[t])
        m.add_eq(
            {tf[t + 1]: 1.0, tf[t]: -co.A[0, 0], tc[t]: -co.A[0, 1]},
            0.0,
            "thermal_food",
        )
        m.add_eq(
            {tc[t + 1]: 1.0, tf[t]: -co.A[1, 0], tc[t]: -co.A[1, 1], v["p"][h]: -co.b_power[1]},
            co.b_indoor[1] * exo.t_indoor[t] + params.eps * exo.defrost[t],
            "thermal_air",
        )

    u_up, u_dn = v["u_up"], v["u_dn"]
    y_up, y_dn, z_up, z_dn = v["y_up"], v["y_dn"], v["z_up"], v["z_dn"]
    for h in range(H):
        m.add_eq({v["p"][h]: 1.0, v["p_up"][h]: 1.0, v["p_dn"][h]: -1.0}, pb[h], "energy_balance")
        m.add_le({v["p_up"][h]: 1.0, u_up[h]: -up_cap[h]}, 0.0, "up_capacity")
        m.add_le({v["p_dn"][h]: 1.0, u_dn[h]: -dn_cap[h]}, 0.0, "down_capacity")
        m.add_ge({v["p_dn"][h]: 1.0, u_dn[h]: -options.rebound_floor * dn_cap[h]}, 0.0, "rebound_floor")
        # Regulation is off before the first hour.
        for u, y, z, fam in ((u_up, y_up, z_up, "transition_up"), (u_dn, y_dn, z_dn, "transition_down")):
            terms = {u[h]: -1.0, y[h]: 1.0, z[h]: -1.0}
            if h > 0:
                terms[u[h - 1]] = 1.0
            m.add_eq(terms, 0.0, fam)
            m.add_le({y[h]: 1.0, z[h]: 1.0}, 1.0, fam)
        m.add_le({u_up[h]: 1.0, u_dn[h]: 1.0}, 1.0, "exclusion")
        m.add_le({y_up[h]: 1.0, y_dn[h]: 1.0}, 1.0, "exclusion")
        m.add_le({z_up[h]: 1.0, z_dn[h]: 1.0}, 1.0, "exclusion")
        m.add_ge({y_dn[h]: 1.0, z_up[h]: -1.0}, 0.0, "rebound_start")
        terms = {y_dn[k]: 1.0 for k in range(h + 1)}
        for k in range(h + 1):
            terms[y_up[k]] = terms.get(y_up[k], 0.0) - 1.0
        m.add_le(terms, 0.0, "up_first")
        if h > 0:
            steps = range(h * spp, (h + 1) * spp)
            base_sum = float(sum(base.t_food[t] for t in steps))
            dev = {tf[t]: 1.0 for t in steps}
            m.add_ge({**dev, z_dn[h]: -m_temp[h]}, base_sum - m_temp[h], "rebound_stop")
            m.add_le({**dev, z_dn[h]: m_temp[h]}, base_sum + m_temp[h], "rebound_stop")
    m.add_le({tf[J - 1]: 1.0}, float(base.t_food[J - 1]), "terminal_temperature")
    return v


def _price_m(scen: ScenarioSet, alpha_max: float, beta_max: float) -> float:
    """One constant valid for every price row of every scenario."""
    ls, lb = scen.lambda_s, scen.lambda_b
    bid_max = alpha_max * np.abs(bid_slopes(ls)).max() + np.abs(ls).max() + beta_max
    return float(2.0 * (np.abs(lb).max() + np.abs(ls).max() + bid_max))


def _price_row_m(
    lambda_s: np.ndarray, lambda_b: np.ndarray, alpha_max: float, beta_max: float
) -> tuple[np.ndarray, np.ndarray]:
    """Smallest safe constants for the two sides of the bid/price rows, per hour.

    ``bid - M_lo (1-g) <= delta`` needs ``M_lo >= max bid - delta``;
    ``delta <= bid + M_hi g`` needs ``M_hi >= delta - min bid``.
    """
    d = bid_slopes(lambda_s)
    delta = lambda_b - lambda_s
    bid_max = lambda_s + beta_max + alpha_max * np.maximum(d, 0.0)
    bid_min = lambda_s + alpha_max * np.minimum(d, 0.0)
    return np.maximum(bid_max - delta, 0.0) + 1.0, np.maximum(delta - bid_min, 0.0) + 1.0


def _default_beta_max(scen: ScenarioSet, alpha_max: float = 0.0) -> float:
    # Large enough for a bid that is never in the money, even with alpha = 0.
    delta = scen.lambda_b - scen.lambda_s
    return float(max(1.0, (delta - scen.lambda_s).max() + 1.0))


def _add_activation_block(
    m: LinearModel,
    v: dict[str, np.ndarray],
    spec: FreezerSpec,
    p_r: np.ndarray,
    alpha: int,
    beta: int,
    lambda_s: np.ndarray,
    lambda_b: np.ndarray,
    m_lo: np.ndarray,
    m_hi: np.ndarray,
    m_power: np.ndarray,
) -> None:
    """McCormick encoding of the activation rule.

    In hours without up-regulation the rule cannot bind: delivery rows vanish
    and any (alpha, beta) admits a matching ``g``. Those hours get no ``g`` or
    ``phi``; their indicator is recovered from the raw rule after solving.
    """
    H = spec.n_hours
    tag = v["tag"]
    up = lambda_b > lambda_s
    active = np.flatnonzero(up)
    v["s"] = m.add_vars(f"s_{tag}", H, 0.0, spec.p_base)
    v["active"] = active
    v["g"] = m.add_binaries(f"g_{tag}", len(active))
    v["phi"] = m.add_vars(f"phi_{tag}", len(active), 0.0, INF)
    slopes = bid_slopes(lambda_s)
    delta = lambda_b - lambda_s
    for k, h in enumerate(active):
        g, phi, s, p_up = v["g"][k], v["phi"][k], v["s"][h], v["p_up"][h]
        bid = {alpha: slopes[h], beta: 1.0}
        # bid - M(1-g) <= delta <= bid + M g
        m.add_le({**bid, g: m_lo[h]}, delta[h] - lambda_s[h] + m_lo[h], "activation_price")
        m.add_ge({**bid, g: m_hi[h]}, delta[h] - lambda_s[h], "activation_price")
        m.add_le({p_up: 1.0, phi: -1.0}, 0.0, "activation_delivery")
        m.add_ge({p_up: 1.0, s: 1.0, phi: -1.0}, 0.0, "activation_delivery")
        m.add_le({phi: 1.0, g: -m_power[h]}, 0.0, "activation_link")
        m.add_le({phi: 1.0, p_r[h]: -1.0, g: m_power[h]}, m_power[h], "activation_link")
        m.add_le({p_r[h]: 1.0, phi: -1.0, g: m_power[h]}, m_power[h], "activation_link")
    for h in range(H):
        m.add_le({v["p_up"][h]: 1.0, p_r[h]: -float(up[h])}, 0.0, "up_reserve_limit")


def _reserve_bounds(spec: FreezerSpec, exo: ExogenousDay, params: ThermalParams) -> np.ndarray:
    defrost = spec.defrost_mask() | exo.defrost_hour_mask(params.steps_per_hour)
    return spec.p_base * (1.0 - defrost)


def build_stochastic_mfrr(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    scen: ScenarioSet,
    big_m: float | None = None,
    options: MilpOptions | None = None,
    fixed: FirstStageDecision | None = None,
    kind: str = "mfrr",
) -> ModelHandle:
    """Extensive form of the stochastic reserve-bidding problem.

    ``big_m`` is the constant of the price rows; ``None`` derives a safe value
    from the scenario prices and the policy bounds. ``fixed`` pins the first
    stage (out-of-sample evaluation).
    """
    options = options or MilpOptions()
    _check_dims(spec, params, exo, scen.n_hours)
    if spec.lambda_penalty is None:
        raise InvalidInputError("freezer spec has no penalty price")
    alpha_max = options.alpha_max
    beta_max = options.beta_max if options.beta_max is not None else _default_beta_max(scen, alpha_max)
    if fixed is not None:
        if len(fixed.p_reserve) != spec.n_hours:
            raise InvalidInputError("fixed first stage has the wrong number of hours")
        alpha_max = max(alpha_max, fixed.alpha)
        beta_max = max(beta_max, fixed.beta)
    if big_m is not None and not big_m > 0:
        raise InvalidInputError(f"big_m must be positive, got {big_m}")
    m_price = _price_m(scen, alpha_max, beta_max) if big_m is None else float(big_m)
    base = baseline_trajectory(params, exo, spec.p_base, options.init)
    m_temp = _temperature_m(spec, params, exo, base, options)

    m = LinearModel(f"{kind}_{scen.n_scenarios}s", "max")
    r_ub = _reserve_bounds(spec, exo, params)
    m_power = r_ub
    p_r = m.add_vars("p_reserve", spec.n_hours, 0.0, r_ub)
    alpha = m.add_var("alpha", 0.0, alpha_max)
    beta = m.add_var("beta", 0.0, beta_max)
    if fixed is not None:
        for h in range(spec.n_hours):
            m.fix(p_r[h], min(fixed.p_reserve[h], r_ub[h]))
        m.fix(alpha, fixed.alpha)
        m.fix(beta, fixed.beta)
    m.add_objective({p_r[h]: ENERGY_SCALE * scen.lambda_r[h] for h in range(spec.n_hours)})

    scen_vars = []
    for w in range(scen.n_scenarios):
        v = _add_dispatch_block(m, spec, params, exo, base, f"s{w}", options, m_temp)
        v["tag"] = f"s{w}"
        if big_m is None:
            m_lo, m_hi = _price_row_m(scen.lambda_s[w], scen.lambda_b[w], alpha_max, beta_max)
        else:
            m_lo = m_hi = np.full(spec.n_hours, m_price)
        _add_activation_block(
            m, v, spec, p_r, alpha, beta, scen.lambda_s[w], scen.lambda_b[w], m_lo, m_hi, m_power
        )
        pi, lb = scen.probabilities[w], scen.lambda_b[w]
        obj = {}
        for h in range(spec.n_hours):
            obj[v["p_up"][h]] = ENERGY_SCALE * pi * lb[h]
            obj[v["p_dn"][h]] = -ENERGY_SCALE * pi * lb[h]
            obj[v["s"][h]] = -ENERGY_SCALE * pi * spec.lambda_penalty
        m.add_objective(obj)
        scen_vars.append(v)

    return ModelHandle(
        m, kind, spec, params, exo, base, scen, scen_vars, p_r, alpha, beta,
        m_price, m_power, m_temp, options,
    )


def build_oracle(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    realized: PriceDay,
    big_m: float | None = None,
    options: MilpOptions | None = None,
    fixed: FirstStageDecision | None = None,
) -> ModelHandle:
    """Single-scenario model on realized prices (perfect information).

    With ``fixed`` it becomes the second-stage dispatch of a given policy.
    """
    return build_stochastic_mfrr(
        spec, params, exo, ScenarioSet.single(realized), big_m, options, fixed,
        kind="oracle" if fixed is None else "dispatch",
    )


def fix_first_stage(handle: ModelHandle, decision: FirstStageDecision) -> ModelHandle:
    """Copy of ``handle`` with the first-stage columns pinned to ``decision``.

    Raises if the decision exceeds the big-M range the handle was built for.
    """
    m = handle.model.copy()
    r_ub = np.array(m.col_ub)[handle.p_reserve]
    for h, j in enumerate(handle.p_reserve):
        m.fix(j, min(decision.p_reserve[h], r_ub[h]))
    for j, value in ((handle.alpha, decision.alpha), (handle.beta, decision.beta)):
        if value > handle.model.col_ub[j] + 1e-9:
            raise InvalidInputError(
                f"{handle.model.col_names[j]}={value} exceeds the modelled bound "
                f"{handle.model.col_ub[j]}; rebuild with fixed=decision"
            )
        m.fix(j, min(value, handle.model.col_ub[j]))
    return replace(handle, model=m)


def baseline_start(handle: ModelHandle, decision: FirstStageDecision | None = None) -> np.ndarray:
    """A feasible point: baseline consumption, undelivered reserve on slack.

    Without ``decision`` (and with free first stage) no reserve is offered and
    the bid is pushed out of the money.
    """
    m = handle.model
    x = np.array(m.col_lb, dtype=float)
    x[~np.isfinite(x)] = 0.0
    spec, H = handle.spec, handle.spec.n_hours
    if handle.p_reserve is not None:
        if decision is None:
            decision = FirstStageDecision(np.zeros(H), 0.0, m.col_ub[handle.beta])
        x[handle.p_reserve] = np.minimum(decision.p_reserve, np.array(m.col_ub)[handle.p_reserve])
        x[handle.alpha], x[handle.beta] = decision.alpha, decision.beta
    for w, v in enumerate(handle.scen_vars):
        x[v["p"]] = spec.p_base
        x[v["p_up"]] = x[v["p_dn"]] = 0.0
        for name in BINARY_NAMES[1:]:
            x[v[name]] = 0.0
        x[v["t_food"]] = handle.baseline.t_food
        x[v["t_air"]] = handle.baseline.t_air
        if "g" in v:
            ls, lb = handle.scen.lambda_s[w], handle.scen.lambda_b[w]
            bid = bid_prices(ls, x[handle.alpha], x[handle.beta])
            g = (lb - ls >= bid).astype(float)
            pr = x[handle.p_reserve]
            act = v["active"]
            x[v["g"]] = g[act]
            x[v["phi"]] = (g * pr)[act]
            x[v["s"]] = g * pr * (lb > ls)
    return x


def _dispatch_from_x(handle: ModelHandle, x: np.ndarray, w: int) -> SecondStageDispatch:
    v = handle.scen_vars[w]
    H = handle.spec.n_hours
    zeros = np.zeros(H)

    def cont(name):
        return np.clip(x[v[name]], 0.0, None) if name in v else zeros.copy()

    def binary(name):
        return np.round(x[v[name]]).astype(int) if name in v else np.zeros(H, dtype=int)

    g = np.zeros(H, dtype=int)
    phi = zeros.copy()
    if handle.scen is not None and handle.p_reserve is not None:
        ls, lb = handle.scen.lambda_s[w], handle.scen.lambda_b[w]
        bid = bid_prices(ls, x[handle.alpha], x[handle.beta])
        # Hours without up-regulation carry no indicator column: apply the rule directly.
        g = (lb - ls >= bid - 1e-9).astype(int)
        pr = np.clip(x[handle.p_reserve], 0.0, None)
        phi = g * pr
        act = v["active"]
        g[act] = np.round(x[v["g"]]).astype(int)
        phi[act] = np.clip(x[v["phi"]], 0.0, None)
    else:
        bid = np.full(H, np.nan)
    spec = handle.spec
    return SecondStageDispatch(
        p=np.clip(x[v["p"]], spec.p_min, spec.p_nom),
        p_up=cont("p_up"),
        p_dn=cont("p_dn"),
        slack=cont("s"),
        lambda_bid=bid,
        phi=phi,
        g=g,
        u_up=binary("u_up"),
        u_dn=binary("u_dn"),
        y_up=binary("y_up"),
        y_dn=binary("y_dn"),
        z_up=binary("z_up"),
        z_dn=binary("z_dn"),
        t_air=x[v["t_air"]].copy(),
        t_food=x[v["t_food"]].copy(),
        t_air_base=handle.baseline.t_air.copy(),
        t_food_base=handle.baseline.t_food.copy(),
    )


def diagnose_infeasibility(model: LinearModel, backend: SolverBackend) -> str | None:
    """Name the first constraint family whose removal restores feasibility."""
    for family in model.families():
        relaxed = model.without_families([family])
        if backend.solve(relaxed).status not in (INFEASIBLE,):
            return family
    return None


def solve(
    handle: ModelHandle,
    backend: SolverBackend,
    start: np.ndarray | None = None,
    diagnose: bool = True,
) -> MilpResult:
    """Solve ``handle`` and unpack first stage and per-scenario dispatch.

    A feasible incumbent after a time limit is returned with
    ``status == 'time_limit'``; no incumbent raises :class:`SolverError`.
    """
    if handle.model.is_quadratic and not backend.supports_miqp:
        raise SolverError(f"backend {backend.name} cannot solve quadratic mixed-integer models")
    sol = backend.solve(handle.model, start=start)
    if not sol.has_incumbent:
        hint = None
        if sol.status == INFEASIBLE and diagnose:
            hint = diagnose_infeasibility(handle.model, backend)
        if sol.status == UNBOUNDED:
            hint = "objective"
        raise SolverError(f"{handle.kind} model not solved: {sol.status}", sol.status, hint)
    x = sol.x
    first = None
    if handle.p_reserve is not None:
        first = FirstStageDecision(
            np.clip(x[handle.p_reserve], 0.0, None), float(x[handle.alpha]), float(x[handle.beta])
        )
    dispatch = [_dispatch_from_x(handle, x, w) for w in range(len(handle.scen_vars))]
    if sol.status != OPTIMAL:
        logger.warning("%s solve stopped early (%s), gap %.3g", handle.kind, sol.status, sol.gap)
    return MilpResult(first, dispatch, sol.objective, sol.bound, sol.status, sol)


def export_model(handle: ModelHandle | LinearModel, path, fmt: str | None = None):
    model = handle.model if isinstance(handle, ModelHandle) else handle
    return model.write(path, fmt)
