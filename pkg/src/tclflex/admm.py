"""Consensus ADMM over price scenarios for the reserve-bidding problem.

Each scenario gets its own copy of the first-stage variables ``(p_reserve,
alpha, beta)``. Subproblems maximise their scenario profit minus a quadratic
proximity term to the consensus ``z``, which makes them mixed-integer
quadratic programs. Because of the integer second stage the scheme is a
heuristic: the returned decision carries no optimality certificate.

Coordinates are normalised before penalising (reserve by ``p_nom``, ``beta``
by the mean absolute spot price, ``alpha`` as is) so a single ``rho`` weighs
them comparably.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, SolverError
from .milp import (
    FirstStageDecision,
    MilpOptions,
    ModelHandle,
    _default_beta_max,
    baseline_start,
    build_stochastic_mfrr,
    fix_first_stage,
    solve,
)
from .prices import FreezerSpec
from .scenario import ScenarioSet
from .solvers import HighsBackend, SolverBackend
from .thermal import ExogenousDay, ThermalParams

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ("iteration", "primal_residual", "dual_residual", "consensus_objective")


@dataclass(frozen=True)
class AdmmConfig:
    """ADMM settings. ``rho=None`` derives a value from the prices (see :func:`default_rho`)."""

    rho: float | None = None
    rho_growth: float = 1.2
    max_iters: int = 200
    primal_tol: float = 1e-3
    dual_tol: float = 1e-3
    rng_seed: int = 0
    time_limit: float | None = 60.0
    mip_gap: float = 1e-6
    jobs: int = 1
    evaluate_consensus: bool = True
    direct_solve_cap: int = 3

    def __post_init__(self) -> None:
        if self.rho is not None and not self.rho > 0:
            raise InvalidInputError(f"rho must be > 0, got {self.rho}")
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise InvalidInputError("tolerances must be > 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if self.rho_growth < 1.0:
            raise InvalidInputError("rho_growth must be >= 1")
        if self.jobs < 1:
            raise InvalidInputError("jobs must be >= 1")
        if self.direct_solve_cap < 0:
            raise InvalidInputError("direct_solve_cap must be >= 0")


@dataclass
class Subproblem:
    """Single-scenario model plus the data needed to penalise its first stage."""

    handle: ModelHandle
    probability: float
    scale: np.ndarray

    @property
    def columns(self) -> np.ndarray:
        return self.handle.first_stage_columns

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.handle.model.col_ub)[self.columns]


@dataclass
class ConsensusState:
    """Consensus point ``z``, scaled duals ``u`` (one row per scenario) and history.

    ``z`` and ``u`` live in normalised coordinates.
    """

    z: np.ndarray
    u: np.ndarray
    rho: float
    iteration: int = 0
    copies: np.ndarray | None = None
    solutions: list[np.ndarray] | None = None
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    best_z: np.ndarray | None = None
    best_objective: float = -math.inf

    def decision(self, scale: np.ndarray, z: np.ndarray | None = None) -> FirstStageDecision:
        z = self.z if z is None else z
        return FirstStageDecision.from_vector(z * scale)


@dataclass
class AdmmResult:
    decision: FirstStageDecision
    objective: float
    history: list[tuple[int, float, float, float]]
    converged: bool
    heuristic: bool
    iterations: int
    extensive_objective: float | None = None

    @property
    def gap(self) -> float | None:
        """Relative shortfall versus the directly solved extensive form, if it was solved."""
        if self.extensive_objective is None:
            return None
        return (self.extensive_objective - self.objective) / max(1e-12, abs(self.extensive_objective))

    def write_diagnostics(self, path: str | Path) -> Path:
        return write_diagnostics(self.history, path)


def coordinate_scale(spec: FreezerSpec, scen: ScenarioSet) -> np.ndarray:
    price = max(1.0, float(np.mean(np.abs(scen.lambda_s))))
    return np.concatenate([np.full(spec.n_hours, spec.p_nom), [1.0, price]])


def default_rho(spec: FreezerSpec, scen: ScenarioSet) -> float:
    """Money value of one normalised unit: mean reservation price on ``p_nom``."""
    return max(1e-6, 1e-3 * float(np.mean(scen.lambda_r)) * spec.p_nom)


def decompose(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    scen: ScenarioSet,
    big_m: float | None = None,
    options: MilpOptions | None = None,
) -> list[Subproblem]:
    """One single-scenario model per scenario, all sharing the same first-stage bounds."""
    options = options or MilpOptions()
    if options.beta_max is None:
        options = replace(options, beta_max=_default_beta_max(scen, options.alpha_max))
    scale = coordinate_scale(spec, scen)
    subs = []
    for w in range(scen.n_scenarios):
        single = ScenarioSet(
            scen.lambda_s[w : w + 1], scen.lambda_b[w : w + 1], [1.0], scen.lambda_r,
            scen.source_dates[w : w + 1],
        )
        handle = build_stochastic_mfrr(spec, params, exo, single, big_m, options, kind="admm")
        subs.append(Subproblem(handle, float(scen.probabilities[w]), scale))
    return subs


def _penalised(sub: Subproblem, target: np.ndarray, rho: float):
    """Model maximising f - rho/2 * ||x/scale - target||^2."""
    m = sub.handle.model.copy()
    for j, s, t in zip(sub.columns, sub.scale, target):
        w = 0.5 * rho / s**2
        m.add_quadratic(j, -w)
        m.add_objective({j: 2.0 * w * s * t}, -0.5 * rho * t * t)
    return m


def _solve_copy(args):
    sub, target, rho, backend, start = args
    model = _penalised(sub, target, rho)
    sol = backend.solve(model, start=start)
    if not sol.has_incumbent:
        raise SolverError(f"ADMM subproblem failed: {sol.status}", sol.status)
    return sol.x[sub.columns] / sub.scale, sol.x


def _evaluate(sub: Subproblem, decision: FirstStageDecision, backend: SolverBackend) -> float:
    fixed = fix_first_stage(sub.handle, decision)
    sol = backend.solve(fixed.model, start=baseline_start(fixed, decision))
    if not sol.has_incumbent:
        raise SolverError(f"consensus evaluation failed: {sol.status}", sol.status)
    return sol.objective


def consensus_objective(
    subproblems: Sequence[Subproblem], decision: FirstStageDecision, backend: SolverBackend | None = None
) -> float:
    """Expected profit of ``decision`` with every scenario's second stage re-optimised."""
    backend = backend or HighsBackend()
    return float(sum(sub.probability * _evaluate(sub, decision, backend) for sub in subproblems))


def initial_state(subproblems: Sequence[Subproblem], config: AdmmConfig) -> ConsensusState:
    if not subproblems:
        raise InvalidInputError("no subproblems")
    n = len(subproblems[0].columns)
    rho = config.rho if config.rho is not None else _rho_from(subproblems)
    return ConsensusState(np.zeros(n), np.zeros((len(subproblems), n)), rho)


def _rho_from(subproblems: Sequence[Subproblem]) -> float:
    h = subproblems[0].handle
    return default_rho(h.spec, h.scen)


def iterate(
    state: ConsensusState,
    subproblems: Sequence[Subproblem],
    config: AdmmConfig,
    backend: SolverBackend | None = None,
    pool: ProcessPoolExecutor | None = None,
) -> ConsensusState:
    """One round: subproblem solves, weighted z-update with projection, dual step.

    The first round has no consensus to stay close to yet, so each scenario is
    solved on its own (a plain MILP) and every scenario optimum is scored as a
    candidate decision alongside ``z``.
    """
    first = state.iteration == 0
    milp_backend = HighsBackend(time_limit=config.time_limit, mip_gap=config.mip_gap)
    if first:
        backend, rho = milp_backend, 0.0
    else:
        backend = backend or milp_backend
        rho = state.rho
    starts = state.solutions or [None] * len(subproblems)
    tasks = [(sub, state.z - state.u[w], rho, backend, starts[w]) for w, sub in enumerate(subproblems)]
    try:
        results = list(pool.map(_solve_copy, tasks)) if pool else [_solve_copy(t) for t in tasks]
    except SolverError as exc:
        raise SolverError(f"ADMM round {state.iteration + 1} aborted: {exc}", exc.status) from exc
    copies = np.array([r[0] for r in results])
    probs = np.array([sub.probability for sub in subproblems])
    scale = subproblems[0].scale
    upper = subproblems[0].upper / scale
    z_prev = state.z
    z = np.clip(probs @ (copies + state.u), 0.0, upper)
    u = state.u + copies - z
    primal = float(np.max(np.abs(copies - z)))
    dual = float(np.max(np.abs(z - z_prev)))
    rho = state.rho * config.rho_growth
    u = u * (state.rho / rho)
    new = ConsensusState(
        z, u, rho, state.iteration + 1, copies, [r[1] for r in results],
        list(state.history), state.best_z, state.best_objective,
    )
    objective = math.nan
    if config.evaluate_consensus:
        objective = consensus_objective(subproblems, new.decision(scale), milp_backend)
        candidates = [(objective, z)]
        if first:
            for c in copies:
                c = np.clip(c, 0.0, upper)
                candidates.append((consensus_objective(subproblems, new.decision(scale, c), milp_backend), c))
        for value, point in candidates:
            if value > new.best_objective + 1e-12:
                new.best_objective, new.best_z = value, point.copy()
    new.history.append((new.iteration, primal, dual, objective))
    return new


def run(
    subproblems: Sequence[Subproblem],
    config: AdmmConfig | None = None,
    backend: SolverBackend | None = None,
) -> AdmmResult:
    """Iterate until both residuals are below tolerance or ``max_iters``.

    Returns the best consensus point seen (by re-evaluated expected profit),
    which need not be the last one. With a single scenario the subproblem is
    solved directly and the result is exact.
    """
    config = config or AdmmConfig()
    if not subproblems:
        raise InvalidInputError("no subproblems")
    scale = subproblems[0].scale
    if len(subproblems) == 1:
        res = solve(subproblems[0].handle, backend or HighsBackend(mip_gap=config.mip_gap))
        return AdmmResult(res.first_stage, res.objective, [(1, 0.0, 0.0, res.objective)], True, False, 1)

    state = initial_state(subproblems, config)
    converged = False
    pool = ProcessPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        for _ in range(config.max_iters):
            state = iterate(state, subproblems, config, backend, pool)
            _, primal, dual, obj = state.history[-1]
            logger.debug("admm %d: primal %.3g dual %.3g objective %.6g", state.iteration, primal, dual, obj)
            if primal < config.primal_tol and dual < config.dual_tol:
                converged = True
                break
    finally:
        if pool:
            pool.shutdown()
    if not converged:
        logger.warning("ADMM stopped after %d iterations without consensus", state.iteration)
    z = state.best_z if state.best_z is not None else state.z
    objective = state.best_objective
    if not math.isfinite(objective):
        objective = consensus_objective(subproblems, state.decision(scale, z), HighsBackend(mip_gap=config.mip_gap))
    result = AdmmResult(state.decision(scale, z), objective, state.history, converged, True, state.iteration)
    if len(subproblems) <= config.direct_solve_cap:
        result.extensive_objective = _extensive_objective(subproblems, config)
        logger.info("ADMM gap versus extensive form: %.3g", result.gap)
    return result


def _extensive_objective(subproblems: Sequence[Subproblem], config: AdmmConfig) -> float:
    h = subproblems[0].handle
    scen = ScenarioSet(
        np.vstack([s.handle.scen.lambda_s for s in subproblems]),
        np.vstack([s.handle.scen.lambda_b for s in subproblems]),
        [s.probability for s in subproblems],
        h.scen.lambda_r,
    )
    full = build_stochastic_mfrr(h.spec, h.params, h.exo, scen, options=h.options)
    backend = HighsBackend(time_limit=config.time_limit, mip_gap=config.mip_gap)
    return solve(full, backend, start=baseline_start(full)).objective


def solve_admm(
    spec: FreezerSpec,
    params: ThermalParams,
    exo: ExogenousDay,
    scen: ScenarioSet,
    config: AdmmConfig | None = None,
    options: MilpOptions | None = None,
    backend: SolverBackend | None = None,
) -> AdmmResult:
    return run(decompose(spec, params, exo, scen, options=options), config, backend)


def write_diagnostics(history, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for it, primal, dual, obj in history:
            writer.writerow([it, repr(float(primal)), repr(float(dual)), repr(float(obj))])
    return path
