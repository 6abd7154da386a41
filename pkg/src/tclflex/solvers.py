"""Solver backends for :class:`~tclflex.model.LinearModel`.

HiGHS handles MILPs (and continuous QPs); SCIP additionally handles the
mixed-integer quadratic subproblems produced by scenario decomposition.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ConfigError
from .model import INF, LinearModel

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
TIME_LIMIT = "limit_reached"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    bound: float = math.nan
    x: np.ndarray | None = None
    runtime: float = 0.0

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    @property
    def gap(self) -> float:
        if not self.has_incumbent or not math.isfinite(self.bound):
            return math.inf
        return abs(self.bound - self.objective) / max(1e-10, abs(self.objective))


class SolverBackend(Protocol):
    name: str
    supports_milp: bool
    supports_miqp: bool
    time_limit: float | None
    mip_gap: float

    def solve(self, model: LinearModel, start: np.ndarray | None = None) -> Solution: ...


@dataclass
class HighsBackend:
    time_limit: float | None = None
    mip_gap: float = 1e-6
    feasibility_tol: float = 1e-9
    threads: int = 1
    node_limit: int | None = None
    name: str = field(default="highs", init=False)
    supports_milp: bool = field(default=True, init=False)
    supports_miqp: bool = field(default=True, init=False)
    max_cut_rounds: int = 200

    def solve(self, model: LinearModel, start: np.ndarray | None = None) -> Solution:
        if model.is_quadratic and model.is_mip:
            return self._solve_outer_approximation(model, start)
        return self._solve_direct(model, start)

    def _solve_outer_approximation(self, model: LinearModel, start: np.ndarray | None) -> Solution:
        """Separable convex MIQP via tangent cuts on per-column epigraphs.

        HiGHS has no mixed-integer QP; each quadratic term ``c x^2`` is replaced
        by an epigraph column ``t >= c x^2`` described by tangents, and cuts
        are added at the incumbent until the largest underestimate is within
        tolerance. The MILP bound stays a valid bound of the original problem.
        """
        sign = -1.0 if model.sense == "max" else 1.0
        quad = {j: w for j, w in model.quad.items() if w}
        if any(sign * w < 0 for w in quad.values()):
            raise ConfigError("quadratic objective is not convex in the optimisation sense")
        lin = model.copy()
        lin.quad.clear()
        epi = {}
        for j, w in quad.items():
            c = abs(w)
            lo, hi = model.col_lb[j], model.col_ub[j]
            lo = lo if math.isfinite(lo) else -1.0
            hi = hi if math.isfinite(hi) else 1.0
            t = lin.add_var(f"epi_{j}", -INF, INF)
            lin.add_objective({t: sign})
            epi[j] = (t, c)
            for a in np.linspace(lo, hi, 9):
                lin.add_ge({t: 1.0, j: -2.0 * c * a}, -c * a * a, "tangent")

        def lift(x):
            y = np.concatenate([x, np.zeros(len(epi))])
            for j, (t, c) in epi.items():
                y[t] = c * x[j] ** 2
            return y

        x0 = None if start is None else lift(np.asarray(start, dtype=float))
        runtime = 0.0
        sol = None
        for _ in range(self.max_cut_rounds):
            sol = self._solve_direct(lin, x0)
            runtime += sol.runtime
            if not sol.has_incumbent:
                return Solution(sol.status, runtime=runtime)
            x = sol.x[: model.n_cols]
            tol = max(1e-9, self.mip_gap * abs(sol.objective))
            worst = 0.0
            for j, (t, c) in epi.items():
                gap = c * x[j] ** 2 - sol.x[t]
                if gap > tol:
                    lin.add_ge({t: 1.0, j: -2.0 * c * x[j]}, -c * x[j] ** 2, "tangent")
                worst = max(worst, gap)
            x0 = lift(x)
            if worst <= tol:
                break
        else:
            logger.warning("outer approximation stopped after %d rounds", self.max_cut_rounds)
        x = sol.x[: model.n_cols]
        return Solution(sol.status, model.objective_value(x), sol.bound, x, runtime)

    def _solve_direct(self, model: LinearModel, start: np.ndarray | None = None) -> Solution:
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", self.threads)
        h.setOptionValue("mip_rel_gap", self.mip_gap)
        h.setOptionValue("mip_feasibility_tolerance", self.feasibility_tol)
        h.setOptionValue("random_seed", 0)
        if self.time_limit:
            h.setOptionValue("time_limit", float(self.time_limit))
        if self.node_limit:
            # Unlike a time limit, a node limit keeps results reproducible.
            h.setOptionValue("mip_max_nodes", int(self.node_limit))

        lp = highspy.HighsLp()
        n, m = model.n_cols, model.n_rows
        lp.num_col_, lp.num_row_ = n, m
        lp.col_cost_ = model.objective_vector()
        lp.col_lower_ = np.array(model.col_lb)
        lp.col_upper_ = np.array(model.col_ub)
        lo = np.array([b if s in "GE" else -INF for s, b in zip(model.row_sense, model.row_rhs)])
        hi = np.array([b if s in "LE" else INF for s, b in zip(model.row_sense, model.row_rhs)])
        lp.row_lower_, lp.row_upper_ = lo, hi
        starts, index, value = [0], [], []
        for terms in model.row_terms:
            for j, c in terms.items():
                index.append(j)
                value.append(c)
            starts.append(len(index))
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.num_col_, lp.a_matrix_.num_row_ = n, m
        lp.a_matrix_.start_ = np.array(starts, dtype=np.int32)
        lp.a_matrix_.index_ = np.array(index, dtype=np.int32)
        lp.a_matrix_.value_ = np.array(value, dtype=float)
        lp.offset_ = model.obj_constant
        lp.sense_ = highspy.ObjSense.kMaximize if model.sense == "max" else highspy.ObjSense.kMinimize
        if model.is_mip:
            lp.integrality_ = [
                highspy.HighsVarType.kInteger if f else highspy.HighsVarType.kContinuous
                for f in model.col_int
            ]
        h.passModel(lp)
        if model.is_quadratic:
            hess = highspy.HighsHessian()
            hess.dim_ = n
            hess.format_ = highspy.HessianFormat.kTriangular
            diag = np.zeros(n)
            for j, w in model.quad.items():
                diag[j] = 2.0 * w
            if model.sense == "max":
                # HiGHS applies the sense to the linear part only.
                diag = -diag
            hess.start_ = np.concatenate([[0], np.cumsum(diag != 0)]).astype(np.int32)
            hess.index_ = np.flatnonzero(diag).astype(np.int32)
            hess.value_ = diag[diag != 0]
            h.passHessian(hess)
        if start is not None and model.is_mip:
            sol = highspy.HighsSolution()
            sol.col_value = list(map(float, start))
            sol.value_valid = True
            h.setSolution(sol)

        t0 = time.perf_counter()
        h.run()
        runtime = time.perf_counter() - t0
        status = h.getModelStatus()
        ms = highspy.HighsModelStatus
        info = h.getInfo()
        has_sol = info.primal_solution_status == 2
        x = np.array(h.getSolution().col_value) if has_sol else None
        if status == ms.kOptimal:
            code = OPTIMAL
        elif status in (ms.kTimeLimit, ms.kIterationLimit, ms.kSolutionLimit, ms.kInterrupt):
            code = TIME_LIMIT
        elif status == ms.kInfeasible:
            code, x = INFEASIBLE, None
        elif status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            code, x = UNBOUNDED, None
        else:
            code = ERROR if x is None else TIME_LIMIT
        obj = model.objective_value(x) if x is not None else math.nan
        if model.is_mip:
            bound = info.mip_dual_bound
        else:
            bound = obj
        return Solution(code, obj, float(bound), x, runtime)


@dataclass
class ScipBackend:
    time_limit: float | None = None
    mip_gap: float = 1e-6
    feasibility_tol: float = 1e-9
    node_limit: int | None = None
    name: str = field(default="scip", init=False)
    supports_milp: bool = field(default=True, init=False)
    supports_miqp: bool = field(default=True, init=False)

    def solve(self, model: LinearModel, start: np.ndarray | None = None) -> Solution:
        from pyscipopt import Model, quicksum

        s = Model(model.name)
        s.hideOutput()
        s.setParam("limits/gap", self.mip_gap)
        s.setParam("numerics/feastol", max(self.feasibility_tol, 1e-7))
        s.setParam("randomization/randomseedshift", 0)
        s.setParam("parallel/maxnthreads", 1)
        if self.time_limit:
            s.setParam("limits/time", float(self.time_limit))
        if self.node_limit:
            s.setParam("limits/nodes", int(self.node_limit))
        xs = []
        for j in range(model.n_cols):
            lb = None if model.col_lb[j] == -INF else model.col_lb[j]
            ub = None if model.col_ub[j] == INF else model.col_ub[j]
            vtype = "I" if model.col_int[j] else "C"
            if vtype == "I" and lb == 0.0 and ub == 1.0:
                vtype = "B"
            xs.append(s.addVar(name=f"x{j}", vtype=vtype, lb=lb, ub=ub))
        for terms, sense, rhs in zip(model.row_terms, model.row_sense, model.row_rhs):
            expr = quicksum(c * xs[j] for j, c in terms.items())
            if sense == "L":
                s.addCons(expr <= rhs)
            elif sense == "G":
                s.addCons(expr >= rhs)
            else:
                s.addCons(expr == rhs)
        linear = quicksum(c * xs[j] for j, c in model.obj.items() if c)
        quad = {j: w for j, w in model.quad.items() if w}
        if quad:
            # SCIP objectives are linear: move the separable quadratic into an epigraph row.
            sign = -1.0 if model.sense == "max" else 1.0
            epi = s.addVar(name="quad_epigraph", lb=None, ub=None)
            s.addCons(quicksum(sign * w * xs[j] * xs[j] for j, w in quad.items()) <= epi)
            linear = linear + sign * epi
        s.setObjective(linear + model.obj_constant, "maximize" if model.sense == "max" else "minimize")
        if start is not None:
            sol = s.createSol()
            for j, v in enumerate(start):
                s.setSolVal(sol, xs[j], float(v))
            s.addSol(sol, free=True)

        t0 = time.perf_counter()
        s.optimize()
        runtime = time.perf_counter() - t0
        status = s.getStatus()
        x = None
        if s.getNSols() > 0:
            best = s.getBestSol()
            x = np.array([s.getSolVal(best, v) for v in xs])
        if status == "optimal":
            code = OPTIMAL
        elif status in ("timelimit", "gaplimit", "nodelimit", "userinterrupt"):
            code = OPTIMAL if status == "gaplimit" else TIME_LIMIT
        elif status == "infeasible":
            code, x = INFEASIBLE, None
        elif status in ("unbounded", "inforunbd"):
            code, x = UNBOUNDED, None
        else:
            code = ERROR if x is None else TIME_LIMIT
        obj = model.objective_value(x) if x is not None else math.nan
        bound = s.getDualbound() if x is not None else math.nan
        return Solution(code, obj, float(bound), x, runtime)


def make_backend(
    name: str = "highs",
    time_limit: float | None = None,
    mip_gap: float = 1e-6,
    node_limit: int | None = None,
) -> SolverBackend:
    name = name.lower()
    if name == "highs":
        return HighsBackend(time_limit=time_limit, mip_gap=mip_gap, node_limit=node_limit)
    if name == "scip":
        return ScipBackend(time_limit=time_limit, mip_gap=mip_gap, node_limit=node_limit)
    raise ConfigError(f"unknown solver {name!r} (available: highs, scip)")
