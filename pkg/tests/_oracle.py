"""Independent reference implementations used by the tests.

Nothing here imports the optimisation code of the package: the thermal step
is re-derived from the model equations, and the brute-force solver assembles
its own LPs for scipy's ``linprog``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

# Fitted freezer constants.
C_F, C_C, R_CF, R_CI_DAY, R_CI_NIGHT, ETA, EPS, DT = 6.552, 0.077, 5.010, 41.05, 61.25, 1.561, 3.372, 0.25


def ref_step(tf, tc, power, t_in=20.0, od=1.0, defrost=0.0, day=True):
    r_ci = R_CI_DAY if day else R_CI_NIGHT
    tf_next = tf + DT / C_F * (tc - tf) / R_CF
    tc_next = tc + DT / C_C * ((tf - tc) / R_CF + (t_in - tc) / r_ci - ETA * od * power) + EPS * defrost
    return tf_next, tc_next


def ref_simulate(power_steps, init=(-18.0, -18.0), t_in=20.0, od=None, defrost=None, day=None):
    """Entry 0 is the initial state; entry t+1 follows from entry t."""
    n = len(power_steps)
    od = np.ones(n) if od is None else od
    defrost = np.zeros(n) if defrost is None else defrost
    day = [False] * n if day is None else day
    tf, tc = np.empty(n), np.empty(n)
    tf[0], tc[0] = init
    for t in range(n - 1):
        tf[t + 1], tc[t + 1] = ref_step(tf[t], tc[t], power_steps[t], t_in, od[t], defrost[t], day[t])
    return tf, tc


def day_flags(n_steps, start_hour=0.0, opening=(6.0, 22.0)):
    return [opening[0] <= (start_hour + t * DT) % 24 < opening[1] for t in range(n_steps)]


@dataclass
class ToyInstance:
    """Small two-stage instance; hours run from midnight with no defrost."""

    p_base: np.ndarray
    p_min: float
    p_nom: float
    lambda_s: np.ndarray  # scenarios x hours
    lambda_b: np.ndarray
    lambda_r: np.ndarray
    prob: np.ndarray
    penalty: float
    alpha_max: float
    beta_max: float

    @property
    def n_hours(self):
        return len(self.p_base)

    @property
    def n_scen(self):
        return len(self.prob)


def _food_sensitivity(inst: ToyInstance):
    """Affine map hourly power -> food trajectory: tf = base + S @ (p - p_base)."""
    spp = int(round(1 / DT))
    n = inst.n_hours * spp
    flags = day_flags(n)
    base_tf, _ = ref_simulate(np.repeat(inst.p_base, spp), day=flags)
    S = np.zeros((n, inst.n_hours))
    for h in range(inst.n_hours):
        p = inst.p_base.copy()
        p[h] += 1.0
        tf, _ = ref_simulate(np.repeat(p, spp), day=flags)
        S[:, h] = tf - base_tf
    return base_tf, S


def _transitions(u):
    prev = np.concatenate([[0], u[:-1]])
    diff = u - prev
    return (diff > 0).astype(int), (diff < 0).astype(int)


def _binary_ok(u_up, u_dn):
    if np.any(u_up + u_dn > 1):
        return False
    y_up, z_up = _transitions(u_up)
    y_dn, z_dn = _transitions(u_dn)
    if np.any(y_up + y_dn > 1) or np.any(z_up + z_dn > 1):
        return False
    if np.any(y_dn < z_up):
        return False
    if np.any(np.cumsum(y_dn) > np.cumsum(y_up)):
        return False
    return True


def brute_force(inst: ToyInstance):
    """Enumerate (g, u_up, u_dn) for every scenario-hour; solve the remaining LPs.

    Returns (best objective, number of LPs solved).
    """
    H, W = inst.n_hours, inst.n_scen
    spp = int(round(1 / DT))
    base_tf, S = _food_sensitivity(inst)
    pb = inst.p_base
    # Variable layout: p_r[H], alpha, beta, then per scenario p, p_up, p_dn, s, phi (H each).
    n_first = H + 2
    per = 5 * H
    n = n_first + W * per

    def idx(w, k, h):
        return n_first + w * per + k * H + h

    P, PUP, PDN, S_, PHI = range(5)
    # Feasible binary patterns per scenario (regulation only).
    patterns = []
    for bits in itertools.product((0, 1), repeat=2 * H):
        u_up, u_dn = np.array(bits[:H]), np.array(bits[H:])
        if _binary_ok(u_up, u_dn):
            patterns.append((u_up, u_dn))
    best = -np.inf
    n_lp = 0
    for combo in itertools.product(
        itertools.product(patterns, itertools.product((0, 1), repeat=H)), repeat=W
    ):
        c = np.zeros(n)
        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        ub[:H] = pb
        ub[H], ub[H + 1] = inst.alpha_max, inst.beta_max
        c[:H] = -1e-3 * inst.lambda_r
        for w, ((u_up, u_dn), g) in enumerate(combo):
            ls, lb_ = inst.lambda_s[w], inst.lambda_b[w]
            slope = np.append(np.diff(ls), 0.0)
            delta = lb_ - ls
            a = (lb_ > ls).astype(float)
            y_up, z_up = _transitions(u_up)
            y_dn, z_dn = _transitions(u_dn)
            for h in range(H):
                lb[idx(w, P, h)], ub[idx(w, P, h)] = inst.p_min, inst.p_nom
                ub[idx(w, S_, h)] = pb[h]
                pi = inst.prob[w]
                c[idx(w, PUP, h)] = -1e-3 * pi * lb_[h]
                c[idx(w, PDN, h)] = 1e-3 * pi * lb_[h]
                c[idx(w, S_, h)] = 1e-3 * pi * inst.penalty

                row = np.zeros(n)
                row[[idx(w, P, h), idx(w, PUP, h)]] = 1.0
                row[idx(w, PDN, h)] = -1.0
                A_eq.append(row), b_eq.append(pb[h])
                if not u_up[h]:
                    ub[idx(w, PUP, h)] = 0.0
                else:
                    ub[idx(w, PUP, h)] = pb[h] - inst.p_min
                if not u_dn[h]:
                    ub[idx(w, PDN, h)] = 0.0
                else:
                    ub[idx(w, PDN, h)] = inst.p_nom - pb[h]
                    lb[idx(w, PDN, h)] = 0.1 * (inst.p_nom - pb[h])
                # bid = alpha*slope + ls + beta, compared with delta
                row = np.zeros(n)
                row[H], row[H + 1] = slope[h], 1.0
                if g[h]:
                    A_ub.append(row), b_ub.append(delta[h] - ls[h])
                else:
                    A_ub.append(-row), b_ub.append(-(delta[h] - ls[h]))
                # phi = g * p_r
                row = np.zeros(n)
                row[idx(w, PHI, h)] = 1.0
                if g[h]:
                    row[h] = -1.0
                A_eq.append(row), b_eq.append(0.0)
                # delivery: p_up <= a*phi, p_up + s >= a*phi, p_up <= a*p_r
                row = np.zeros(n)
                row[idx(w, PUP, h)], row[idx(w, PHI, h)] = 1.0, -a[h]
                A_ub.append(row), b_ub.append(0.0)
                row = np.zeros(n)
                row[idx(w, PUP, h)], row[idx(w, S_, h)], row[idx(w, PHI, h)] = -1.0, -1.0, a[h]
                A_ub.append(row), b_ub.append(0.0)
                row = np.zeros(n)
                row[idx(w, PUP, h)], row[h] = 1.0, -a[h]
                A_ub.append(row), b_ub.append(0.0)
                # rebound stop: food back on its baseline over the hour
                if h > 0 and z_dn[h]:
                    steps = slice(h * spp, (h + 1) * spp)
                    row = np.zeros(n)
                    row[[idx(w, P, k) for k in range(H)]] = S[steps].sum(axis=0)
                    A_eq.append(row), b_eq.append(float(S[steps].sum(axis=0) @ pb))
            # terminal food temperature at or below baseline
            row = np.zeros(n)
            row[[idx(w, P, k) for k in range(H)]] = S[-1]
            A_ub.append(row), b_ub.append(float(S[-1] @ pb))
        res = linprog(
            c,
            A_ub=np.array(A_ub) if A_ub else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(A_eq),
            b_eq=np.array(b_eq),
            bounds=list(zip(lb, ub)),
            method="highs",
        )
        n_lp += 1
        if res.status == 0:
            best = max(best, -res.fun)
    return best, n_lp


def check_structure(dispatch, p_base, p_min, p_nom, p_reserve, defrost_mask, rebound_floor=0.1, tol=1e-6):
    """Violations of the structural dispatch invariants, as a list of messages."""
    d = dispatch
    out = []
    pb = np.asarray(p_base)

    def bad(name, mask):
        if np.any(mask):
            out.append(f"{name}: hours {np.flatnonzero(mask).tolist()}")

    bad("energy balance", np.abs(d.p - (pb - d.p_up + d.p_dn)) > tol)
    bad("power bounds", (d.p < p_min - tol) | (d.p > p_nom + tol))
    bad("slack bounds", (d.slack < -tol) | (d.slack > pb + tol))
    bad("rebound floor", d.p_dn < rebound_floor * d.u_dn * (p_nom - pb) - tol)
    bad("down capacity", d.p_dn > d.u_dn * (p_nom - pb) + tol)
    bad("up capacity", d.p_up > d.u_up * (pb - p_min) + tol)
    bad("defrost reserve", np.asarray(defrost_mask) & (np.asarray(p_reserve) > tol))
    if d.t_food[-1] > d.t_food_base[-1] + tol:
        out.append("terminal food temperature above baseline")
    bad("exclusion u", d.u_up + d.u_dn > 1)
    bad("exclusion y", d.y_up + d.y_dn > 1)
    bad("exclusion z", d.z_up + d.z_dn > 1)
    for u, y, z, name in ((d.u_up, d.y_up, d.z_up, "up"), (d.u_dn, d.y_dn, d.z_dn, "down")):
        prev = np.concatenate([[0], u[:-1]])
        bad(f"transition {name}", prev - u + y - z != 0)
        bad(f"start/stop {name}", y + z > 1)
    bad("rebound follows up-regulation", d.y_dn < d.z_up)
    bad("up-regulation first", np.cumsum(d.y_dn) > np.cumsum(d.y_up))
    return out
