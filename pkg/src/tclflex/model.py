"""Solver-independent mixed-integer model container and LP/MPS writers.

Rows are single-sided (``<=``, ``>=`` or ``=``) so that exported files have
exactly one row per in-memory constraint.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidInputError

INF = math.inf

Terms = Mapping[int, float] | Iterable[tuple[int, float]]


def _merge(terms: Terms) -> dict[int, float]:
    items = terms.items() if isinstance(terms, Mapping) else terms
    merged: dict[int, float] = defaultdict(float)
    for j, c in items:
        merged[int(j)] += float(c)
    return {j: c for j, c in merged.items() if c != 0.0}


@dataclass
class LinearModel:
    """Columns with bounds/integrality, single-sided rows, linear objective and
    an optional separable quadratic term ``sum_j quad[j] * x_j**2``."""

    name: str = "model"
    sense: str = "max"
    col_lb: list[float] = field(default_factory=list)
    col_ub: list[float] = field(default_factory=list)
    col_int: list[bool] = field(default_factory=list)
    col_names: list[str] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    obj_constant: float = 0.0
    quad: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    row_terms: list[dict[int, float]] = field(default_factory=list)
    row_sense: list[str] = field(default_factory=list)
    row_rhs: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    row_family: list[str] = field(default_factory=list)

    @property
    def n_cols(self) -> int:
        return len(self.col_lb)

    @property
    def n_rows(self) -> int:
        return len(self.row_rhs)

    @property
    def is_mip(self) -> bool:
        return any(self.col_int)

    @property
    def is_quadratic(self) -> bool:
        return any(v != 0.0 for v in self.quad.values())

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, integer: bool = False) -> int:
        if lb > ub:
            raise InvalidInputError(f"variable {name}: lb {lb} > ub {ub}")
        self.col_lb.append(float(lb))
        self.col_ub.append(float(ub))
        self.col_int.append(bool(integer))
        self.col_names.append(name)
        return self.n_cols - 1

    def add_vars(self, name: str, n: int, lb=0.0, ub=INF, integer: bool = False) -> np.ndarray:
        lbs = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ubs = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        return np.array(
            [self.add_var(f"{name}_{i}", lbs[i], ubs[i], integer) for i in range(n)], dtype=int
        )

    def add_binaries(self, name: str, n: int) -> np.ndarray:
        return self.add_vars(name, n, 0.0, 1.0, integer=True)

    def _add_row(self, terms: Terms, sense: str, rhs: float, family: str, name: str | None) -> int:
        if not math.isfinite(rhs):
            raise InvalidInputError(f"row {name or family}: non-finite rhs {rhs}")
        self.row_terms.append(_merge(terms))
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs))
        self.row_family.append(family)
        self.row_names.append(name or f"{family}_{self.n_rows - 1}")
        return self.n_rows - 1

    def add_le(self, terms: Terms, rhs: float, family: str, name: str | None = None) -> int:
        return self._add_row(terms, "L", rhs, family, name)

    def add_ge(self, terms: Terms, rhs: float, family: str, name: str | None = None) -> int:
        return self._add_row(terms, "G", rhs, family, name)

    def add_eq(self, terms: Terms, rhs: float, family: str, name: str | None = None) -> int:
        return self._add_row(terms, "E", rhs, family, name)

    def add_objective(self, terms: Terms, constant: float = 0.0) -> None:
        for j, c in _merge(terms).items():
            self.obj[j] += c
        self.obj_constant += constant

    def add_quadratic(self, j: int, weight: float) -> None:
        self.quad[int(j)] += float(weight)

    def fix(self, j: int, value: float) -> None:
        self.col_lb[j] = self.col_ub[j] = float(value)

    def copy(self) -> "LinearModel":
        other = LinearModel(self.name, self.sense)
        other.col_lb = list(self.col_lb)
        other.col_ub = list(self.col_ub)
        other.col_int = list(self.col_int)
        other.col_names = list(self.col_names)
        other.obj = defaultdict(float, self.obj)
        other.obj_constant = self.obj_constant
        other.quad = defaultdict(float, self.quad)
        other.row_terms = [dict(r) for r in self.row_terms]
        other.row_sense = list(self.row_sense)
        other.row_rhs = list(self.row_rhs)
        other.row_names = list(self.row_names)
        other.row_family = list(self.row_family)
        return other

    def without_families(self, families: Iterable[str]) -> "LinearModel":
        drop = set(families)
        other = self.copy()
        keep = [i for i, f in enumerate(self.row_family) if f not in drop]
        for attr in ("row_terms", "row_sense", "row_rhs", "row_names", "row_family"):
            values = getattr(other, attr)
            setattr(other, attr, [values[i] for i in keep])
        return other

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_cols)
        for j, v in self.obj.items():
            c[j] = v
        return c

    def objective_value(self, x: np.ndarray) -> float:
        value = self.obj_constant + float(self.objective_vector() @ x)
        for j, w in self.quad.items():
            value += w * x[j] ** 2
        return value

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return np.array([sum(c * x[j] for j, c in terms.items()) for terms in self.row_terms])

    def max_violation(self, x: np.ndarray) -> tuple[float, str | None]:
        """Largest bound or row violation of ``x`` and the family it occurs in."""
        worst, where = 0.0, None
        lb, ub = np.array(self.col_lb), np.array(self.col_ub)
        bound_viol = np.maximum(lb - x, x - ub)
        if bound_viol.size and bound_viol.max() > worst:
            worst, where = float(bound_viol.max()), "bounds"
        act = self.row_activity(x)
        for i, (a, s, b) in enumerate(zip(act, self.row_sense, self.row_rhs)):
            v = a - b if s == "L" else b - a if s == "G" else abs(a - b)
            if v > worst:
                worst, where = float(v), self.row_family[i]
        return worst, where

    def families(self) -> list[str]:
        return list(dict.fromkeys(self.row_family))

    def write(self, path: str | Path, fmt: str | None = None) -> Path:
        """Write the model as free-format LP or fixed-format MPS."""
        path = Path(path)
        fmt = (fmt or path.suffix.lstrip(".")).lower()
        if self.n_cols == 0:
            raise InvalidInputError("refusing to export an empty model")
        if fmt == "lp":
            text = _to_lp(self)
        elif fmt == "mps":
            text = _to_fixed_mps(self)
        else:
            raise InvalidInputError(f"unknown export format {fmt!r} (use 'lp' or 'mps')")
        path.write_text(text, encoding="ascii")
        return path


_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def _lp_names(names: list[str], prefix: str) -> list[str]:
    out, seen = [], set()
    for i, n in enumerate(names):
        clean = _NAME_RE.sub("_", n) or f"{prefix}{i}"
        if clean[0].isdigit() or clean[0] in ".eE":
            clean = f"{prefix}{clean}"
        if clean in seen:
            clean = f"{clean}_{i}"
        seen.add(clean)
        out.append(clean)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def _lp_terms(terms: Mapping[int, float], names: list[str]) -> str:
    parts = []
    for j, c in sorted(terms.items()):
        parts.append(f"{'-' if c < 0 else '+'} {_num(abs(c))} {names[j]}")
    text = " ".join(parts) or "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def _to_lp(m: LinearModel) -> str:
    cols = _lp_names(m.col_names, "x")
    rows = _lp_names(m.row_names, "r")
    lines = [f"\\ {m.name}", "Maximize" if m.sense == "max" else "Minimize"]
    obj = _lp_terms({j: c for j, c in m.obj.items() if c}, cols)
    quad = {j: w for j, w in m.quad.items() if w}
    if quad:
        q = " + ".join(f"{_num(2 * w)} {cols[j]} ^ 2" for j, w in sorted(quad.items()))
        obj = f"{obj} + [ {q} ] / 2".replace("+ -", "- ")
    if m.obj_constant:
        obj = f"{obj} {'-' if m.obj_constant < 0 else '+'} {_num(abs(m.obj_constant))}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    op = {"L": "<=", "G": ">=", "E": "="}
    for name, terms, s, b in zip(rows, m.row_terms, m.row_sense, m.row_rhs):
        lines.append(f" {name}: {_lp_terms(terms, cols)} {op[s]} {_num(b)}")
    lines.append("Bounds")
    for name, lb, ub in zip(cols, m.col_lb, m.col_ub):
        if lb == -INF and ub == INF:
            lines.append(f" {name} free")
        elif lb == ub:
            lines.append(f" {name} = {_num(lb)}")
        else:
            lo = "-inf" if lb == -INF else _num(lb)
            hi = "+inf" if ub == INF else _num(ub)
            lines.append(f" {lo} <= {name} <= {hi}")
    ints = [cols[j] for j, flag in enumerate(m.col_int) if flag]
    if ints:
        lines.append("General")
        lines.extend(f" {n}" for n in ints)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _fixed_num(v: float) -> str:
    """Most precise representation of ``v`` fitting a 12-character MPS field."""
    text = repr(float(v))
    if len(text) <= 12:
        return text
    for digits in range(12, 0, -1):
        text = f"{v:.{digits}g}"
        if len(text) <= 12:
            return text
    raise InvalidInputError(f"cannot fit {v} into a fixed MPS field")


def _mps_line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    # Fixed MPS columns: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def _to_fixed_mps(m: LinearModel) -> str:
    cols = [f"C{j:07d}" for j in range(m.n_cols)]
    rows = [f"R{i:07d}" for i in range(m.n_rows)]
    by_col: dict[int, list[tuple[str, float]]] = defaultdict(list)
    for j, c in sorted(m.obj.items()):
        if c:
            by_col[j].append(("OBJ", c))
    for i, terms in enumerate(m.row_terms):
        for j, c in terms.items():
            by_col[j].append((rows[i], c))
    lines = [f"NAME          {m.name[:8].upper()}"]
    lines += ["OBJSENSE", "    MAX" if m.sense == "max" else "    MIN"]
    lines += ["ROWS", " N  OBJ"]
    lines += [f" {s}  {r}" for s, r in zip(m.row_sense, rows)]
    lines.append("COLUMNS")
    in_int = False
    for j in range(m.n_cols):
        if m.col_int[j] and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not m.col_int[j] and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = by_col.get(j) or [("OBJ", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            args = [cols[j], pair[0][0], _fixed_num(pair[0][1])]
            if len(pair) == 2:
                args += [pair[1][0], _fixed_num(pair[1][1])]
            lines.append(_mps_line("", *args))
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    if m.obj_constant:
        lines.append(_mps_line("", "RHS", "OBJ", _fixed_num(-m.obj_constant)))
    for r, b in zip(rows, m.row_rhs):
        if b:
            lines.append(_mps_line("", "RHS", r, _fixed_num(b)))
    lines.append("BOUNDS")
    for j, (lb, ub) in enumerate(zip(m.col_lb, m.col_ub)):
        c = cols[j]
        if m.col_int[j] and lb == 0.0 and ub == 1.0:
            lines.append(_mps_line("BV", "BND", c))
            continue
        if lb == ub:
            lines.append(_mps_line("FX", "BND", c, _fixed_num(lb)))
            continue
        if lb == -INF and ub == INF:
            lines.append(_mps_line("FR", "BND", c))
            continue
        if lb == -INF:
            lines.append(_mps_line("MI", "BND", c))
        elif lb != 0.0 or m.col_int[j]:
            lines.append(_mps_line("LO", "BND", c, _fixed_num(lb)))
        if ub != INF:
            lines.append(_mps_line("UP", "BND", c, _fixed_num(ub)))
        elif m.col_int[j]:
            lines.append(_mps_line("PL", "BND", c))
    quad = {j: w for j, w in m.quad.items() if w}
    if quad:
        lines.append("QUADOBJ")
        for j, w in sorted(quad.items()):
            lines.append(_mps_line("", cols[j], cols[j], _fixed_num(2 * w)))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
