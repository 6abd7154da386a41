"""In-sample price scenarios: historical up-sampling and short lookback."""

from __future__ import annotations

import csv
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, ParseError, SchemaError
from .prices import PRICE_COLUMNS, PriceDay, price_rows, up_regulation_hours

SCENARIO_COLUMNS = PRICE_COLUMNS + ("scenario_id", "probability")


@dataclass(frozen=True)
class ScenarioSet:
    """Spot/balancing price scenarios (``n_scenarios x n_hours``) sharing one
    reservation-price series."""

    lambda_s: np.ndarray
    lambda_b: np.ndarray
    probabilities: np.ndarray
    lambda_r: np.ndarray
    source_dates: tuple[dt.date, ...] = ()

    def __post_init__(self) -> None:
        s = np.atleast_2d(np.asarray(self.lambda_s, dtype=float))
        b = np.atleast_2d(np.asarray(self.lambda_b, dtype=float))
        p = np.asarray(self.probabilities, dtype=float).ravel()
        r = np.asarray(self.lambda_r, dtype=float).ravel()
        if s.shape != b.shape or s.shape[0] != p.size or s.shape[1] != r.size:
            raise InvalidInputError(
                f"inconsistent scenario shapes: spot {s.shape}, balancing {b.shape}, "
                f"probabilities {p.shape}, reservation {r.shape}"
            )
        if s.shape[0] == 0:
            raise InvalidInputError("a scenario set needs at least one scenario")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidInputError("probabilities must be positive and sum to 1")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(b)) and np.all(np.isfinite(r))):
            raise InvalidInputError("scenario prices must be finite")
        if np.any(r < 0):
            raise InvalidInputError("reservation prices must be >= 0")
        object.__setattr__(self, "lambda_s", s)
        object.__setattr__(self, "lambda_b", b)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "lambda_r", r)
        object.__setattr__(self, "source_dates", tuple(self.source_dates))

    @property
    def n_scenarios(self) -> int:
        return self.lambda_s.shape[0]

    @property
    def n_hours(self) -> int:
        return self.lambda_s.shape[1]

    def scenario(self, w: int) -> PriceDay:
        date = self.source_dates[w] if self.source_dates else dt.date(1970, 1, 1)
        return PriceDay(date, self.lambda_s[w], self.lambda_b[w], self.lambda_r)

    def subset(self, idx: Sequence[int]) -> "ScenarioSet":
        idx = list(idx)
        p = self.probabilities[idx]
        return ScenarioSet(
            self.lambda_s[idx],
            self.lambda_b[idx],
            p / p.sum(),
            self.lambda_r,
            tuple(self.source_dates[i] for i in idx) if self.source_dates else (),
        )

    @classmethod
    def from_days(
        cls,
        days: Sequence[PriceDay],
        probabilities: Sequence[float] | None = None,
        lambda_r: Sequence[float] | None = None,
    ) -> "ScenarioSet":
        if not days:
            raise InvalidInputError("no days given")
        n = len(days)
        p = np.full(n, 1.0 / n) if probabilities is None else np.asarray(probabilities, dtype=float)
        if lambda_r is None:
            lambda_r = np.mean([d.lambda_r for d in days], axis=0)
        return cls(
            np.array([d.lambda_s for d in days]),
            np.array([d.lambda_b for d in days]),
            p,
            np.asarray(lambda_r, dtype=float),
            tuple(d.date for d in days),
        )

    @classmethod
    def single(cls, day: PriceDay) -> "ScenarioSet":
        return cls.from_days([day], [1.0], day.lambda_r)


def generate_historical(
    history: Sequence[PriceDay],
    n_scenarios: int = 50,
    rng_seed: int | None = 0,
    lambda_r: Sequence[float] | None = None,
) -> ScenarioSet:
    """Up-sample days by their number of up-regulation hours.

    Each scenario draws a count ``v`` uniformly from ``{0, ..., n_hours}``
    (redrawn while no history day has exactly ``v`` up-regulation hours) and
    then one history day with that count uniformly. Spot prices and
    balancing-spot differentials come from that same day.

    ``lambda_r`` defaults to the hourly mean reservation price of the history.
    """
    if not history:
        raise InvalidInputError("history is empty")
    if n_scenarios < 1:
        raise InvalidInputError(f"n_scenarios must be >= 1, got {n_scenarios}")
    n_hours = history[0].n_hours
    if any(d.n_hours != n_hours for d in history):
        raise InvalidInputError("history days differ in length")
    buckets: dict[int, list[int]] = defaultdict(list)
    for i, day in enumerate(history):
        buckets[up_regulation_hours(day)].append(i)

    rng = np.random.default_rng(rng_seed)
    chosen = []
    for _ in range(n_scenarios):
        while True:
            v = int(rng.integers(0, n_hours + 1))
            if buckets.get(v):
                break
        members = buckets[v]
        chosen.append(members[int(rng.integers(len(members)))])

    days = [history[i] for i in chosen]
    spot = np.array([d.lambda_s for d in days])
    # spot + differential of the same day is that day's balancing price; copy it
    # directly so scenarios stay bit-identical to history.
    balancing = np.array([d.lambda_b for d in days])
    if lambda_r is None:
        lambda_r = np.mean([d.lambda_r for d in history], axis=0)
    return ScenarioSet(
        spot,
        balancing,
        np.full(n_scenarios, 1.0 / n_scenarios),
        np.asarray(lambda_r, dtype=float),
        tuple(d.date for d in days),
    )


def generate_lookback(
    history: Sequence[PriceDay],
    target_date: dt.date,
    k: int = 5,
    lambda_r: Sequence[float] | None = None,
) -> ScenarioSet:
    """The ``k`` most recent available days before ``target_date``, equiprobable.

    ``lambda_r`` defaults to the mean of the selected days.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    prior = sorted((d for d in history if d.date < target_date), key=lambda d: d.date)
    if len(prior) < k:
        raise InvalidInputError(
            f"lookback needs {k} days before {target_date}, only {len(prior)} available "
            f"(short by {k - len(prior)})"
        )
    return ScenarioSet.from_days(prior[-k:], lambda_r=lambda_r)


def write_scenarios_csv(scen: ScenarioSet, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SCENARIO_COLUMNS)
        for w in range(scen.n_scenarios):
            prob = repr(float(scen.probabilities[w]))
            for row in price_rows(scen.scenario(w)):
                writer.writerow(row + [str(w), prob])
    return path


def load_scenarios_csv(path: str | Path) -> ScenarioSet:
    path = Path(path)
    grouped: dict[int, list[tuple[dt.date, float, float, float, float]]] = defaultdict(list)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in SCENARIO_COLUMNS):
            raise SchemaError(f"{path}: expected columns {SCENARIO_COLUMNS}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                w = int(rec["scenario_id"])
                stamp = dt.datetime.fromisoformat(rec["timestamp_utc"].replace("Z", "+00:00"))
                values = tuple(
                    float(rec[c])
                    for c in ("spot_price", "balancing_price", "mfrr_reservation_price", "probability")
                )
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            grouped[w].append((stamp.date(),) + values)
    ids = sorted(grouped)
    if ids != list(range(len(ids))):
        raise SchemaError(f"{path}: scenario ids must be 0..n-1")
    rows = [grouped[w] for w in ids]
    return ScenarioSet(
        np.array([[r[1] for r in rs] for rs in rows]),
        np.array([[r[2] for r in rs] for rs in rows]),
        np.array([rs[0][4] for rs in rows]),
        np.array([r[3] for r in rows[0]]),
        tuple(rs[0][0] for rs in rows),
    )
