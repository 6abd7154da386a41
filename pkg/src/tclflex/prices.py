"""Hourly market prices and the freezer's baseline consumption."""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError, SchemaError
from .thermal import ThermalParams, equilibrium_power

PRICE_COLUMNS = ("timestamp_utc", "spot_price", "balancing_price", "mfrr_reservation_price")
HOURS_PER_DAY = 24


def _as_series(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d series")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class PriceDay:
    """Spot, balancing and mFRR reservation prices (currency/MWh) for one day."""

    date: dt.date
    lambda_s: np.ndarray
    lambda_b: np.ndarray
    lambda_r: np.ndarray

    def __post_init__(self) -> None:
        s = _as_series(self.lambda_s, "lambda_s")
        b = _as_series(self.lambda_b, "lambda_b")
        r = _as_series(self.lambda_r, "lambda_r")
        if not (len(s) == len(b) == len(r)):
            raise InvalidInputError("price series differ in length")
        if np.any(r < 0):
            raise InvalidInputError("reservation prices must be >= 0")
        object.__setattr__(self, "lambda_s", s)
        object.__setattr__(self, "lambda_b", b)
        object.__setattr__(self, "lambda_r", r)

    @property
    def n_hours(self) -> int:
        return len(self.lambda_s)

    @property
    def up_regulation(self) -> np.ndarray:
        return self.lambda_b > self.lambda_s


def up_regulation_hours(day: PriceDay) -> int:
    """Number of hours where the balancing price strictly exceeds spot."""
    return int(np.count_nonzero(day.lambda_b > day.lambda_s))


@dataclass(frozen=True)
class FreezerSpec:
    """Baseline schedule and power limits (kW); penalty price in currency/MWh.

    ``defrost_hours`` are 0-based clock hours.
    """

    p_base: np.ndarray
    p_min: float
    p_nom: float
    lambda_penalty: float | None = None
    defrost_hours: tuple[int, ...] = (7, 8)

    def __post_init__(self) -> None:
        p_base = _as_series(self.p_base, "p_base")
        object.__setattr__(self, "p_base", p_base)
        object.__setattr__(self, "defrost_hours", tuple(int(h) for h in self.defrost_hours))
        if not (0 <= self.p_min <= p_base.min() <= p_base.max() <= self.p_nom):
            raise InvalidInputError(
                "require 0 <= p_min <= min(p_base) <= max(p_base) <= p_nom, got "
                f"p_min={self.p_min}, p_base in [{p_base.min()}, {p_base.max()}], p_nom={self.p_nom}"
            )
        if self.lambda_penalty is not None and not self.lambda_penalty >= 0:
            raise InvalidInputError("lambda_penalty must be >= 0")

    @property
    def n_hours(self) -> int:
        return len(self.p_base)

    def defrost_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_hours, dtype=bool)
        for h in self.defrost_hours:
            if 0 <= h < self.n_hours:
                mask[h] = True
        return mask

    def with_penalty(self, lambda_penalty: float) -> "FreezerSpec":
        from dataclasses import replace

        return replace(self, lambda_penalty=float(lambda_penalty))

    @classmethod
    def standard(
        cls,
        params: ThermalParams,
        t_indoor: float = 20.0,
        p_min: float = 0.0,
        p_nom: float = 1.2,
        lambda_penalty: float | None = None,
        defrost_hours: Sequence[int] = (7, 8),
        opening_hours: tuple[float, float] = (6.0, 22.0),
    ) -> "FreezerSpec":
        """Two-regime baseline: the power holding the setpoint in each regime."""
        day = equilibrium_power(params, "day", t_indoor)
        night = equilibrium_power(params, "night", t_indoor)
        lo, hi = opening_hours
        p_base = np.array([day if lo <= h < hi else night for h in range(params.n_hours)])
        return cls(p_base, p_min, p_nom, lambda_penalty, tuple(defrost_hours))


def _parse_timestamp(text: str, row: int) -> dt.datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = dt.datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}", row) from exc
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return stamp


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"non-numeric {column} {text!r}", row) from exc
    if not math.isfinite(value):
        raise ParseError(f"non-finite {column} {text!r}", row)
    return value


def load_price_csv(
    path: str | Path,
    date_range: tuple[dt.date | None, dt.date | None] | None = None,
) -> list[PriceDay]:
    """Read hourly prices and group them into complete calendar days (UTC).

    Days with missing or duplicated hours are rejected with a
    :class:`SchemaError` naming the day.
    """
    path = Path(path)
    start, end = date_range or (None, None)
    rows: dict[dt.date, dict[int, tuple[float, float, float]]] = defaultdict(dict)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [c for c in PRICE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in PRICE_COLUMNS]
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) < len(header):
                raise ParseError("too few cells", lineno)
            stamp = _parse_timestamp(record[idx[0]], lineno)
            if stamp.minute or stamp.second or stamp.microsecond:
                raise ParseError(f"timestamp {stamp} is not on the hour", lineno)
            day = stamp.date()
            if (start and day < start) or (end and day > end):
                continue
            values = tuple(
                _parse_float(record[i], c, lineno) for i, c in zip(idx[1:], PRICE_COLUMNS[1:])
            )
            if stamp.hour in rows[day]:
                raise SchemaError(f"{day}: duplicated hour {stamp.hour} (row {lineno})")
            rows[day][stamp.hour] = values

    days = []
    for day in sorted(rows):
        hours = rows[day]
        if len(hours) != HOURS_PER_DAY:
            absent = sorted(set(range(HOURS_PER_DAY)) - set(hours))
            raise SchemaError(f"{day}: expected 24 hourly rows, missing hours {absent}")
        table = np.array([hours[h] for h in range(HOURS_PER_DAY)])
        if np.any(table[:, 2] < 0):
            raise SchemaError(f"{day}: negative reservation price")
        days.append(PriceDay(day, table[:, 0], table[:, 1], table[:, 2]))
    return days


def price_rows(day: PriceDay) -> Iterable[list[str]]:
    base = dt.datetime.combine(day.date, dt.time())
    for h in range(day.n_hours):
        stamp = (base + dt.timedelta(hours=h)).strftime("%Y-%m-%dT%H:%M:%SZ")
        yield [stamp, repr(float(day.lambda_s[h])), repr(float(day.lambda_b[h])), repr(float(day.lambda_r[h]))]


def write_price_csv(days: Sequence[PriceDay], path: str | Path) -> Path:
    """Write days in the loader's format; floats use shortest round-trip repr."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PRICE_COLUMNS)
        for day in days:
            writer.writerows(price_rows(day))
    return path


def synthetic_price_days(
    n_days: int,
    start: dt.date = dt.date(2022, 1, 1),
    seed: int = 0,
    n_hours: int = HOURS_PER_DAY,
    mean_spot: float = 150.0,
) -> list[PriceDay]:
    """Stationary synthetic prices with a daily shape, for tests and demos.

    Up-regulation hours occur in runs; the balancing price then sits above spot.
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(n_hours)
    shape = 1.0 + 0.35 * np.sin((hours - 7) / 24 * 2 * np.pi) + 0.2 * np.sin((hours - 3) / 12 * 2 * np.pi)
    days = []
    for d in range(n_days):
        level = mean_spot * rng.lognormal(0.0, 0.25)
        spot = level * shape + rng.normal(0.0, 0.08 * mean_spot, n_hours)
        state = rng.random() < 0.4
        up = np.zeros(n_hours, dtype=bool)
        for h in hours:
            if rng.random() < 0.18:
                state = not state
            up[h] = state
        premium = rng.gamma(2.0, 0.25 * mean_spot, n_hours)
        discount = rng.gamma(2.0, 0.08 * mean_spot, n_hours)
        balancing = np.where(up, spot + premium, spot - discount)
        reservation = np.clip(rng.normal(0.2 * mean_spot, 0.06 * mean_spot, n_hours), 0.0, None)
        days.append(
            PriceDay(
                start + dt.timedelta(days=d),
                np.round(spot, 2),
                np.round(balancing, 2),
                np.round(reservation, 2),
            )
        )
    return days
