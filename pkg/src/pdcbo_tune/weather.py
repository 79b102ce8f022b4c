"""Daily weather sequences: CSV ingestion and a seeded synthetic generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyInputError, SchemaError, WeatherParseError

COLUMNS = ("day", "ambient_c", "irradiation_wm2")

SEASON_MEAN = 5.0
SEASON_AMPLITUDE = 7.0
SEASON_PERIOD = 300.0
DAILY_NOISE_STD = 3.0
AMBIENT_CLIP = (-15.0, 20.0)
IRRADIATION_BASE = 80.0
IRRADIATION_SLOPE = 6.0  # W/m2 per degC above the seasonal mean
IRRADIATION_NOISE_STD = 25.0


@dataclass(frozen=True)
class WeatherDay:
    day_index: int
    ambient_mean: float
    irradiation_mean: float

    def __post_init__(self):
        if not self.irradiation_mean >= 0:
            raise ConfigError(f"negative irradiation {self.irradiation_mean} on day {self.day_index}")


def load_weather_csv(path) -> list[WeatherDay]:
    """Read ``day,ambient_c,irradiation_wm2`` rows; days are renumbered 0..n-1."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if tuple(header) != COLUMNS:
            raise SchemaError(f"{path}: row 1: expected header {','.join(COLUMNS)}, got {','.join(header)}")
        days = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COLUMNS):
                raise SchemaError(f"{path}: row {row_no}: expected {len(COLUMNS)} columns, got {len(row)}")
            values = []
            for name, cell in zip(COLUMNS, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise WeatherParseError(f"{path}: row {row_no}, column {name}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise WeatherParseError(f"{path}: row {row_no}, column {name}: non-finite value")
                values.append(v)
            if values[2] < 0:
                raise WeatherParseError(f"{path}: row {row_no}, column irradiation_wm2: negative irradiation {values[2]}")
            days.append(WeatherDay(len(days), values[1], values[2]))
    if not days:
        raise EmptyInputError(f"{path}: no data rows")
    return days


def write_weather_csv(days, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for d in days:
            w.writerow([d.day_index, repr(float(d.ambient_mean)), repr(float(d.irradiation_mean))])


def synth_weather(seed: int, n_days: int) -> list[WeatherDay]:
    """Heating-season weather: cosine season (mild, cold, mild) plus daily noise."""
    if n_days < 1:
        raise ConfigError("n_days must be >= 1")
    rng = np.random.default_rng(seed)
    days = np.arange(n_days)
    season = SEASON_MEAN + SEASON_AMPLITUDE * np.cos(2 * np.pi * days / SEASON_PERIOD)
    ambient = np.clip(season + rng.normal(0.0, DAILY_NOISE_STD, n_days), *AMBIENT_CLIP)
    irr = (IRRADIATION_BASE + IRRADIATION_SLOPE * (ambient - SEASON_MEAN)
           + rng.normal(0.0, IRRADIATION_NOISE_STD, n_days))
    irr = np.maximum(irr, 0.0)
    return [WeatherDay(int(d), float(a), float(i)) for d, a, i in zip(days, ambient, irr)]
