"""Tuning vector and daily context shared by the optimizer, simulator and harness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

KP_BOUNDS = (0.05, 5.0)
KI_BOUNDS = (0.01, 2.0)
SETPOINT_BOUNDS = (20.0, 26.0)
HEAT_START_BOUNDS = (0.0, 540.0)


@dataclass(frozen=True)
class ControllerParams:
    """PI gains, daytime setpoint (deg C) and heating start (minutes after midnight).

    Gains are normalized: ``kp`` is per deg C, ``ki`` per deg C per hour.
    """

    kp: float
    ki: float
    day_setpoint: float
    heat_start: float

    def validate(self, kp_bounds=KP_BOUNDS, ki_bounds=KI_BOUNDS) -> ControllerParams:
        checks = [
            ("kp", self.kp, kp_bounds),
            ("ki", self.ki, ki_bounds),
            ("day_setpoint", self.day_setpoint, SETPOINT_BOUNDS),
            ("heat_start", self.heat_start, HEAT_START_BOUNDS),
        ]
        for name, v, (lo, hi) in checks:
            if not lo - 1e-9 <= v <= hi + 1e-9:
                raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
        return self

    def to_vector(self) -> np.ndarray:
        # gains enter the GP in log scale
        return np.array([math.log(self.kp), math.log(self.ki), self.day_setpoint, self.heat_start])


@dataclass(frozen=True)
class Context:
    """Daily mean ambient temperature, mean irradiation and midnight room temperature."""

    ambient_temp: float
    irradiation: float
    init_temp: float

    def __post_init__(self):
        if not self.irradiation >= 0:
            raise ConfigError(f"irradiation must be >= 0, got {self.irradiation}")
        if not -30.0 <= self.ambient_temp <= 45.0:
            raise ConfigError(f"ambient_temp {self.ambient_temp} outside [-30, 45]")
        if not 5.0 <= self.init_temp <= 35.0:
            raise ConfigError(f"init_temp {self.init_temp} outside [5, 35]")

    def to_vector(self) -> np.ndarray:
        return np.array([self.ambient_temp, self.irradiation, self.init_temp])


def as_vector(obj) -> np.ndarray:
    """GP encoding of a parameter or context object; plain arrays pass through."""
    if hasattr(obj, "to_vector"):
        return obj.to_vector()
    return np.atleast_1d(np.asarray(obj, dtype=float))
