"""Closed-loop day simulation: truncated PI heating control of a 1R1C room."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Context, ControllerParams
from .errors import ConfigError, SimulationDiverged

MINUTES_PER_DAY = 1440
NIGHT_SETPOINT = 22.5
DAY_END = 1080.0  # 6 PM switch back to the night setpoint
DEFAULT_INTEGRAL_CLAMP = 10.0


@dataclass(frozen=True)
class ComfortProfile:
    night_lo: float = 21.0
    night_hi: float = 24.0
    day_lo: float = 23.0
    day_hi: float = 24.0
    day_begin: float = 480.0
    day_end: float = 1080.0

    def __post_init__(self):
        if not (self.night_lo < self.night_hi and self.day_lo < self.day_hi):
            raise ConfigError("comfort band lower bound must be below upper bound")
        if not 0 <= self.day_begin < self.day_end <= MINUTES_PER_DAY:
            raise ConfigError("need 0 <= day_begin < day_end <= 1440")

    def is_day(self, t: float) -> bool:
        return self.day_begin <= t < self.day_end

    def band(self, t: float) -> tuple[float, float]:
        if self.is_day(t):
            return self.day_lo, self.day_hi
        return self.night_lo, self.night_hi


@dataclass(frozen=True)
class RoomModel:
    """Single-capacitance room. Units: kWh/degC, kW/degC, kW per W/m2, kW, minutes."""

    thermal_capacitance: float = 10.0
    envelope_conductance: float = 0.04
    solar_gain_coeff: float = 0.002
    max_heat_power: float = 2.0
    timestep: float = 15.0
    integral_clamp: float = DEFAULT_INTEGRAL_CLAMP
    # optional intra-day forcing shape; the daily means are preserved
    diurnal_ambient_amplitude: float = 0.0
    diurnal_solar: bool = False

    def __post_init__(self):
        coeffs = (self.thermal_capacitance, self.envelope_conductance, self.solar_gain_coeff,
                  self.max_heat_power, self.timestep, self.integral_clamp)
        if any(not c > 0 for c in coeffs):
            raise ConfigError("room model coefficients must be positive")
        n = MINUTES_PER_DAY / self.timestep
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(f"timestep {self.timestep} min does not divide 1440")
        if self.dt_hours * self.envelope_conductance / self.thermal_capacitance >= 1:
            raise ConfigError("explicit Euler unstable: dt*G/C must be < 1")

    @property
    def dt_hours(self) -> float:
        return self.timestep / 60.0

    @property
    def steps_per_day(self) -> int:
        return int(round(MINUTES_PER_DAY / self.timestep))


@dataclass(frozen=True)
class PiState:
    integral: float = 0.0  # degC * h


@dataclass
class DayOutcome:
    energy: float  # tariff-weighted kWh
    discomfort: float  # K*h
    temp_trace: np.ndarray = field(repr=False)
    power_trace: np.ndarray = field(repr=False)
    end_temp: float = math.nan


def setpoint_at(t: float, params: ControllerParams) -> float:
    if params.heat_start <= t < DAY_END:
        return params.day_setpoint
    return NIGHT_SETPOINT


def pi_control(error: float, pi: PiState, kp: float, ki: float,
               dt_hours: float = 0.25, clamp: float = DEFAULT_INTEGRAL_CLAMP):
    """Advance the integral (anti-windup clamped) and return u in [0, 1]."""
    integral = min(max(pi.integral + error * dt_hours, -clamp), clamp)
    u = kp * error + ki * integral
    return min(max(u, 0.0), 1.0), PiState(integral)


def thermal_step(T: float, u: float, ambient: float, irradiation: float, model: RoomModel) -> float:
    heat = (u * model.max_heat_power
            - model.envelope_conductance * (T - ambient)
            + model.solar_gain_coeff * irradiation)
    return T + model.dt_hours / model.thermal_capacitance * heat


def discomfort_instant(T: float, t: float, profile: ComfortProfile) -> float:
    lo, hi = profile.band(t)
    if T > hi:
        return T - hi
    if T < lo:
        return lo - T
    return 0.0


def tariff_weight(t: float, profile: ComfortProfile) -> float:
    return 2.0 if profile.is_day(t) else 1.0


def forcing(z: Context, t: float, model: RoomModel) -> tuple[float, float]:
    """Ambient temperature and irradiation at minute ``t``.

    Constant daily means unless the diurnal options of ``model`` are set.
    """
    ambient = z.ambient_temp
    if model.diurnal_ambient_amplitude:
        # coldest at 3 AM, warmest at 3 PM
        ambient += model.diurnal_ambient_amplitude * math.sin(2 * math.pi * (t - 540.0) / MINUTES_PER_DAY)
    irr = z.irradiation
    if model.diurnal_solar:
        # half-sine between 6 AM and 6 PM with the same daily mean
        if 360.0 <= t < 1080.0:
            irr = z.irradiation * math.pi * math.sin(math.pi * (t - 360.0) / 720.0)
        else:
            irr = 0.0
    return ambient, irr


def simulate_day(params: ControllerParams, z: Context, model: RoomModel | None = None,
                 profile: ComfortProfile | None = None, noise_seed: int | None = None,
                 noise_std: tuple[float, float] = (0.0, 0.0),
                 force_u: float | None = None) -> DayOutcome:
    """Run one day of closed-loop control from ``z.init_temp``.

    ``noise_std`` is the measurement noise (energy, discomfort) added to the
    returned scalars; traces are noise-free. ``force_u`` bypasses the
    controller with a constant input.
    """
    model = model or RoomModel()
    profile = profile or ComfortProfile()
    n = model.steps_per_day
    dt_h = model.dt_hours
    temps = np.empty(n)
    power = np.empty(n)
    T = z.init_temp
    pi = PiState()
    energy = 0.0
    discomfort = 0.0
    for k in range(n):
        t = k * model.timestep
        if force_u is None:
            err = setpoint_at(t, params) - T
            u, pi = pi_control(err, pi, params.kp, params.ki, dt_h, model.integral_clamp)
        else:
            u = min(max(force_u, 0.0), 1.0)
        p = u * model.max_heat_power
        temps[k] = T
        power[k] = p
        energy += tariff_weight(t, profile) * p * dt_h
        discomfort += discomfort_instant(T, t, profile) * dt_h
        ambient, irr = forcing(z, t, model)
        T = thermal_step(T, u, ambient, irr, model)
        if not math.isfinite(T):
            raise SimulationDiverged(f"non-finite room temperature at minute {t}")

    sd_e, sd_d = noise_std
    if noise_seed is not None and (sd_e > 0 or sd_d > 0):
        rng = np.random.default_rng(noise_seed)
        e_noise, d_noise = rng.normal(0.0, 1.0, size=2)
        energy = max(0.0, energy + sd_e * e_noise)
        discomfort = max(0.0, discomfort + sd_d * d_noise)
    return DayOutcome(energy, discomfort, temps, power, T)
