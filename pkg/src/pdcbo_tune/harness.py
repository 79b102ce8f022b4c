"""Multi-day experiments: the daily tune/simulate/update loop and its metrics."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import optimizer as opt
from .building import ComfortProfile, DayOutcome, RoomModel, simulate_day
from .domain import KI_BOUNDS, KP_BOUNDS, Context, ControllerParams
from .errors import ConfigError, DomainError, ExperimentError, PdcboError
from .gp import GpModel, SeKernelHyper, fit_hyperparameters
from .weather import WeatherDay, load_weather_csv, synth_weather

log = logging.getLogger(__name__)

ALGORITHMS = ("pdcbo", "safeopt", "cei", "fixed")
FORMULATIONS = ("discomfort_constrained", "energy_constrained")
INITIAL_TEMP = 22.5

# controller-parameter lengthscales: log kp, log ki, setpoint (degC), start (min)
ENERGY_PARAM_HYPER = (56.7, (5.9, 3.1, 2.7, 1290.6))
DISCOMFORT_PARAM_HYPER = (546.1, (6.0, 8.8, 5.2, 1188.0))
# context lengthscales (ambient degC, irradiation W/m2, initial temp degC);
# long on purpose so observations pool across days, see the README
ENERGY_CONTEXT_LENGTHSCALES = (100.0, 2000.0, 15.0)
DISCOMFORT_CONTEXT_LENGTHSCALES = (200.0, 5000.0, 30.0)
ENERGY_HYPER = SeKernelHyper(ENERGY_PARAM_HYPER[0], ENERGY_PARAM_HYPER[1] + ENERGY_CONTEXT_LENGTHSCALES)
DISCOMFORT_HYPER = SeKernelHyper(DISCOMFORT_PARAM_HYPER[0],
                                 DISCOMFORT_PARAM_HYPER[1] + DISCOMFORT_CONTEXT_LENGTHSCALES)

DEFAULT_FIXED_PARAMS = ControllerParams(kp=1.0, ki=0.1, day_setpoint=23.5, heat_start=360.0)


@dataclass(frozen=True)
class GpSettings:
    hyper: SeKernelHyper
    noise_variance: float | None = None
    prior_mean: float | None = None

    def build(self) -> GpModel:
        return GpModel(self.hyper, self.noise_variance, self.prior_mean)


@dataclass
class ExperimentConfig:
    algorithm: str = "pdcbo"
    formulation: str = "discomfort_constrained"
    n_days: int = 300
    threshold_schedule: list = field(default_factory=lambda: [(0, 10.0)])
    seed: int = 0
    room: RoomModel = field(default_factory=RoomModel)
    comfort: ComfortProfile = field(default_factory=ComfortProfile)
    energy_gp: GpSettings = field(default_factory=lambda: GpSettings(ENERGY_HYPER))
    discomfort_gp: GpSettings = field(default_factory=lambda: GpSettings(DISCOMFORT_HYPER))
    fit_after: int | None = None  # observations before a one-off MLE refit
    eta: float = 1.0
    epsilon: float = 0.0
    beta_sqrt: float = 3.0
    grid_levels: int = 6
    kp_bounds: tuple = KP_BOUNDS
    ki_bounds: tuple = KI_BOUNDS
    weather_path: str | None = None
    weather_seed: int | None = None
    noise_std: tuple = (0.0, 0.0)
    fixed_params: ControllerParams = DEFAULT_FIXED_PARAMS
    initial_temp: float = INITIAL_TEMP
    budget_rescale: float = 1.0

    def __post_init__(self):
        self.threshold_schedule = [(int(d), float(t)) for d, t in self.threshold_schedule]
        self.validate()

    def validate(self) -> ExperimentConfig:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"unknown formulation {self.formulation!r}; choose from {', '.join(FORMULATIONS)}")
        if self.n_days < 1:
            raise ConfigError("n_days must be >= 1")
        sched = self.threshold_schedule
        if not sched or sched[0][0] != 0:
            raise ConfigError("threshold schedule must start at day 0")
        if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
            raise ConfigError("threshold schedule start days must be strictly increasing")
        if self.eta <= 0 or self.epsilon < 0 or self.beta_sqrt <= 0:
            raise ConfigError("need eta > 0, epsilon >= 0, beta_sqrt > 0")
        if self.budget_rescale <= 0:
            raise ConfigError("budget_rescale must be > 0")
        return self

    @property
    def scaled_schedule(self) -> list:
        if self.formulation == "energy_constrained":
            return [(d, t * self.budget_rescale) for d, t in self.threshold_schedule]
        return list(self.threshold_schedule)

    def weather(self) -> list[WeatherDay]:
        if self.weather_path:
            days = load_weather_csv(self.weather_path)
            if len(days) < self.n_days:
                raise ConfigError(f"{self.weather_path} has {len(days)} days, need {self.n_days}")
            return days[: self.n_days]
        seed = self.seed if self.weather_seed is None else self.weather_seed
        return synth_weather(seed, self.n_days)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DayRecord:
    day: int
    context: Context
    params: ControllerParams
    energy: float
    discomfort: float
    lam: float
    active_threshold: float
    running_avg_energy: float
    running_avg_discomfort: float
    segment: int = 0
    end_temp: float = math.nan


def running_average(values) -> float:
    values = list(values)
    if not values:
        raise DomainError("running average of an empty sequence")
    return math.fsum(values) / len(values)


def active_threshold(day: int, schedule) -> float:
    return schedule[_segment_index(day, schedule)][1]


def _segment_index(day: int, schedule) -> int:
    idx = 0
    for i, (start, _) in enumerate(schedule):
        if start <= day:
            idx = i
    return idx


def build_tuner(config: ExperimentConfig) -> opt.TunerState:
    energy, discomfort = config.energy_gp.build(), config.discomfort_gp.build()
    if config.formulation == "discomfort_constrained":
        gp_obj, gp_con = energy, discomfort
    else:
        gp_obj, gp_con = discomfort, energy
    grid = opt.make_grid(config.grid_levels, config.kp_bounds, config.ki_bounds)
    return opt.TunerState(gp_obj, gp_con, config.scaled_schedule[0][1], grid,
                          lam=0.0, eta=config.eta, epsilon=config.epsilon,
                          beta_sqrt=config.beta_sqrt)


def _refit(model: GpModel) -> GpModel:
    center = model.hyper.to_log_vector()
    bounds = [(c - math.log(10), c + math.log(10)) for c in center]
    return model.with_hyper(fit_hyperparameters(model, bounds, levels=5))


def default_simulator(config: ExperimentConfig) -> Callable:
    def sim(params, z, day):
        seed = None
        if any(config.noise_std):
            seed = int(np.random.SeedSequence([config.seed, day]).generate_state(1)[0])
        return simulate_day(params, z, config.room, config.comfort, seed, tuple(config.noise_std))
    return sim


def run_experiment(config: ExperimentConfig, simulator: Callable | None = None) -> list[DayRecord]:
    """Run ``config.n_days`` days and return one record per day.

    ``simulator(params, context, day)`` must return an object with
    ``energy``, ``discomfort`` and ``end_temp``; it defaults to the room
    simulation described by ``config``.
    """
    sim = simulator or default_simulator(config)
    weather = config.weather()
    schedule = config.scaled_schedule
    state = None if config.algorithm == "fixed" else build_tuner(config)
    swap = config.formulation == "energy_constrained"

    records = []
    t_init = config.initial_temp
    seg = -1
    e_sum = d_sum = 0.0
    count = 0
    for day in range(config.n_days):
        try:
            new_seg = _segment_index(day, schedule)
            thr = schedule[new_seg][1]
            if new_seg != seg:
                seg = new_seg
                e_sum = d_sum = 0.0
                count = 0
                if state is not None:
                    state.lam = 0.0
                    state.threshold = thr
            w = weather[day]
            z = Context(w.ambient_mean, w.irradiation_mean, t_init)
            outcome: list[DayOutcome] = []

            def observe(params, ctx):
                out = sim(params, ctx, day)
                outcome.append(out)
                if swap:
                    return out.discomfort, out.energy
                return out.energy, out.discomfort

            lam = 0.0 if state is None else state.lam
            if state is None:
                params = config.fixed_params
                opt.fixed_step(params, z, observe)
            else:
                params, state = opt.STEPS[config.algorithm](state, z, observe)
                if config.fit_after and len(state.gp_obj) == config.fit_after:
                    state.gp_obj = _refit(state.gp_obj)
                    state.gp_con = _refit(state.gp_con)
            out = outcome[-1]
        except PdcboError as exc:
            raise ExperimentError(day, exc) from exc

        e_sum += out.energy
        d_sum += out.discomfort
        count += 1
        records.append(DayRecord(day, z, params, float(out.energy), float(out.discomfort), lam, thr,
                                 e_sum / count, d_sum / count, seg, float(out.end_temp)))
        t_init = float(out.end_temp)
        log.debug("day %d: E=%.3f D=%.3f lambda=%.3f", day, out.energy, out.discomfort, lam)
    return records


def summarize(records, formulation: str = "discomfort_constrained") -> dict:
    """Per-segment final averages and violation percentage (avg - thr) / thr."""
    if not records:
        raise DomainError("cannot summarize an empty record list")
    segments = []
    for rec in records:
        if not segments or segments[-1]["segment"] != rec.segment:
            segments.append({"segment": rec.segment, "start_day": rec.day,
                             "threshold": rec.active_threshold, "energy": [], "discomfort": []})
        segments[-1]["energy"].append(rec.energy)
        segments[-1]["discomfort"].append(rec.discomfort)
        segments[-1]["end_day"] = rec.day

    out = []
    for s in segments:
        avg_e = running_average(s["energy"])
        avg_d = running_average(s["discomfort"])
        constrained = avg_e if formulation == "energy_constrained" else avg_d
        thr = s["threshold"]
        violation = (constrained - thr) / thr * 100.0 if thr else math.nan
        out.append({"start_day": s["start_day"], "end_day": s["end_day"], "threshold": thr,
                    "avg_energy_kwh": avg_e, "avg_discomfort_kh": avg_d,
                    "violation_pct": violation})
    return {
        "formulation": formulation,
        "n_days": len(records),
        "final": out[-1],
        "segments": out,
        "overall_avg_energy_kwh": running_average(r.energy for r in records),
        "overall_avg_discomfort_kh": running_average(r.discomfort for r in records),
    }


def energy_baselines(config: ExperimentConfig) -> tuple[float, float]:
    """Average daily energy of the cheapest grid corner and of always-max heating.

    Both runs carry the end temperature forward like a real experiment.
    """
    cheapest = ControllerParams(config.kp_bounds[0], config.ki_bounds[0], 20.0, 540.0)
    totals = []
    for force in (None, 1.0):
        t = config.initial_temp
        energies = []
        for w in config.weather():
            z = Context(w.ambient_mean, w.irradiation_mean, min(max(t, 5.0), 35.0))
            o = simulate_day(cheapest, z, config.room, config.comfort, force_u=force)
            energies.append(o.energy)
            t = o.end_temp
        totals.append(running_average(energies))
    return totals[0], totals[1]


def budget_rescale_factor(config: ExperimentConfig, budgets) -> float:
    """Proportional factor that moves a budget set inside the achievable range.

    A budget is unusable when it lies below the energy of the cheapest grid
    corner (infeasible) or at/above the always-max-heating energy (vacuous).
    Returns 1.0 when every budget is usable.
    """
    budgets = [float(b) for b in budgets]
    e_min, e_max = energy_baselines(config)
    if min(budgets) < e_min:
        return 1.1 * e_min / min(budgets)
    if max(budgets) >= e_max:
        return 0.9 * e_max / max(budgets)
    return 1.0
