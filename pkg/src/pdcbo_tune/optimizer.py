"""PDCBO and the comparison strategies over a finite candidate grid.

Every strategy works with the same :class:`TunerState`. Objective and
constraint are generic: for the energy-budget formulation the caller
simply places the discomfort model in ``gp_obj`` and the energy model in
``gp_con``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .domain import (
    HEAT_START_BOUNDS,
    KI_BOUNDS,
    KP_BOUNDS,
    SETPOINT_BOUNDS,
    ControllerParams,
    as_vector,
)
from .errors import ConfigError
from .gp import GpModel

Observe = Callable[[object, object], "tuple[float, float]"]


class CandidateGrid:
    """Finite candidate set with its GP encoding cached as one array."""

    def __init__(self, points: Sequence):
        points = list(points)
        if not points:
            raise ConfigError("candidate grid is empty")
        self.points = points
        self.encoded = np.vstack([as_vector(p) for p in points])

    def __len__(self):
        return len(self.points)

    def inputs_for(self, z) -> np.ndarray:
        zv = as_vector(z)
        return np.hstack([self.encoded, np.broadcast_to(zv, (len(self), zv.size))])


def make_grid(levels: int = 6, kp_bounds=KP_BOUNDS, ki_bounds=KI_BOUNDS,
              setpoint_bounds=SETPOINT_BOUNDS, start_bounds=HEAT_START_BOUNDS) -> CandidateGrid:
    """Cartesian grid: log-spaced gains, linear setpoint and start time."""
    if levels < 1:
        raise ConfigError("grid needs at least one level per dimension")
    kps = np.geomspace(*kp_bounds, levels)
    kis = np.geomspace(*ki_bounds, levels)
    sps = np.linspace(*setpoint_bounds, levels)
    starts = np.linspace(*start_bounds, levels)
    points = [
        ControllerParams(float(kp), float(ki), float(sp), float(st)).validate(kp_bounds, ki_bounds)
        for kp, ki, sp, st in itertools.product(kps, kis, sps, starts)
    ]
    return CandidateGrid(points)


@dataclass
class TunerState:
    gp_obj: GpModel
    gp_con: GpModel
    threshold: float
    grid: CandidateGrid
    lam: float = 0.0
    eta: float = 1.0
    epsilon: float = 0.0
    beta_sqrt: float = 3.0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("dual variable must be nonnegative")
        if self.eta <= 0 or self.epsilon < 0 or self.beta_sqrt <= 0:
            raise ConfigError("need eta > 0, epsilon >= 0, beta_sqrt > 0")


def lcb(model: GpModel, theta, z, beta_sqrt: float) -> float:
    """Posterior mean minus ``beta_sqrt`` posterior standard deviations."""
    if beta_sqrt < 0:
        raise ConfigError("beta_sqrt must be >= 0")
    post = model.posterior(np.concatenate([as_vector(theta), as_vector(z)]))
    return post.mean - beta_sqrt * post.std


def _mean_std(model: GpModel, X: np.ndarray):
    mean, var = model.predict(X)
    return mean, np.sqrt(var)


def lagrangian_lcb(state: TunerState, z) -> tuple[np.ndarray, np.ndarray]:
    """Lagrangian of the two LCBs over the grid, plus the constraint LCB."""
    X = state.grid.inputs_for(z)
    mj, sj = _mean_std(state.gp_obj, X)
    mg, sg = _mean_std(state.gp_con, X)
    g_lcb = mg - state.beta_sqrt * sg
    return mj - state.beta_sqrt * sj + state.lam * g_lcb, g_lcb


def primal_update(state: TunerState, z):
    """Grid point minimizing J_lcb + lam * g_lcb (first index wins ties)."""
    return state.grid.points[_primal_index(state, z)[0]]


def _primal_index(state: TunerState, z):
    lag, g_lcb = lagrangian_lcb(state, z)
    i = int(np.argmin(lag))
    return i, float(g_lcb[i])


def dual_update(lam: float, g_lcb_at_chosen: float, threshold: float,
                eta: float, epsilon: float) -> float:
    return max(0.0, lam + eta * (g_lcb_at_chosen - threshold) + epsilon)


def _record(state: TunerState, theta, z, obj: float, con: float):
    x = np.concatenate([as_vector(theta), as_vector(z)])
    state.gp_obj.add_observation(x, obj)
    state.gp_con.add_observation(x, con)


def pdcbo_step(state: TunerState, z, observe: Observe):
    """One day of PDCBO: primal argmin, evaluation, dual ascent, GP update.

    The dual step uses the constraint LCB at the chosen point computed
    before the day's data enters the GPs. ``state`` is only mutated after
    ``observe`` returns.
    """
    i, g_lcb = _primal_index(state, z)
    theta = state.grid.points[i]
    obj, con = observe(theta, z)
    state.lam = dual_update(state.lam, g_lcb, state.threshold, state.eta, state.epsilon)
    _record(state, theta, z, obj, con)
    return theta, state


def safeopt_index(state: TunerState, z) -> int:
    X = state.grid.inputs_for(z)
    mj, sj = _mean_std(state.gp_obj, X)
    mg, sg = _mean_std(state.gp_con, X)
    g_ucb = mg + state.beta_sqrt * sg
    safe = g_ucb <= state.threshold
    if not safe.any():
        return int(np.argmin(g_ucb))
    j_lcb = np.where(safe, mj - state.beta_sqrt * sj, np.inf)
    return int(np.argmin(j_lcb))


def safeopt_step(state: TunerState, z, observe: Observe):
    """Minimize the objective LCB inside the pessimistic safe set.

    Safe means constraint UCB <= threshold. With an empty safe set the point
    of smallest constraint UCB is evaluated instead.
    """
    theta = state.grid.points[safeopt_index(state, z)]
    obj, con = observe(theta, z)
    _record(state, theta, z, obj, con)
    return theta, state


def best_feasible(state: TunerState) -> float | None:
    feas = [o for o, c in zip(state.gp_obj.outputs, state.gp_con.outputs) if c <= state.threshold]
    return min(feas) if feas else None


def expected_improvement(mean, std, best: float) -> np.ndarray:
    """EI for minimization; reduces to max(best - mean, 0) where std is 0."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    imp = best - mean
    out = np.maximum(imp, 0.0)
    pos = std > 0
    zs = imp[pos] / std[pos]
    out[pos] = imp[pos] * norm.cdf(zs) + std[pos] * norm.pdf(zs)
    return out


def feasibility_probability(mean, std, threshold: float) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    out = (mean <= threshold).astype(float)
    pos = std > 0
    out[pos] = norm.cdf((threshold - mean[pos]) / std[pos])
    return out


def cei_acquisition(state: TunerState, z) -> np.ndarray:
    X = state.grid.inputs_for(z)
    mj, sj = _mean_std(state.gp_obj, X)
    mg, sg = _mean_std(state.gp_con, X)
    pof = feasibility_probability(mg, sg, state.threshold)
    best = best_feasible(state)
    if best is None:
        return pof
    return expected_improvement(mj, sj, best) * pof


def cei_step(state: TunerState, z, observe: Observe):
    """Maximize expected improvement times probability of feasibility.

    The incumbent is the best objective among observations whose measured
    constraint meets the current threshold, across all contexts.
    """
    theta = state.grid.points[int(np.argmax(cei_acquisition(state, z)))]
    obj, con = observe(theta, z)
    _record(state, theta, z, obj, con)
    return theta, state


def fixed_step(params, z, observe: Observe) -> tuple[float, float]:
    return observe(params, z)


STEPS = {
    "pdcbo": pdcbo_step,
    "safeopt": safeopt_step,
    "cei": cei_step,
}
