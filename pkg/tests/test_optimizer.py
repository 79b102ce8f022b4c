import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import synthetic
from oracles import cei_value, dense_posterior, reference_pdcbo
from pdcbo_tune import optimizer as opt
from pdcbo_tune.domain import ControllerParams, Context
from pdcbo_tune.errors import ConfigError
from pdcbo_tune.gp import JITTER, GpModel, SeKernelHyper


def model_1d(X=(), y=(), prior=None, noise=1e-4, s2=1.0, ls=(0.3, 0.5)):
    return GpModel(SeKernelHyper(s2, ls), noise, prior, [list(x) for x in X], list(y))


def state_with(points, gp_obj, gp_con, thr=0.5, lam=0.0, **kw):
    return opt.TunerState(gp_obj, gp_con, thr, opt.CandidateGrid(points), lam=lam, **kw)


def random_state(rng, n_grid, lam=None):
    n = int(rng.integers(0, 8))
    X = rng.uniform(0, 1, (n, 2))
    gj = model_1d(X, rng.normal(size=n), s2=float(rng.uniform(0.5, 2)))
    gg = model_1d(X, rng.normal(size=n), s2=float(rng.uniform(0.5, 2)))
    pts = [[float(v)] for v in rng.uniform(0, 1, n_grid)]
    lam = float(rng.uniform(0, 5)) if lam is None else lam
    return state_with(pts, gj, gg, thr=float(rng.normal()), lam=lam)


def enumerate_posteriors(model, points, z):
    noise = model.noise_variance + JITTER * model.hyper.signal_variance
    out = []
    for p in points:
        mu, var = dense_posterior(model.inputs, model.outputs, (p[0], z), model.hyper.signal_variance,
                                  model.hyper.lengthscales, noise, model.mean_value)
        out.append((mu, math.sqrt(max(var, 0.0))))
    return out


def test_make_grid_default_size_and_bounds():
    grid = opt.make_grid()
    assert len(grid) == 1296
    kps = sorted({p.kp for p in grid.points})
    assert kps[0] == pytest.approx(0.05) and kps[-1] == pytest.approx(5.0)
    assert np.allclose(np.diff(np.log(kps)), math.log(100) / 5)
    assert {p.heat_start for p in grid.points} == {0.0, 108.0, 216.0, 324.0, 432.0, 540.0}
    assert grid.inputs_for(Context(5.0, 80.0, 22.5)).shape == (1296, 7)


def test_empty_grid_rejected():
    with pytest.raises(ConfigError):
        opt.CandidateGrid([])


def test_negative_dual_rejected():
    with pytest.raises(ConfigError):
        state_with([[0.0]], model_1d(), model_1d(), lam=-0.1)


def test_lcb_examples():
    m = model_1d(prior=2.0, s2=0.25)
    assert opt.lcb(m, [0.1], [0.2], 3.0) == pytest.approx(0.5)
    assert opt.lcb(m, [0.1], [0.2], 0.0) == pytest.approx(2.0)
    exact = GpModel(SeKernelHyper(1.0, (1.0, 1.0)), 0.0, 0.0, [[0.1, 0.2]], [0.7])
    assert opt.lcb(exact, [0.1], [0.2], 3.0) == pytest.approx(0.7, abs=1e-3)
    with pytest.raises(ConfigError):
        opt.lcb(m, [0.1], [0.2], -1.0)


@pytest.mark.parametrize("lam, gap, eps, expected", [
    (0.0, 0.0, 0.0, 0.0),
    (1.0, -5.0, 0.0, 0.0),
    (0.5, 0.3, 0.1, 0.9),
])
def test_dual_update_examples(lam, gap, eps, expected):
    assert opt.dual_update(lam, 10.0 + gap, 10.0, 1.0, eps) == pytest.approx(expected)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 100), st.floats(-100, 100), st.floats(-100, 100),
       st.floats(0.01, 10), st.floats(0, 5))
def test_dual_update_nonnegative_and_closed_form(lam, g, thr, eta, eps):
    new = opt.dual_update(lam, g, thr, eta, eps)
    assert new >= 0
    assert new == max(0.0, lam + eta * (g - thr) + eps)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.floats(-20, 20), st.floats(0, 20), st.floats(0.1, 3))
def test_dual_update_monotone_in_gap(lam, gap, extra, eta):
    assert opt.dual_update(lam, gap + extra, 0.0, eta, 0.0) >= opt.dual_update(lam, gap, 0.0, eta, 0.0)


def test_primal_single_point_grid():
    st_ = state_with([[0.4]], model_1d(), model_1d())
    assert opt.primal_update(st_, 0.3) == [0.4]


def test_primal_with_zero_dual_minimizes_objective_lcb():
    rng = np.random.default_rng(2)
    st_ = random_state(rng, 30, lam=0.0)
    z = 0.5
    post = enumerate_posteriors(st_.gp_obj, st_.grid.points, z)
    j = [m - 3.0 * s for m, s in post]
    assert opt.primal_update(st_, z) == st_.grid.points[int(np.argmin(j))]


def test_primal_matches_enumeration_three_points():
    X = [(0.1, 0.2), (0.7, 0.4), (0.4, 0.9)]
    gj = model_1d(X, [0.3, 1.1, 0.6])
    gg = model_1d(X, [0.9, 0.2, 0.5])
    pts = [[0.0], [0.5], [1.0]]
    for lam in (0.0, 0.3, 2.0, 10.0):
        st_ = state_with(pts, gj, gg, lam=lam)
        pj = enumerate_posteriors(gj, pts, 0.5)
        pg = enumerate_posteriors(gg, pts, 0.5)
        vals = [mj - 3 * sj + lam * (mg - 3 * sg) for (mj, sj), (mg, sg) in zip(pj, pg)]
        assert opt.primal_update(st_, 0.5) == pts[int(np.argmin(vals))]


def test_primal_first_index_wins_ties():
    st_ = state_with([[0.2], [0.2], [0.2]], model_1d(), model_1d())
    i, _ = opt._primal_index(st_, 0.1)
    assert i == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_argmin_invariant_to_objective_shift(seed, c):
    # shifting every objective output and the prior mean by c moves the LCB uniformly
    rng = np.random.default_rng(seed)
    st_ = random_state(rng, 40)
    base = opt.primal_update(st_, 0.3)
    shifted = GpModel(st_.gp_obj.hyper, st_.gp_obj.noise_variance, st_.gp_obj.mean_value + c,
                      st_.gp_obj.inputs, [y + c for y in st_.gp_obj.outputs])
    st2 = opt.TunerState(shifted, st_.gp_con, st_.threshold, st_.grid, lam=st_.lam)
    lag1, _ = opt.lagrangian_lcb(st_, 0.3)
    lag2, _ = opt.lagrangian_lcb(st2, 0.3)
    assert np.allclose(lag2 - lag1, c, atol=1e-7)
    # only exact ties could flip; require a clear winner before comparing
    gap = np.sort(lag1)[1] - np.sort(lag1)[0] if len(lag1) > 1 else 1.0
    if gap > 1e-6:
        assert opt.primal_update(st2, 0.3) == base


def test_pdcbo_step_order_and_dual_uses_prior_lcb():
    gj, gg = model_1d(prior=0.0), model_1d(prior=0.0)
    st_ = state_with([[0.0], [1.0]], gj, gg, thr=-1.0)
    calls = []

    def observe(theta, z):
        calls.append((theta, z))
        return 1.0, 2.0

    theta, st_ = opt.pdcbo_step(st_, 0.5, observe)
    assert calls == [([0.0], 0.5)]
    # g_lcb before the update is 0 - 3*1 = -3, so lam = max(0, -3 + 1) = 0
    assert st_.lam == 0.0
    assert len(st_.gp_obj) == 1 and st_.gp_con.outputs == [2.0]


def test_pdcbo_step_failure_leaves_state_untouched():
    st_ = state_with([[0.0], [1.0]], model_1d(), model_1d(), lam=0.7)

    def boom(theta, z):
        raise RuntimeError("sensor offline")

    with pytest.raises(RuntimeError):
        opt.pdcbo_step(st_, 0.5, boom)
    assert st_.lam == 0.7 and len(st_.gp_obj) == 0


def test_dual_stays_zero_when_constraint_far_below_threshold():
    X = [(x, z) for x in (0.0, 0.5, 1.0) for z in (0.0, 1.0)]
    gg = model_1d(X, [-100.0] * 6, prior=-100.0)
    st_ = state_with([[0.0], [0.5], [1.0]], model_1d(X, [0.0] * 6), gg, thr=0.0)
    for z in np.linspace(0, 1, 10):
        opt.pdcbo_step(st_, z, lambda th, zz: (float(th[0]), -100.0))
        assert st_.lam == 0.0


def _synthetic_state(levels=11):
    s2, ls = synthetic.HYPER
    pts = [list(t) for t in synthetic.theta_grid(levels)]
    return state_with(pts, model_1d(s2=s2, ls=ls, noise=synthetic.NOISE),
                      model_1d(s2=s2, ls=ls, noise=synthetic.NOISE), thr=synthetic.THRESHOLD)


def _observe(theta, z):
    return synthetic.objective(theta, z), synthetic.constraint(theta, z)


def test_pdcbo_matches_straight_line_reference_50_steps():
    zs = synthetic.contexts(0, 50)
    st_ = _synthetic_state()
    got, lams = [], []
    for z in zs:
        lams.append(st_.lam)
        theta, st_ = opt.pdcbo_step(st_, z, _observe)
        got.append(theta)
    s2, ls = synthetic.HYPER
    noise = synthetic.NOISE + JITTER * s2
    grid = synthetic.theta_grid(11)
    ref, ref_lams = reference_pdcbo(grid, [[z] for z in zs],
                                    lambda i, z: synthetic.objective(grid[i], z[0]),
                                    lambda i, z: synthetic.constraint(grid[i], z[0]),
                                    synthetic.THRESHOLD, (s2, ls), (s2, ls), noise, noise)
    assert got == [list(grid[i]) for i in ref]
    assert lams == pytest.approx(ref_lams, abs=1e-6)


def test_pdcbo_is_deterministic():
    def run():
        st_ = _synthetic_state()
        out = []
        for z in synthetic.contexts(3, 30):
            theta, st_ = opt.pdcbo_step(st_, z, _observe)
            out.append((tuple(theta), st_.lam))
        return out
    assert run() == run()


def test_safeopt_all_safe_reduces_to_lcb_min():
    X = [(0.0, 0.5), (1.0, 0.5)]
    gj = model_1d(X, [1.0, 0.0])
    gg = model_1d(X, [-50.0, -50.0], prior=-50.0)
    st_ = state_with([[0.0], [0.5], [1.0]], gj, gg, thr=0.0)
    post = enumerate_posteriors(gj, st_.grid.points, 0.5)
    assert opt.safeopt_index(st_, 0.5) == int(np.argmin([m - 3 * s for m, s in post]))


def test_safeopt_no_safe_point_falls_back_to_min_ucb():
    X = [(0.0, 0.5), (1.0, 0.5)]
    gg = model_1d(X, [5.0, 3.0], prior=4.0)
    st_ = state_with([[0.0], [0.5], [1.0]], model_1d(), gg, thr=-10.0)
    post = enumerate_posteriors(gg, st_.grid.points, 0.5)
    assert opt.safeopt_index(st_, 0.5) == int(np.argmin([m + 3 * s for m, s in post]))


def test_safeopt_mixed_grid_matches_filter_and_argmin():
    X = [(0.0, 0.5), (0.35, 0.5), (0.7, 0.5), (1.0, 0.5)]
    gj = model_1d(X, [0.0, 0.2, 0.5, 1.0], noise=1e-6)
    gg = model_1d(X, [2.0, 1.0, 0.0, -1.0], noise=1e-6)
    pts = [[0.0], [0.35], [0.7], [1.0]]
    st_ = state_with(pts, gj, gg, thr=0.5)
    pj = enumerate_posteriors(gj, pts, 0.5)
    pg = enumerate_posteriors(gg, pts, 0.5)
    safe = [i for i, (m, s) in enumerate(pg) if m + 3 * s <= 0.5]
    assert safe == [2, 3]
    expected = min(safe, key=lambda i: pj[i][0] - 3 * pj[i][1])
    assert opt.safeopt_index(st_, 0.5) == expected
    theta, st_ = opt.safeopt_step(st_, 0.5, lambda th, z: (0.0, 0.0))
    assert theta == pts[expected] and len(st_.gp_con) == 5


def test_expected_improvement_zero_std():
    assert opt.expected_improvement([1.0, 3.0], [0.0, 0.0], 2.0) == pytest.approx([1.0, 0.0])


def test_cei_without_incumbent_is_feasibility():
    X = [(0.0, 0.5), (1.0, 0.5)]
    gg = model_1d(X, [10.0, -10.0], noise=1e-6)
    st_ = state_with([[0.0], [1.0]], model_1d(), gg, thr=0.0)
    assert opt.best_feasible(st_) is None
    assert opt.cei_step(st_, 0.5, lambda th, z: (0.0, 0.0))[0] == [1.0]


def test_cei_all_infeasible_collapses_to_first_point():
    X = [(x, 0.5) for x in (0.0, 0.5, 1.0)]
    gg = GpModel(SeKernelHyper(1.0, (0.3, 0.5)), 0.0, 0.0, [list(x) for x in X], [5.0, 5.0, 5.0])
    st_ = state_with([[0.0], [0.5], [1.0]], model_1d(), gg, thr=0.0)
    acq = opt.cei_acquisition(st_, 0.5)
    assert np.all(acq < 1e-12)
    assert int(np.argmax(acq)) == 0


def test_cei_matches_closed_form_three_points():
    X = [(0.1, 0.2), (0.7, 0.4), (0.4, 0.9)]
    gj = model_1d(X, [0.3, 1.1, 0.6])
    gg = model_1d(X, [0.9, 0.2, 0.5])
    pts = [[0.0], [0.5], [1.0]]
    st_ = state_with(pts, gj, gg, thr=0.55)
    assert opt.best_feasible(st_) == 0.6 or opt.best_feasible(st_) == 1.1
    best = min(o for o, c in zip([0.3, 1.1, 0.6], [0.9, 0.2, 0.5]) if c <= 0.55)
    pj = enumerate_posteriors(gj, pts, 0.5)
    pg = enumerate_posteriors(gg, pts, 0.5)
    expected = [cei_value(mj, sj, mg, sg, best, 0.55) for (mj, sj), (mg, sg) in zip(pj, pg)]
    assert opt.cei_acquisition(st_, 0.5) == pytest.approx(expected, abs=1e-9)


def test_fixed_step_passes_through():
    p = ControllerParams(1.0, 0.1, 23.0, 300.0)
    seen = []
    out = opt.fixed_step(p, "ctx", lambda th, z: seen.append((th, z)) or (1.5, 2.5))
    assert out == (1.5, 2.5) and seen == [(p, "ctx")]
