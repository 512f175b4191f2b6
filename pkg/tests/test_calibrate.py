import datetime as dt
import math

import numpy as np
import pytest

from episens.calibrate import (
    DEFAULT_BOUNDS,
    InitPolicy,
    ParamBounds,
    build_initial_state,
    fit,
    r_squared,
    rmse,
)
from episens.data import ObservedSeries
from episens.errors import (
    DegenerateSeries,
    InfeasibleBounds,
    LengthMismatch,
    NoConvergence,
)
from episens.seir import SeirParams, SeirState, integrate


class TestRSquared:
    def test_perfect_fit(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_mean_predictor_scores_zero(self):
        obs = np.array([1.0, 2.0, 3.0])
        pred = np.full(3, obs.mean())
        assert r_squared(pred, obs) == pytest.approx(0.0, abs=1e-15)

    def test_hand_computed_value(self):
        # ss_res = (3-4)^2 = 1, ss_tot = 1 + 0 + 1 = 2
        assert r_squared([1.0, 2.0, 4.0], [1.0, 2.0, 3.0]) == pytest.approx(0.5)

    def test_constant_obs_degenerate(self):
        with pytest.raises(DegenerateSeries):
            r_squared([1.0, 2.0], [5.0, 5.0])

    def test_too_short(self):
        with pytest.raises(DegenerateSeries):
            r_squared([1.0], [1.0])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            r_squared([1.0, 2.0], [1.0, 2.0, 3.0])


class TestRmse:
    def test_zero_for_identical(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_residual(self):
        assert rmse([3.0, 3.0, 3.0], [1.0, 1.0, 1.0]) == pytest.approx(2.0)

    def test_hand_computed(self):
        assert rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(math.sqrt(12.5))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            rmse([1.0], [1.0, 2.0])


TRUTH = SeirParams(
    alpha=0.08, beta=1.6, gamma_inv=10.0, delta=0.45,
    lambda0=0.03, lambda1=0.4, kappa0=0.02, kappa1=0.05,
    n_pop=60_360_000.0,
)


def synthetic_observations(params: SeirParams, i0: float, days: int) -> ObservedSeries:
    init = SeirState(
        s=params.n_pop - 3000.0 - 50.0 - 10.0 - 2 * i0,
        p=0.0, e=i0, i=i0, q=3000.0, r=50.0, d=10.0,
    )
    traj = integrate(params, init, np.arange(float(days)))
    q = np.round(traj.q).astype(np.int64)
    r = np.round(traj.r).astype(np.int64)
    d = np.round(traj.d).astype(np.int64)
    start = dt.date(2020, 3, 1)
    return ObservedSeries(
        dates=tuple(start + dt.timedelta(days=k) for k in range(days)),
        quarantined=q,
        recovered=r,
        deceased=d,
        total_confirmed=q + r + d,
    ).validate()


class TestFit:
    def test_generate_then_fit_recovers_parameters(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=40)
        rng = np.random.default_rng(3)
        jitter = 1.0 + rng.uniform(-0.2, 0.2, size=8)
        guess = SeirParams(
            alpha=TRUTH.alpha * jitter[0],
            beta=TRUTH.beta * jitter[1],
            gamma_inv=TRUTH.gamma_inv * jitter[2],
            delta=TRUTH.delta * jitter[3],
            lambda0=TRUTH.lambda0 * jitter[4],
            lambda1=TRUTH.lambda1 * jitter[5],
            kappa0=TRUTH.kappa0 * jitter[6],
            kappa1=TRUTH.kappa1 * jitter[7],
            n_pop=TRUTH.n_pop,
        )
        result = fit(obs, guess, init_policy=InitPolicy(i0=4000.0, fit_i0=False), n_starts=1)
        assert result.r2_avg > 0.9999
        for name in ("alpha", "beta", "gamma_inv", "delta", "lambda0", "lambda1", "kappa0", "kappa1"):
            fitted = getattr(result.params, name)
            truth = getattr(TRUTH, name)
            assert fitted == pytest.approx(truth, rel=0.01), name

    def test_fit_with_free_i0_recovers_seed(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=40)
        result = fit(
            obs, TRUTH,
            init_policy=InitPolicy(i0=3500.0, fit_i0=True),
            n_starts=1,
        )
        assert result.i0 == pytest.approx(4000.0, rel=0.05)
        assert result.r2_avg > 0.9999

    def test_window_shorter_than_free_parameters(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=5)
        with pytest.raises(NoConvergence):
            fit(obs, TRUTH, init_policy=InitPolicy(i0=4000.0, fit_i0=False))

    def test_guess_outside_bounds(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=20)
        bounds = ParamBounds({**DEFAULT_BOUNDS, "beta": (0.0, 1.0)})
        with pytest.raises(InfeasibleBounds):
            fit(obs, TRUTH, bounds, InitPolicy(i0=4000.0, fit_i0=False))

    def test_empty_bounds_rejected(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=20)
        bounds = ParamBounds({**DEFAULT_BOUNDS, "beta": (2.0, 1.0)})
        with pytest.raises(InfeasibleBounds):
            fit(obs, TRUTH, bounds, InitPolicy(i0=4000.0, fit_i0=False))

    def test_fitted_params_within_bounds(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=30)
        bounds = ParamBounds()
        result = fit(obs, TRUTH, bounds, InitPolicy(i0=4000.0, fit_i0=False), n_starts=2)
        for name in ("alpha", "beta", "gamma_inv", "delta", "lambda0", "lambda1", "kappa0", "kappa1"):
            lo, hi = bounds.intervals[name]
            assert lo <= getattr(result.params, name) <= hi, name

    def test_deterministic_given_inputs(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=25)
        kwargs = dict(init_policy=InitPolicy(i0=3800.0, fit_i0=False), n_starts=3, seed=11)
        a = fit(obs, TRUTH, **kwargs)
        b = fit(obs, TRUTH, **kwargs)
        assert a.params == b.params
        assert a.objective == b.objective

    def test_objective_not_worse_than_guess(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=25)
        guess = SeirParams(alpha=0.05, beta=1.2, gamma_inv=8.0, delta=0.5,
                           lambda0=0.05, lambda1=0.3, kappa0=0.03, kappa1=0.04,
                           n_pop=TRUTH.n_pop)
        result = fit(obs, guess, init_policy=InitPolicy(i0=4000.0, fit_i0=False), n_starts=1)
        assert result.converged
        assert result.r2_avg > 0.99


class TestInitPolicy:
    def test_from_data_seeding(self):
        obs = synthetic_observations(TRUTH, i0=4000.0, days=10)
        state = build_initial_state(obs, 123.0, TRUTH.n_pop)
        assert state.e == state.i == 123.0
        assert state.p == 0.0
        assert state.q == obs.quarantined[0]
        assert state.r == obs.recovered[0]
        assert state.d == obs.deceased[0]
        assert state.total == pytest.approx(TRUTH.n_pop)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            InitPolicy(i0=10.0, mode="guessing")


class TestRealWindows:
    def test_post_window_quality_and_table_proximity(self, post_fit):
        assert post_fit.converged
        assert post_fit.r2_avg >= 0.99
        published = {"alpha": 0.1098, "beta": 2.0, "gamma_inv": 14.2091, "delta": 0.375}
        for name, value in published.items():
            assert getattr(post_fit.params, name) == pytest.approx(value, rel=0.25), name

    def test_pre_window_quality(self, pre_fit):
        assert pre_fit.converged
        assert pre_fit.r2_avg >= 0.93
