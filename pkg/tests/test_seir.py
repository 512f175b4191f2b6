import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from episens.errors import NonFiniteState
from episens.seir import (
    SeirParams,
    SeirState,
    cure_rate,
    derivatives,
    integrate,
    mortality_rate,
    total_confirmed,
)

TABLE_POST = dict(
    alpha=0.1098, beta=2.0, gamma_inv=14.2091, delta=0.375,
    lambda0=0.0167, lambda1=2.0, kappa0=0.0240, kappa1=0.0432,
)


def make_state(n_pop=60_360_000.0, e=0.0, i=0.0, q=0.0, r=0.0, d=0.0, p=0.0):
    s = n_pop - (p + e + i + q + r + d)
    return SeirState(s=s, p=p, e=e, i=i, q=q, r=r, d=d)


class TestRateLaws:
    def test_cure_rate_zero_at_t0(self):
        assert cure_rate(0.0437, 0.1161, 0.0) == 0.0

    def test_cure_rate_saturates_at_lambda0(self):
        assert cure_rate(0.0437, 0.1161, 1e9) == pytest.approx(0.0437, rel=1e-12)

    def test_cure_rate_closed_form(self):
        expected = 0.0437 * (1.0 - math.exp(-0.1161))
        assert cure_rate(0.0437, 0.1161, 1.0) == pytest.approx(expected, rel=1e-15)

    def test_cure_rate_monotone_bounded(self):
        t = np.linspace(0, 60, 121)
        values = np.array([cure_rate(0.0437, 0.1161, tk) for tk in t])
        assert np.all(np.diff(values) >= 0)
        assert np.all(values <= 0.0437)

    def test_mortality_rate_starts_at_kappa0(self):
        assert mortality_rate(0.0162, 0.0461, 0.0) == 0.0162

    def test_mortality_rate_zero_coefficient(self):
        assert mortality_rate(0.0, 0.5, 12.3) == 0.0

    def test_mortality_rate_closed_form(self):
        expected = 0.0162 * math.exp(-0.461)
        assert mortality_rate(0.0162, 0.0461, 10.0) == pytest.approx(expected, rel=1e-15)

    def test_mortality_rate_monotone_decreasing(self):
        values = [mortality_rate(0.0162, 0.0461, tk) for tk in range(0, 60)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestDerivatives:
    def test_no_flows_when_empty_and_unprotected(self):
        params = SeirParams(alpha=0.0, beta=0.5, gamma_inv=5.0, delta=0.3,
                            lambda0=0.1, lambda1=0.1, kappa0=0.01, kappa1=0.01)
        deriv = derivatives(make_state(params.n_pop), params, 3.0)
        assert deriv.as_tuple() == (0.0,) * 7

    def test_components_sum_to_zero(self):
        params = SeirParams(**TABLE_POST)
        state = make_state(params.n_pop, e=1e4, i=2e4, q=5e3, r=1e3, d=500)
        deriv = derivatives(state, params, 4.2)
        assert sum(deriv.as_tuple()) == pytest.approx(0.0, abs=1e-6)

    def test_hand_evaluated_rhs(self):
        # each term written out independently of the implementation
        n_pop = 60_010_000.0
        s, i = 6e7, 1e4
        params = SeirParams(**TABLE_POST, n_pop=n_pop)
        state = SeirState(s=s, p=0.0, e=0.0, i=i, q=0.0, r=0.0, d=0.0)
        infection = 2.0 * s * i / n_pop
        lam = 0.0167 * (1.0 - math.exp(-2.0 * 0.0))
        kap = 0.0240 * math.exp(-0.0432 * 0.0)
        expected = (
            -0.1098 * s - infection,
            0.1098 * s,
            infection - 0.0 / 14.2091,
            0.0 / 14.2091 - 0.375 * i,
            0.375 * i - (lam + kap) * 0.0,
            lam * 0.0,
            kap * 0.0,
        )
        deriv = derivatives(state, params, 0.0)
        assert deriv.as_tuple() == pytest.approx(expected, rel=1e-12)


class TestIntegrate:
    def test_zero_rates_constant_trajectory(self):
        # gamma = 1/gamma_inv cannot be exactly zero; a huge latent time
        # freezes the E compartment to within roundoff
        params = SeirParams(alpha=0.0, beta=0.0, gamma_inv=1e15, delta=0.0,
                            lambda0=0.0, lambda1=0.0, kappa0=0.0, kappa1=0.0,
                            n_pop=1000.0)
        init = SeirState(s=800.0, p=50.0, e=60.0, i=40.0, q=30.0, r=15.0, d=5.0)
        traj = integrate(params, init, np.arange(10.0))
        for name in ("s", "p", "e", "i", "q", "r", "d"):
            assert np.allclose(getattr(traj, name), getattr(init, name), rtol=0, atol=1e-9)

    def test_population_conserved(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        traj = integrate(params, init, np.arange(43.0))
        totals = traj.s + traj.p + traj.e + traj.i + traj.q + traj.r + traj.d
        assert np.max(np.abs(totals - params.n_pop)) <= 1e-6 * params.n_pop

    def test_monotone_sinks(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        traj = integrate(params, init, np.arange(43.0))
        for name in ("p", "r", "d"):
            assert np.all(np.diff(getattr(traj, name)) >= 0), name

    def test_non_negative_compartments(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        traj = integrate(params, init, np.arange(43.0))
        for name in ("s", "p", "e", "i", "q", "r", "d"):
            assert np.all(getattr(traj, name) >= 0.0), name

    def test_self_convergence_on_step_halving(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        coarse = integrate(params, init, np.arange(43.0), step=0.05)
        fine = integrate(params, init, np.arange(43.0), step=0.025)
        for name in ("s", "p", "e", "i", "q", "r", "d"):
            a, b = getattr(coarse, name), getattr(fine, name)
            scale = np.maximum(np.abs(b), 1.0)
            assert np.max(np.abs(a - b) / scale) < 1e-4, name

    def test_deterministic(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        a = integrate(params, init, np.arange(43.0))
        b = integrate(params, init, np.arange(43.0))
        assert np.array_equal(a.q, b.q)

    def test_grid_must_increase(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop)
        with pytest.raises(ValueError):
            integrate(params, init, [0.0, 2.0, 1.0])

    def test_mismatched_population_rejected(self):
        params = SeirParams(**TABLE_POST, n_pop=1000.0)
        init = SeirState(s=10.0, p=0, e=0, i=0, q=0, r=0, d=0)
        with pytest.raises(ValueError):
            integrate(params, init, np.arange(3.0))

    def test_blowup_raises_non_finite(self):
        # enormous step over stiff dynamics drives compartments negative
        params = SeirParams(alpha=0.0, beta=0.0, gamma_inv=1e-2, delta=40.0,
                            lambda0=0.0, lambda1=0.0, kappa0=0.0, kappa1=0.0,
                            n_pop=1000.0)
        init = SeirState(s=0.0, p=0.0, e=500.0, i=500.0, q=0.0, r=0.0, d=0.0)
        with pytest.raises(NonFiniteState):
            integrate(params, init, [0.0, 10.0], step=10.0)


class TestTotalConfirmed:
    def test_zero_when_qrd_empty(self):
        params = SeirParams(alpha=0.01, beta=0.0, gamma_inv=5.0, delta=0.0,
                            lambda0=0.0, lambda1=0.0, kappa0=0.0, kappa1=0.0,
                            n_pop=1000.0)
        init = SeirState(s=1000.0, p=0, e=0, i=0, q=0, r=0, d=0)
        traj = integrate(params, init, np.arange(5.0))
        assert np.allclose(total_confirmed(traj), 0.0)

    def test_componentwise_sum(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=100, i=100, q=50, r=20, d=5)
        traj = integrate(params, init, np.arange(4.0))
        assert np.array_equal(total_confirmed(traj), traj.q + traj.r + traj.d)

    def test_monotone_non_decreasing(self):
        params = SeirParams(**TABLE_POST)
        init = make_state(params.n_pop, e=8000, i=8000, q=7985, r=724, d=463)
        traj = integrate(params, init, np.arange(43.0))
        assert np.all(np.diff(total_confirmed(traj)) >= 0)


class TestValidation:
    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            SeirParams(alpha=-0.1, beta=1.0, gamma_inv=5.0, delta=0.3,
                       lambda0=0.1, lambda1=0.1, kappa0=0.01, kappa1=0.01)

    def test_zero_gamma_inv_rejected(self):
        with pytest.raises(ValueError):
            SeirParams(alpha=0.1, beta=1.0, gamma_inv=0.0, delta=0.3,
                       lambda0=0.1, lambda1=0.1, kappa0=0.01, kappa1=0.01)

    def test_negative_state_rejected(self):
        with pytest.raises(ValueError):
            SeirState(s=-1.0, p=0, e=0, i=0, q=0, r=0, d=0)


@settings(max_examples=25, deadline=None)
@given(
    alpha=st.floats(0.0, 0.2),
    beta=st.floats(0.0, 2.0),
    gamma_inv=st.floats(1.0, 20.0),
    delta=st.floats(0.0, 1.0),
    e0=st.floats(0.0, 1e5),
    i0=st.floats(0.0, 1e5),
)
def test_conservation_property(alpha, beta, gamma_inv, delta, e0, i0):
    params = SeirParams(alpha=alpha, beta=beta, gamma_inv=gamma_inv, delta=delta,
                        lambda0=0.05, lambda1=0.1, kappa0=0.02, kappa1=0.05,
                        n_pop=1e7)
    init = SeirState(s=1e7 - e0 - i0, p=0.0, e=e0, i=i0, q=0.0, r=0.0, d=0.0)
    traj = integrate(params, init, np.arange(15.0))
    totals = traj.s + traj.p + traj.e + traj.i + traj.q + traj.r + traj.d
    assert np.max(np.abs(totals - 1e7)) <= 1e-6 * 1e7
