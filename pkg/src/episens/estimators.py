"""Scikit-learn compatible estimator wrappers.

``SeirCalibrator`` exposes regime fitting as a fit/predict estimator and
``GivenDataSensitivityAnalyzer`` exposes the given-data sensitivity
measures as a fit(X, y) analyzer, so both compose with sklearn tooling
(get_params/set_params, clone, pipelines).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import calibrate, gsa
from .data import ObservedSeries
from .seir import ITALY_POPULATION, SeirParams, integrate, total_confirmed
from .validation import check_aligned


class SeirCalibrator(BaseEstimator):
    """Fit one epidemic regime to an observation window.

    Parameters mirror :func:`episens.calibrate.fit`; the observation
    window is the ``X`` of :meth:`fit`. After fitting, the estimated
    ``SeirParams`` are in ``params_`` and the goodness-of-fit metrics in
    ``result_``.
    """

    def __init__(
        self,
        guess: SeirParams | None = None,
        bounds: calibrate.ParamBounds | None = None,
        init_policy: calibrate.InitPolicy | None = None,
        n_starts: int = 5,
        jitter: float = 0.1,
        seed: int = 0,
        step: float = 0.05,
        n_pop: float = ITALY_POPULATION,
    ):
        self.guess = guess
        self.bounds = bounds
        self.init_policy = init_policy
        self.n_starts = n_starts
        self.jitter = jitter
        self.seed = seed
        self.step = step
        self.n_pop = n_pop

    def _default_guess(self) -> SeirParams:
        return SeirParams(
            alpha=0.05,
            beta=1.0,
            gamma_inv=5.0,
            delta=0.5,
            lambda0=0.05,
            lambda1=0.05,
            kappa0=0.02,
            kappa1=0.05,
            n_pop=self.n_pop,
        )

    def fit(self, X: ObservedSeries, y=None) -> "SeirCalibrator":
        """Fit the regime parameters to the observation window ``X``."""
        if not isinstance(X, ObservedSeries):
            raise TypeError("X must be an ObservedSeries")
        policy = self.init_policy or calibrate.InitPolicy(
            i0=float(X.total_confirmed[0]), fit_i0=False
        )
        result = calibrate.fit(
            X,
            self.guess or self._default_guess(),
            self.bounds,
            policy,
            n_starts=self.n_starts,
            jitter=self.jitter,
            seed=self.seed,
            step=self.step,
        )
        self.result_ = result
        self.params_ = result.params
        self.init_ = result.init
        self.r2_avg_ = result.r2_avg
        self.n_days_ = len(X)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before using this estimator")

    def predict(self, X) -> np.ndarray:
        """Cumulative confirmed cases at day offsets ``X`` (days from window start)."""
        self._check_fitted()
        t = np.asarray(X, dtype=float).ravel()
        order = np.argsort(t)
        grid = t[order]
        if len(grid) == 0:
            return np.array([])
        if grid[0] > 0.0:
            grid = np.concatenate([[0.0], grid])
            added = 1
        else:
            added = 0
        traj = integrate(self.params_, self.init_, grid, step=self.step)
        totals = total_confirmed(traj)[added:]
        out = np.empty_like(totals)
        out[order] = totals
        return out

    def score(self, X: ObservedSeries, y=None) -> float:
        """Average R^2 over the quarantined/recovered/deceased series of ``X``."""
        self._check_fitted()
        t = np.arange(len(X), dtype=float)
        traj = integrate(self.params_, self.init_, t, step=self.step)
        r2s = [
            calibrate.r_squared(series, target)
            for series, target in (
                (traj.q, X.quarantined),
                (traj.r, X.recovered),
                (traj.d, X.deceased),
            )
        ]
        return float(np.mean(r2s))


class GivenDataSensitivityAnalyzer(BaseEstimator):
    """Given-data sensitivity measures of y with respect to each column of X.

    After :meth:`fit`: ``first_order_`` and ``kuiper_`` hold the per-factor
    indices, ``curves_`` the bin-conditional regression curves, and
    ``ranking_`` the factor order by first-order importance.
    """

    def __init__(self, m_bins: int = 50, factor_names: tuple[str, ...] | None = None):
        self.m_bins = m_bins
        self.factor_names = factor_names

    def fit(self, X, y) -> "GivenDataSensitivityAnalyzer":
        X, y = check_aligned(X, y)
        d = X.shape[1]
        names = tuple(self.factor_names) if self.factor_names else tuple(
            f"x{j}" for j in range(d)
        )
        if len(names) != d:
            raise ValueError(f"expected {d} factor names, got {len(names)}")
        self.n_features_in_ = d
        self.feature_names_ = names
        self.first_order_ = np.array(
            [gsa.first_order_given_data(X[:, j], y, self.m_bins) for j in range(d)]
        )
        self.kuiper_ = np.array(
            [gsa.kuiper_beta(X[:, j], y, self.m_bins) for j in range(d)]
        )
        self.curves_ = tuple(
            gsa.conditional_regression(X[:, j], y, self.m_bins, factor_name=names[j])
            for j in range(d)
        )
        order = np.lexsort((names, -self.first_order_))
        self.ranking_ = tuple(names[k] for k in order)
        return self

    def _check_fitted(self):
        if not hasattr(self, "first_order_"):
            raise NotFittedError("call fit before using this estimator")

    def transform(self, X) -> np.ndarray:
        """Project columns of ``X`` onto their conditional-mean curves."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} columns")
        out = np.empty_like(X)
        for j, curve in enumerate(self.curves_):
            idx = np.clip(
                np.searchsorted(curve.centers, X[:, j]), 0, len(curve.centers) - 1
            )
            out[:, j] = curve.means[idx]
        return out
