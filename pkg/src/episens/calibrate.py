"""Nonlinear least-squares calibration of the SEIR regime parameters.

The objective is the sum over the quarantined, recovered, and deceased
series of squared residuals between model and observation, each series
normalized by its maximum observed value so that the three series weigh
comparably despite differing by orders of magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .data import ObservedSeries
from .errors import (
    DegenerateSeries,
    InfeasibleBounds,
    LengthMismatch,
    NoConvergence,
    NonFiniteState,
)
from .seir import SeirParams, SeirState, integrate, total_confirmed

RATE_FIELDS = ("alpha", "beta", "gamma_inv", "delta", "lambda0", "lambda1", "kappa0", "kappa1")

DEFAULT_BOUNDS = {
    "alpha": (0.0, 1.0),
    "beta": (0.0, 2.0),
    "gamma_inv": (0.2, 30.0),
    "delta": (0.0, 2.0),
    "lambda0": (0.0, 2.0),
    "lambda1": (0.0, 2.0),
    "kappa0": (0.0, 1.0),
    "kappa1": (0.0, 1.0),
    "i0": (1.0, 1e6),
}


def r_squared(pred, obs) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot (SS_tot about mean of obs)."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if len(pred) != len(obs):
        raise LengthMismatch(f"pred has {len(pred)} points, obs has {len(obs)}")
    if len(obs) < 2:
        raise DegenerateSeries("need at least 2 points for R^2")
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateSeries("observed series is constant")
    ss_res = float(np.sum((obs - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def rmse(pred, obs) -> float:
    """Root mean squared error."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if len(pred) != len(obs):
        raise LengthMismatch(f"pred has {len(pred)} points, obs has {len(obs)}")
    if len(obs) == 0:
        raise LengthMismatch("series are empty")
    return float(np.sqrt(np.mean((obs - pred) ** 2)))


@dataclass(frozen=True)
class ParamBounds:
    """Per-parameter search intervals (rates plus the seeded i0)."""

    intervals: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )

    def validate(self) -> "ParamBounds":
        for name in (*RATE_FIELDS, "i0"):
            if name not in self.intervals:
                raise InfeasibleBounds(f"missing bounds for {name!r}")
            lo, hi = self.intervals[name]
            if not (lo <= hi):
                raise InfeasibleBounds(f"bounds for {name!r} are empty: [{lo}, {hi}]")
        return self

    def vectors(self, names) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.intervals[n][0] for n in names])
        hi = np.array([self.intervals[n][1] for n in names])
        return lo, hi


@dataclass(frozen=True)
class InitPolicy:
    """How the initial state of a fitting window is seeded.

    Mode ``from-data``: Q(0), R(0), D(0) are read from the first
    observation, E(0) = I(0) = i0 (exposed seeded equal to infectious),
    P(0) = 0, and S(0) absorbs the remainder of the population. ``i0`` is
    the starting guess; with ``fit_i0`` it is optimized alongside the rates.
    """

    i0: float = 100.0
    fit_i0: bool = True
    mode: str = "from-data"

    def __post_init__(self) -> None:
        if self.mode != "from-data":
            raise ValueError(f"unknown init policy mode {self.mode!r}")
        if self.i0 <= 0:
            raise ValueError("i0 must be > 0")


def build_initial_state(obs: ObservedSeries, i0: float, n_pop: float) -> SeirState:
    """Seed the window's initial state from its first observation."""
    q0 = float(obs.quarantined[0])
    r0 = float(obs.recovered[0])
    d0 = float(obs.deceased[0])
    s0 = n_pop - q0 - r0 - d0 - 2.0 * i0
    if s0 < 0:
        raise ValueError("i0 too large for the population")
    return SeirState(s=s0, p=0.0, e=i0, i=i0, q=q0, r=r0, d=d0)


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with goodness-of-fit diagnostics."""

    params: SeirParams
    init: SeirState
    i0: float
    r2_quarantined: float
    r2_recovered: float
    r2_deceased: float
    r2_avg: float
    r2_total: float
    rmse_total: float
    objective: float
    n_evals: int
    converged: bool

    def r2_by_series(self) -> dict[str, float]:
        return {
            "quarantined": self.r2_quarantined,
            "recovered": self.r2_recovered,
            "deceased": self.r2_deceased,
        }


def _safe_r2(pred, obs) -> float:
    try:
        return r_squared(pred, obs)
    except DegenerateSeries:
        return float("nan")


def fit(
    obs: ObservedSeries,
    guess: SeirParams,
    bounds: ParamBounds | None = None,
    init_policy: InitPolicy | None = None,
    *,
    n_starts: int = 5,
    jitter: float = 0.1,
    seed: int = 0,
    step: float = 0.05,
    ftol: float = 1e-9,
    max_nfev: int = 2000,
) -> FitResult:
    """Fit one regime's parameters to an observation window.

    Runs a bounded trust-region least-squares solve (finite-difference
    Jacobian, no analytic gradients) from ``n_starts`` starting points:
    the guess itself plus ``n_starts - 1`` multiplicatively jittered
    copies with fixed sub-seeds. The best run wins, ties broken by start
    index, so results are deterministic for identical inputs.

    Raises NoConvergence when the window is shorter than the number of
    free parameters, and InfeasibleBounds when the guess is outside the
    bounds. An iteration-capped solve does not raise; the result is
    returned with ``converged=False``.
    """
    bounds = (bounds or ParamBounds()).validate()
    policy = init_policy or InitPolicy()
    names = list(RATE_FIELDS) + (["i0"] if policy.fit_i0 else [])
    if len(obs) < len(names):
        raise NoConvergence(
            f"window of {len(obs)} days cannot determine {len(names)} parameters"
        )
    lo, hi = bounds.vectors(names)
    theta0 = np.array([getattr(guess, n) for n in RATE_FIELDS] + ([policy.i0] if policy.fit_i0 else []))
    if np.any(theta0 < lo) or np.any(theta0 > hi):
        bad = [n for n, v, a, b in zip(names, theta0, lo, hi) if not (a <= v <= b)]
        raise InfeasibleBounds(f"guess outside bounds for {bad}")

    n_pop = guess.n_pop
    t_grid = np.arange(len(obs), dtype=float)
    targets = (
        obs.quarantined.astype(float),
        obs.recovered.astype(float),
        obs.deceased.astype(float),
    )
    scales = tuple(max(float(np.max(series)), 1.0) for series in targets)
    traj_fields = ("q", "r", "d")

    def unpack(theta):
        params = replace(
            guess, **{n: float(v) for n, v in zip(RATE_FIELDS, theta[: len(RATE_FIELDS)])}
        )
        i0 = float(theta[len(RATE_FIELDS)]) if policy.fit_i0 else policy.i0
        return params, i0

    def residuals(theta):
        params, i0 = unpack(theta)
        try:
            traj = integrate(params, build_initial_state(obs, i0, n_pop), t_grid, step=step)
        except (NonFiniteState, ValueError):
            return np.full(3 * len(obs), 1e6)
        blocks = [
            (getattr(traj, f) - target) / scale
            for f, target, scale in zip(traj_fields, targets, scales)
        ]
        return np.concatenate(blocks)

    rng = np.random.default_rng(seed)
    starts = [theta0]
    for _ in range(max(0, n_starts - 1)):
        wobble = 1.0 + rng.uniform(-jitter, jitter, size=len(theta0))
        starts.append(np.clip(theta0 * wobble, lo, hi))

    best = None
    n_evals = 0
    for idx, start in enumerate(starts):
        res = least_squares(
            residuals,
            start,
            bounds=(lo, hi),
            method="trf",
            ftol=ftol,
            xtol=ftol,
            max_nfev=max_nfev,
        )
        n_evals += res.nfev
        key = (res.cost, idx)
        if best is None or key < best[0]:
            best = (key, res)
    res = best[1]

    params, i0 = unpack(res.x)
    init = build_initial_state(obs, i0, n_pop)
    traj = integrate(params, init, t_grid, step=step)
    r2s = {
        f: _safe_r2(getattr(traj, f), target)
        for f, target in zip(traj_fields, targets)
    }
    pred_total = total_confirmed(traj)
    obs_total = obs.total_confirmed.astype(float)
    return FitResult(
        params=params,
        init=init,
        i0=i0,
        r2_quarantined=r2s["q"],
        r2_recovered=r2s["r"],
        r2_deceased=r2s["d"],
        r2_avg=float(np.nanmean(list(r2s.values()))),
        r2_total=_safe_r2(pred_total, obs_total),
        rmse_total=rmse(pred_total, obs_total),
        objective=float(2.0 * res.cost),
        n_evals=int(n_evals),
        converged=bool(res.status > 0),
    )
