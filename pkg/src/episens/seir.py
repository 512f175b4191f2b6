"""Generalized SEIR dynamics with protected and quarantined compartments.

Seven states: susceptible S, protected (insusceptible) P, exposed E,
infectious I, quarantined Q, recovered R, deceased D. Births and natural
deaths are excluded, so the total population is conserved. The recovery
rate rises toward a plateau, lambda(t) = lambda0*(1 - exp(-lambda1*t)),
while the mortality rate decays, kappa(t) = kappa0*exp(-kappa1*t), both
clocked from the start of the current regime's integration window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState

ITALY_POPULATION = 60_360_000.0  # ISTAT resident population, early 2020
DEFAULT_STEP = 0.05  # day
NEGATIVE_CLAMP_FRACTION = 1e-9  # roundoff undershoot tolerated per compartment
CONSERVATION_RTOL = 1e-6

_STATE_FIELDS = ("s", "p", "e", "i", "q", "r", "d")


@dataclass(frozen=True)
class SeirParams:
    """Rate parameters of one epidemic regime.

    alpha      protection rate S -> P [1/day]
    beta       infection rate [1/day]
    gamma_inv  average latent time E -> I [days]
    delta      quarantine rate I -> Q [1/day]
    lambda0, lambda1   recovery-rate coefficients [1/day each]
    kappa0, kappa1     mortality-rate coefficients [1/day each]
    n_pop      total population [individuals]
    """

    alpha: float
    beta: float
    gamma_inv: float
    delta: float
    lambda0: float
    lambda1: float
    kappa0: float
    kappa1: float
    n_pop: float = ITALY_POPULATION

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "delta", "lambda0", "lambda1", "kappa0", "kappa1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.gamma_inv <= 0:
            raise ValueError(f"gamma_inv must be > 0, got {self.gamma_inv}")
        if self.n_pop <= 0:
            raise ValueError(f"n_pop must be > 0, got {self.n_pop}")

    @property
    def gamma(self) -> float:
        return 1.0 / self.gamma_inv


@dataclass(frozen=True)
class SeirState:
    """Compartment populations at one instant."""

    s: float
    p: float
    e: float
    i: float
    q: float
    r: float
    d: float

    def __post_init__(self) -> None:
        for name in _STATE_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def total(self) -> float:
        return self.s + self.p + self.e + self.i + self.q + self.r + self.d

    def as_tuple(self) -> tuple[float, ...]:
        return (self.s, self.p, self.e, self.i, self.q, self.r, self.d)


@dataclass(frozen=True)
class SeirDerivative:
    """Time derivatives of the seven compartments."""

    s: float
    p: float
    e: float
    i: float
    q: float
    r: float
    d: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.s, self.p, self.e, self.i, self.q, self.r, self.d)


@dataclass(frozen=True)
class Trajectory:
    """Compartment series on an ordered time grid (days since window start)."""

    t: np.ndarray
    s: np.ndarray
    p: np.ndarray
    e: np.ndarray
    i: np.ndarray
    q: np.ndarray
    r: np.ndarray
    d: np.ndarray
    n_pop: float

    def __len__(self) -> int:
        return len(self.t)

    def state_at(self, index: int) -> SeirState:
        return SeirState(*(getattr(self, f)[index] for f in _STATE_FIELDS))

    def columns(self) -> dict[str, np.ndarray]:
        out = {"t": self.t}
        out.update({f: getattr(self, f) for f in _STATE_FIELDS})
        return out


def cure_rate(lambda0: float, lambda1: float, t: float) -> float:
    """Recovery rate lambda0*(1 - exp(-lambda1*t)); saturates at lambda0."""
    return lambda0 * (1.0 - math.exp(-lambda1 * t))


def mortality_rate(kappa0: float, kappa1: float, t: float) -> float:
    """Mortality rate kappa0*exp(-kappa1*t); decays from kappa0 toward zero."""
    return kappa0 * math.exp(-kappa1 * t)


def derivatives(state: SeirState, params: SeirParams, t: float) -> SeirDerivative:
    """Right-hand side of the ODE system at regime-relative time t.

    The seven components sum to zero (constant population).
    """
    d = _rhs(
        state.as_tuple(),
        t,
        params.alpha,
        params.beta,
        params.gamma,
        params.delta,
        params.lambda0,
        params.lambda1,
        params.kappa0,
        params.kappa1,
        1.0 / params.n_pop,
    )
    return SeirDerivative(*d)


def _rhs(y, t, alpha, beta, gamma, delta, l0, l1, k0, k1, inv_npop):
    s, p, e, i, q, r, d = y
    lam = l0 * (1.0 - math.exp(-l1 * t))
    kap = k0 * math.exp(-k1 * t)
    infection = beta * s * i * inv_npop
    return (
        -alpha * s - infection,
        alpha * s,
        infection - gamma * e,
        gamma * e - delta * i,
        delta * i - (lam + kap) * q,
        lam * q,
        kap * q,
    )


def _rk4_step(y, t, h, args):
    """One classical RK4 step, unrolled for speed (hot path of fitting)."""
    alpha, beta, gamma, delta, l0, l1, k0, k1c, inv_npop = args
    s, p, e, i, q, r, d = y
    h2 = 0.5 * h
    exp = math.exp
    lam_a = l0 * (1.0 - exp(-l1 * t))
    kap_a = k0 * exp(-k1c * t)
    lam_b = l0 * (1.0 - exp(-l1 * (t + h2)))
    kap_b = k0 * exp(-k1c * (t + h2))
    lam_c = l0 * (1.0 - exp(-l1 * (t + h)))
    kap_c = k0 * exp(-k1c * (t + h))

    inf1 = beta * s * i * inv_npop
    k1s = -alpha * s - inf1
    k1e = inf1 - gamma * e
    k1i = gamma * e - delta * i
    k1q = delta * i - (lam_a + kap_a) * q
    k1r = lam_a * q
    k1d = kap_a * q

    s2 = s + h2 * k1s
    e2 = e + h2 * k1e
    i2 = i + h2 * k1i
    q2 = q + h2 * k1q
    inf2 = beta * s2 * i2 * inv_npop
    k2s = -alpha * s2 - inf2
    k2e = inf2 - gamma * e2
    k2i = gamma * e2 - delta * i2
    k2q = delta * i2 - (lam_b + kap_b) * q2
    k2r = lam_b * q2
    k2d = kap_b * q2

    s3 = s + h2 * k2s
    e3 = e + h2 * k2e
    i3 = i + h2 * k2i
    q3 = q + h2 * k2q
    inf3 = beta * s3 * i3 * inv_npop
    k3s = -alpha * s3 - inf3
    k3e = inf3 - gamma * e3
    k3i = gamma * e3 - delta * i3
    k3q = delta * i3 - (lam_b + kap_b) * q3
    k3r = lam_b * q3
    k3d = kap_b * q3

    s4 = s + h * k3s
    e4 = e + h * k3e
    i4 = i + h * k3i
    q4 = q + h * k3q
    inf4 = beta * s4 * i4 * inv_npop
    k4s = -alpha * s4 - inf4
    k4e = inf4 - gamma * e4
    k4i = gamma * e4 - delta * i4
    k4q = delta * i4 - (lam_c + kap_c) * q4
    k4r = lam_c * q4
    k4d = kap_c * q4

    h6 = h / 6.0
    s_new = s + h6 * (k1s + 2.0 * (k2s + k3s) + k4s)
    e_new = e + h6 * (k1e + 2.0 * (k2e + k3e) + k4e)
    i_new = i + h6 * (k1i + 2.0 * (k2i + k3i) + k4i)
    q_new = q + h6 * (k1q + 2.0 * (k2q + k3q) + k4q)
    r_new = r + h6 * (k1r + 2.0 * (k2r + k3r) + k4r)
    d_new = d + h6 * (k1d + 2.0 * (k2d + k3d) + k4d)
    # P absorbs whatever leaves S through protection; integrate it directly
    p_new = p + h6 * (
        alpha * s + 2.0 * (alpha * s2 + alpha * s3) + alpha * s4
    )
    return (s_new, p_new, e_new, i_new, q_new, r_new, d_new)


def _check_sample(y, n_pop, where):
    """Clamp roundoff undershoot to zero; reject NaN/Inf and real blow-ups."""
    floor = -NEGATIVE_CLAMP_FRACTION * n_pop
    out = []
    for name, v in zip(_STATE_FIELDS, y):
        if not math.isfinite(v):
            raise NonFiniteState(f"compartment {name} is {v} at t={where}")
        if v < floor:
            raise NonFiniteState(
                f"compartment {name} = {v} at t={where}; step too large or invalid parameters"
            )
        out.append(v if v > 0.0 else 0.0)
    total = sum(out)
    if abs(total - n_pop) > CONSERVATION_RTOL * n_pop:
        raise NonFiniteState(
            f"population drifted to {total} (expected {n_pop}) at t={where}"
        )
    return out


def integrate(
    params: SeirParams,
    init: SeirState,
    t_grid,
    *,
    step: float = DEFAULT_STEP,
) -> Trajectory:
    """Integrate the system with fixed-step classical RK4.

    The grid must be strictly increasing; within each grid interval the
    integrator takes uniform substeps of at most ``step`` days that land
    exactly on the grid points, so results are bit-reproducible. The rate
    clock for lambda(t)/kappa(t) starts at zero at ``t_grid[0]``.

    Raises NonFiniteState if any compartment becomes NaN/Inf, goes negative
    beyond roundoff, or population conservation degrades past 1e-6 relative.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if len(t) > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("t_grid must be strictly increasing")
    if step <= 0:
        raise ValueError("step must be > 0")
    n_pop = params.n_pop
    if abs(init.total - n_pop) > CONSERVATION_RTOL * n_pop:
        raise ValueError(
            f"initial state sums to {init.total}, expected n_pop = {n_pop}"
        )

    args = (
        params.alpha,
        params.beta,
        params.gamma,
        params.delta,
        params.lambda0,
        params.lambda1,
        params.kappa0,
        params.kappa1,
        1.0 / n_pop,
    )
    out = np.empty((len(t), 7))
    y = init.as_tuple()
    out[0] = _check_sample(y, n_pop, t[0])
    for k in range(1, len(t)):
        span = t[k] - t[k - 1]
        n_sub = max(1, math.ceil(span / step - 1e-12))
        h = span / n_sub
        tau = t[k - 1] - t[0]
        for _ in range(n_sub):
            y = _rk4_step(y, tau, h, args)
            tau += h
        out[k] = _check_sample(y, n_pop, t[k])

    cols = dict(zip(_STATE_FIELDS, out.T))
    return Trajectory(t=t.copy(), n_pop=n_pop, **cols)


def total_confirmed(traj: Trajectory) -> np.ndarray:
    """Cumulative confirmed cases Q(t) + R(t) + D(t)."""
    return traj.q + traj.r + traj.d
