"""Two-regime simulations with a configurable effective-intervention day."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace

import numpy as np

from .calibrate import r_squared, rmse
from .data import ObservedSeries, slice_window
from .seir import SeirParams, SeirState, Trajectory, integrate, total_confirmed


@dataclass(frozen=True)
class TwoRegimeConfig:
    """Pre/post regime parameters around one intervention switch.

    The simulation starts on ``start_day`` from ``init`` and switches from
    ``pre`` to ``post`` dynamics at ``issuance_day + delay_days``. The rate
    clocks of lambda(t)/kappa(t) restart at zero at the switch, because each
    regime's coefficients are fitted with time measured from its own window
    start.
    """

    pre: SeirParams
    post: SeirParams
    start_day: dt.date
    issuance_day: dt.date
    delay_days: int
    horizon_end: dt.date
    init: SeirState

    def __post_init__(self) -> None:
        if self.delay_days < 0:
            raise ValueError("delay_days must be >= 0")
        if self.issuance_day < self.start_day:
            raise ValueError("issuance_day before start_day")
        if self.issuance_day + dt.timedelta(days=self.delay_days) > self.horizon_end:
            raise ValueError("issuance_day + delay_days beyond horizon_end")

    @property
    def switch_offset(self) -> int:
        """Days from start_day to the effective intervention."""
        return (self.issuance_day - self.start_day).days + self.delay_days

    @property
    def horizon_offset(self) -> int:
        return (self.horizon_end - self.start_day).days


@dataclass(frozen=True)
class DelaySweepRow:
    delay_days: int
    r2: float
    rmse: float


def simulate_two_regime(cfg: TwoRegimeConfig, *, step: float = 0.05) -> Trajectory:
    """Integrate pre dynamics up to the switch, post dynamics afterwards.

    Output is sampled on the integer-day grid 0..horizon; the state at the
    switch day is shared by both regimes, so the trajectory is continuous.
    """
    t_switch = cfg.switch_offset
    t_end = cfg.horizon_offset
    if t_switch == 0:
        return integrate(cfg.post, cfg.init, np.arange(t_end + 1.0), step=step)
    first = integrate(cfg.pre, cfg.init, np.arange(t_switch + 1.0), step=step)
    if t_switch == t_end:
        return first
    second = integrate(
        cfg.post,
        first.state_at(t_switch),
        np.arange(t_switch, t_end + 1.0),
        step=step,
    )
    cols = {
        f: np.concatenate([getattr(first, f), getattr(second, f)[1:]])
        for f in ("s", "p", "e", "i", "q", "r", "d")
    }
    return Trajectory(t=np.arange(t_end + 1.0), n_pop=cfg.init.total, **cols)


def delay_sweep(
    cfg_base: TwoRegimeConfig,
    delays,
    obs: ObservedSeries,
    *,
    step: float = 0.05,
) -> list[DelaySweepRow]:
    """Score total-confirmed fit quality for each candidate delay.

    Each delay reuses the fixed pre/post parameter sets (no refitting); the
    R^2 and RMSE compare the simulated cumulative confirmed series against
    the observations over the full start..horizon window.
    """
    window = slice_window(obs, cfg_base.start_day, cfg_base.horizon_end)
    target = window.total_confirmed.astype(float)
    rows = []
    for delay in delays:
        traj = simulate_two_regime(replace(cfg_base, delay_days=int(delay)), step=step)
        pred = total_confirmed(traj)
        rows.append(
            DelaySweepRow(
                delay_days=int(delay),
                r2=r_squared(pred, target),
                rmse=rmse(pred, target),
            )
        )
    return rows
