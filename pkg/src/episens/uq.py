"""Monte Carlo uncertainty propagation through the two-regime model.

Sampling is counter-based: every row's draws come from a fixed number of
Philox blocks addressed by (seed, row index), so any chunking of the work,
across threads or across separate calls, reproduces bit-identical samples.
The ensemble evaluator integrates all rows simultaneously with a vectorized
fixed-step RK4, grouping rows by their effective intervention day.
"""

from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySample, EmptySupport, FailureRateExceeded
from .scenario import TwoRegimeConfig
from .seir import CONSERVATION_RTOL, NEGATIVE_CLAMP_FRACTION, SeirParams

SEIR_FACTOR_NAMES = ("alpha", "beta", "gamma_inv", "delta", "i0", "intervention_day")

_DRAWS_PER_ROW = 8  # two Philox blocks; first len(factors) draws are used
_FAILURE_RATE_LIMIT = 1e-3


@dataclass(frozen=True)
class FactorSpec:
    """Marginal distribution of one factor: continuous or integer uniform."""

    kind: str  # "uniform" | "integers"
    low: float
    high: float

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "integers"):
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "integers":
            if self.low != int(self.low) or self.high != int(self.high):
                raise EmptySupport(f"integer support must have integer bounds: {self}")
        if self.low > self.high:
            raise EmptySupport(f"empty support [{self.low}, {self.high}]")

    def map_uniform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return self.low + u * (self.high - self.low)
        count = int(self.high) - int(self.low) + 1
        return self.low + np.minimum(np.floor(u * count), count - 1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        ok = (x >= self.low) & (x <= self.high)
        if self.kind == "integers":
            ok &= x == np.floor(x)
        return ok


@dataclass(frozen=True)
class InputDistributionSpec:
    """Independent product of per-factor marginals."""

    names: tuple[str, ...]
    factors: tuple[FactorSpec, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.factors):
            raise ValueError("names and factors must align")
        if len(self.names) == 0:
            raise EmptySupport("no factors")
        if len(self.names) != len(set(self.names)):
            raise ValueError("factor names must be unique")

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def factor(self, name: str) -> FactorSpec:
        return self.factors[self.names.index(name)]


def seir_factor_spec(
    post: SeirParams,
    i0_base: float,
    *,
    alpha_rel: float = 0.10,
    beta_rel: float = 0.10,
    gamma_inv_rel: float = 0.10,
    delta_rel: float = 0.30,
    i0_rel: float = 0.20,
    max_delay_days: int = 7,
) -> InputDistributionSpec:
    """The six uncertain factors around the after-intervention regime.

    Continuous factors are uniform on the baseline value +/- the given
    relative width; i0 is a discrete uniform over the integers within its
    relative band; intervention_day is a discrete uniform over delays
    0..max_delay_days after the issuance date.
    """
    def band(center: float, rel: float) -> FactorSpec:
        return FactorSpec("uniform", center * (1.0 - rel), center * (1.0 + rel))

    i0_low = math.ceil((1.0 - i0_rel) * i0_base)
    i0_high = math.floor((1.0 + i0_rel) * i0_base)
    if i0_high < i0_low:  # very small i0: fall back to the rounded center
        i0_low = i0_high = round(i0_base)
    return InputDistributionSpec(
        names=SEIR_FACTOR_NAMES,
        factors=(
            band(post.alpha, alpha_rel),
            band(post.beta, beta_rel),
            band(post.gamma_inv, gamma_inv_rel),
            band(post.delta, delta_rel),
            FactorSpec("integers", float(i0_low), float(i0_high)),
            FactorSpec("integers", 0.0, float(max_delay_days)),
        ),
    )


@dataclass(frozen=True)
class InputSample:
    """N x d factor matrix plus the spec and seed that produced it."""

    matrix: np.ndarray
    spec: InputDistributionSpec
    seed: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.spec.names.index(name)]

    def validate(self) -> "InputSample":
        for j, factor in enumerate(self.spec.factors):
            if not np.all(factor.contains(self.matrix[:, j])):
                raise ValueError(f"column {self.spec.names[j]!r} leaves its support")
        return self


@dataclass(frozen=True)
class OutputSample:
    """Model outputs aligned row-for-row with an InputSample."""

    values: np.ndarray
    failed: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def valid_values(self) -> np.ndarray:
        return self.values[~self.failed]


def row_uniforms(seed: int, row0: int, n_rows: int) -> np.ndarray:
    """Uniform draws for rows [row0, row0+n_rows): shape (n_rows, 8).

    Row k's draws depend only on (seed, k); any partition of the row range
    reproduces the same values.
    """
    bg = np.random.Philox(key=np.uint64(seed))
    bg.advance(row0 * (_DRAWS_PER_ROW // 4))
    return np.random.Generator(bg).random((n_rows, _DRAWS_PER_ROW))


def sample_inputs(spec: InputDistributionSpec, n: int, seed: int) -> InputSample:
    """Draw n i.i.d. rows from the product measure, bit-reproducibly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.n_factors > _DRAWS_PER_ROW:
        raise ValueError(f"at most {_DRAWS_PER_ROW} factors supported")
    u = row_uniforms(seed, 0, n)
    matrix = np.empty((n, spec.n_factors))
    for j, factor in enumerate(spec.factors):
        matrix[:, j] = factor.map_uniform(u[:, j])
    return InputSample(matrix=matrix, spec=spec, seed=seed).validate()


# -- vectorized two-regime evaluation ----------------------------------------


def _batch_rhs(s, p, e, i, q, alpha, bn, gamma, delta, lam_kap, lam, kap):
    infection = bn * s * i
    ds = -alpha * s - infection
    dp = alpha * s
    de = infection - gamma * e
    di = gamma * e - delta * i
    dq = delta * i - lam_kap * q
    dr = lam * q
    dd = kap * q
    return ds, dp, de, di, dq, dr, dd


def _batch_phase(state, params: dict, n_days: int, step: float):
    """Advance all rows n_days with RK4; rate clock starts at 0."""
    s, p, e, i, q, r, d = state
    alpha = params["alpha"]
    bn = params["beta"] * (1.0 / params["n_pop"])
    gamma = 1.0 / params["gamma_inv"]
    delta = params["delta"]
    l0, l1 = params["lambda0"], params["lambda1"]
    k0, k1 = params["kappa0"], params["kappa1"]
    n_sub = max(1, math.ceil(1.0 / step - 1e-12))
    h = 1.0 / n_sub
    h2 = 0.5 * h
    h6 = h / 6.0
    for day in range(n_days):
        tau = float(day)  # re-anchor the rate clock exactly on day boundaries
        for _ in range(n_sub):
            lam_a = l0 * (1.0 - math.exp(-l1 * tau))
            kap_a = k0 * math.exp(-k1 * tau)
            lam_b = l0 * (1.0 - math.exp(-l1 * (tau + h2)))
            kap_b = k0 * math.exp(-k1 * (tau + h2))
            lam_c = l0 * (1.0 - math.exp(-l1 * (tau + h)))
            kap_c = k0 * math.exp(-k1 * (tau + h))
            k1s = _batch_rhs(s, p, e, i, q, alpha, bn, gamma, delta, lam_a + kap_a, lam_a, kap_a)
            y2 = (s + h2 * k1s[0], p + h2 * k1s[1], e + h2 * k1s[2], i + h2 * k1s[3], q + h2 * k1s[4])
            k2s = _batch_rhs(*y2, alpha, bn, gamma, delta, lam_b + kap_b, lam_b, kap_b)
            y3 = (s + h2 * k2s[0], p + h2 * k2s[1], e + h2 * k2s[2], i + h2 * k2s[3], q + h2 * k2s[4])
            k3s = _batch_rhs(*y3, alpha, bn, gamma, delta, lam_b + kap_b, lam_b, kap_b)
            y4 = (s + h * k3s[0], p + h * k3s[1], e + h * k3s[2], i + h * k3s[3], q + h * k3s[4])
            k4s = _batch_rhs(*y4, alpha, bn, gamma, delta, lam_c + kap_c, lam_c, kap_c)
            s = s + h6 * (k1s[0] + 2.0 * (k2s[0] + k3s[0]) + k4s[0])
            p = p + h6 * (k1s[1] + 2.0 * (k2s[1] + k3s[1]) + k4s[1])
            e = e + h6 * (k1s[2] + 2.0 * (k2s[2] + k3s[2]) + k4s[2])
            i = i + h6 * (k1s[3] + 2.0 * (k2s[3] + k3s[3]) + k4s[3])
            q = q + h6 * (k1s[4] + 2.0 * (k2s[4] + k3s[4]) + k4s[4])
            r = r + h6 * (k1s[5] + 2.0 * (k2s[5] + k3s[5]) + k4s[5])
            d = d + h6 * (k1s[6] + 2.0 * (k2s[6] + k3s[6]) + k4s[6])
            tau += h
    return s, p, e, i, q, r, d


def _params_dict(params: SeirParams) -> dict:
    return {
        "alpha": params.alpha,
        "beta": params.beta,
        "gamma_inv": params.gamma_inv,
        "delta": params.delta,
        "lambda0": params.lambda0,
        "lambda1": params.lambda1,
        "kappa0": params.kappa0,
        "kappa1": params.kappa1,
        "n_pop": params.n_pop,
    }


def _evaluate_chunk(
    columns: dict[str, np.ndarray],
    n_rows: int,
    base: TwoRegimeConfig,
    t_end: int,
    step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Totals at t_end for one chunk of factor rows (row-independent math)."""
    m = n_rows
    n_pop = base.post.n_pop
    q0, r0, d0, p0 = base.init.q, base.init.r, base.init.d, base.init.p
    if "i0" in columns:
        e0 = columns["i0"].astype(float)
        i_init = e0  # exposed seeded equal to infectious
    else:
        e0 = np.full(m, base.init.e)
        i_init = np.full(m, base.init.i)
    s0 = n_pop - p0 - q0 - r0 - d0 - e0 - i_init

    delays = columns.get("intervention_day", np.full(m, base.delay_days))
    if np.any(delays != np.floor(delays)):
        raise ValueError("intervention_day values must be whole days")
    switch = (base.issuance_day - base.start_day).days + delays.astype(int)
    if np.any(switch < 0) or np.any(switch > t_end):
        raise ValueError("intervention day outside the simulation window")

    post = _params_dict(base.post)
    for name in ("alpha", "beta", "gamma_inv", "delta"):
        if name in columns:
            post = {**post, name: columns[name]}
    pre = _params_dict(base.pre)

    totals = np.full(m, np.nan)
    failed = s0 < 0.0  # i0 larger than the population leaves nothing susceptible
    for sw in np.unique(switch[~failed]):
        idx = np.nonzero((switch == sw) & ~failed)[0]
        state = (
            s0[idx],
            np.full(len(idx), p0),
            e0[idx],
            i_init[idx].copy(),
            np.full(len(idx), q0),
            np.full(len(idx), r0),
            np.full(len(idx), d0),
        )
        if sw > 0:
            state = _batch_phase(state, pre, int(sw), step)
        if sw < t_end:
            post_g = {
                k: (v[idx] if isinstance(v, np.ndarray) else v) for k, v in post.items()
            }
            state = _batch_phase(state, post_g, int(t_end - sw), step)
        stacked = np.vstack(state)
        bad = ~np.all(np.isfinite(stacked), axis=0)
        bad |= np.any(stacked < -NEGATIVE_CLAMP_FRACTION * n_pop, axis=0)
        bad |= np.abs(stacked.sum(axis=0) - n_pop) > CONSERVATION_RTOL * n_pop
        clamped = np.clip(stacked[4] + stacked[5] + stacked[6], 0.0, None)
        totals[idx] = np.where(bad, np.nan, clamped)
        failed[idx] = bad
    return totals, failed


def evaluate_factor_matrix(
    matrix: np.ndarray,
    names: Sequence[str],
    base: TwoRegimeConfig,
    horizon_day: dt.date | None = None,
    *,
    step: float = 0.05,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative confirmed cases at the horizon for each factor row.

    ``matrix`` columns are matched to ``names``; recognized names are
    alpha, beta, gamma_inv, delta (post-regime overrides), i0 (initial
    exposed = infectious), and intervention_day (delay after issuance).
    Returns (totals, failed): failed rows hold NaN.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    unknown = set(names) - set(SEIR_FACTOR_NAMES)
    if unknown:
        raise ValueError(f"unrecognized factor names: {sorted(unknown)}")
    horizon = horizon_day or base.horizon_end
    t_end = (horizon - base.start_day).days
    if t_end < 0 or horizon > base.horizon_end:
        raise ValueError("horizon_day outside the configured window")

    m = matrix.shape[0]
    columns = {name: matrix[:, j] for j, name in enumerate(names)}
    threads = max(1, int(threads))
    if threads == 1 or m < 2 * threads:
        return _evaluate_chunk(columns, m, base, t_end, step)

    bounds = np.linspace(0, m, threads + 1).astype(int)
    totals = np.empty(m)
    failed = np.zeros(m, dtype=bool)

    def work(lo: int, hi: int):
        sub = {k: v[lo:hi] for k, v in columns.items()}
        return lo, hi, _evaluate_chunk(sub, hi - lo, base, t_end, step)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        jobs = [pool.submit(work, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for job in jobs:
            lo, hi, (tot, bad) = job.result()
            totals[lo:hi] = tot
            failed[lo:hi] = bad
    return totals, failed


def evaluate_ensemble(
    samples: InputSample,
    base: TwoRegimeConfig,
    horizon_day: dt.date | None = None,
    *,
    step: float = 0.05,
    threads: int = 1,
) -> OutputSample:
    """Run the two-regime model for every sampled row.

    Failed rows are flagged, not dropped; FailureRateExceeded is raised
    when more than 0.1% of rows fail.
    """
    totals, failed = evaluate_factor_matrix(
        samples.matrix, samples.spec.names, base, horizon_day, step=step, threads=threads
    )
    n_failed = int(failed.sum())
    if n_failed > _FAILURE_RATE_LIMIT * samples.n:
        raise FailureRateExceeded(
            f"{n_failed}/{samples.n} ensemble rows failed to simulate"
        )
    return OutputSample(values=totals, failed=failed)


# -- summaries ----------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleStats:
    n: int
    mean: float
    sd: float
    quantiles: tuple[tuple[float, float], ...]
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    degenerate: bool

    def quantile(self, prob: float) -> float:
        for p, v in self.quantiles:
            if p == prob:
                return v
        raise KeyError(f"quantile {prob} was not requested")


def empirical_stats(
    values: np.ndarray,
    quantiles: Sequence[float] = (0.025, 0.5, 0.975),
    *,
    bins: int = 100,
) -> EnsembleStats:
    """Mean, n-1 standard deviation, interpolated quantiles, and histogram."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise EmptySample("no values to summarize")
    if not np.all(np.isfinite(values)):
        raise EmptySample("values contain NaN/Inf; exclude failed rows first")
    for p in quantiles:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"quantile probability {p} outside [0, 1]")
    n = len(values)
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    qs = tuple((float(p), float(np.quantile(values, p))) for p in quantiles)
    counts, edges = np.histogram(values, bins=bins)
    return EnsembleStats(
        n=n,
        mean=mean,
        sd=sd,
        quantiles=qs,
        histogram_counts=counts,
        histogram_edges=edges,
        degenerate=(n < 2 or sd == 0.0),
    )
