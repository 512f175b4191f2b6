"""Global sensitivity measures: finite-change decomposition and given-data estimators.

Two complementary routes:

* Finite changes. For an input shift x_from -> x_to, the output change is
  decomposed exactly into 2^d - 1 subset-attributed effects phi_z via a
  Moebius transform over the vertex lattice: phi_i = g(x_i^to : x_-i^from)
  - g(x_from), phi_ij = g(x_ij^to : x_-ij^from) - g(x_from) - phi_i -
  phi_j, and so on; the effects telescope back to the total change.
  Replicating the decomposition over random endpoint pairs yields total
  sensitivity indices T_i = E[phi_i^2] / (2 V_Y) (Jansen form), the mean
  dimension sum(T_i), and interaction-magnitude spectra.

* Given data. From a single (X, y) sample, conditioning is replaced by
  equal-count bins on one factor: the first-order index S_i is the
  variance of bin-conditional means over the total variance, and the
  Kuiper importance beta_i is the bin-probability-weighted Kuiper
  distance between conditional and marginal output distributions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .errors import DegenerateVariance, TooFewSamples, ZeroDelta

MAX_FACTORS = 20
_IDENTITY_RTOL = 1e-9


def subsets(n_factors: int) -> tuple[tuple[int, ...], ...]:
    """All non-empty factor subsets, ordered by (order, lexicographic)."""
    if not 1 <= n_factors <= MAX_FACTORS:
        raise ValueError(f"n_factors must be in 1..{MAX_FACTORS}")
    out = []
    for order in range(1, n_factors + 1):
        out.extend(itertools.combinations(range(n_factors), order))
    return tuple(out)


def _mask(subset: tuple[int, ...]) -> int:
    m = 0
    for j in subset:
        m |= 1 << j
    return m


def _mobius_transform(values: np.ndarray, n_factors: int) -> np.ndarray:
    """Alternating subset sums along the last axis (length 2^d, mask-indexed)."""
    f = values.copy()
    masks = np.arange(1 << n_factors)
    for j in range(n_factors):
        has = (masks >> j) & 1 == 1
        f[..., has] -= f[..., masks[has] ^ (1 << j)]
    return f


def _vertex_matrix(x_from: np.ndarray, x_to: np.ndarray) -> np.ndarray:
    """(n, 2^d, d) lattice points: coordinate j from x_to wherever bit j is set."""
    n, d = x_from.shape
    masks = np.arange(1 << d)
    take_to = ((masks[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    return np.where(take_to[None, :, :], x_to[:, None, :], x_from[:, None, :])


def finite_change_decomposition(
    g: Callable[[np.ndarray], float],
    x_from,
    x_to,
) -> dict[tuple[int, ...], float]:
    """Exact 2^d-effect decomposition of g(x_to) - g(x_from).

    Evaluates g once per lattice vertex (2^d calls, each vertex visited
    exactly once) and returns the effect of every non-empty factor subset.
    The effects satisfy sum(phi_z) = g(x_to) - g(x_from).
    """
    x_from = np.asarray(x_from, dtype=float)
    x_to = np.asarray(x_to, dtype=float)
    if x_from.shape != x_to.shape or x_from.ndim != 1:
        raise ValueError("x_from and x_to must be 1-D points of equal length")
    d = len(x_from)
    if d > MAX_FACTORS:
        raise ValueError(f"at most {MAX_FACTORS} factors (2^d evaluations)")
    vertices = _vertex_matrix(x_from[None, :], x_to[None, :])[0]
    values = np.array([float(g(vertices[m])) for m in range(1 << d)])
    phi = _mobius_transform(values, d)
    return {subset: float(phi[_mask(subset)]) for subset in subsets(d)}


def newton_ratios(
    effects: dict[tuple[int, ...], float],
    deltas,
) -> dict[tuple[int, int], float]:
    """Second-order effects divided by the product of their coordinate shifts.

    Positive ratios flag locally synergistic interactions, negative ones
    antagonistic. Raises ZeroDelta when a requested pair has a zero shift.
    """
    deltas = np.asarray(deltas, dtype=float)
    out = {}
    for subset, phi in effects.items():
        if len(subset) != 2:
            continue
        i, j = subset
        denom = deltas[i] * deltas[j]
        if denom == 0.0:
            raise ZeroDelta(f"zero shift for pair {subset}")
        out[subset] = phi / denom
    return out


@dataclass(frozen=True)
class FiniteChangeEnsemble:
    """Replicated finite-change decompositions over random endpoint pairs."""

    factor_names: tuple[str, ...]
    subset_list: tuple[tuple[int, ...], ...]
    effects: np.ndarray  # (n_replicates, 2^d - 1), columns follow subset_list
    x_from: np.ndarray
    x_to: np.ndarray
    y_from: np.ndarray
    y_to: np.ndarray
    n_evaluations: int

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)

    @property
    def n_replicates(self) -> int:
        return self.effects.shape[0]

    @property
    def delta_y(self) -> np.ndarray:
        return self.y_to - self.y_from

    def first_order_effects(self) -> np.ndarray:
        """(n_replicates, d) matrix of the singleton effects."""
        return self.effects[:, : self.n_factors]

    def effects_for(self, subset: tuple[int, ...]) -> np.ndarray:
        return self.effects[:, self.subset_list.index(tuple(sorted(subset)))]

    def endpoint_values(self) -> np.ndarray:
        return np.concatenate([self.y_from, self.y_to])

    def validate(self) -> "FiniteChangeEnsemble":
        total = self.effects.sum(axis=1)
        scale = np.maximum(1.0, np.maximum(np.abs(self.y_from), np.abs(self.y_to)))
        bad = np.abs(total - self.delta_y) > _IDENTITY_RTOL * scale
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise DegenerateVariance(
                f"replicate {k}: decomposition identity violated "
                f"(sum={total[k]!r}, delta_y={self.delta_y[k]!r})"
            )
        return self


def replicated_factorial(
    g: Callable[[np.ndarray], float] | None,
    sampler: Callable[[int, int], tuple[np.ndarray, np.ndarray]],
    n_replicates: int,
    seed: int,
    *,
    factor_names: Sequence[str] | None = None,
    batch_g: Callable[[np.ndarray], np.ndarray] | None = None,
) -> FiniteChangeEnsemble:
    """Decompose the output change of ``n_replicates`` random endpoint pairs.

    ``sampler(n, seed)`` must return two (n, d) matrices drawn from the
    input measure. Exactly n * 2^d model evaluations are performed, one
    per lattice vertex; pass ``batch_g`` (matrix -> vector) to evaluate
    them vectorized instead of calling ``g`` point by point.
    """
    if n_replicates < 2:
        raise TooFewSamples("need at least 2 replicates")
    if (g is None) == (batch_g is None):
        raise ValueError("provide exactly one of g or batch_g")
    x_from, x_to = sampler(n_replicates, seed)
    x_from = np.asarray(x_from, dtype=float)
    x_to = np.asarray(x_to, dtype=float)
    if x_from.shape != x_to.shape or x_from.ndim != 2:
        raise ValueError("sampler must return two matrices of equal shape")
    n, d = x_from.shape
    if d > MAX_FACTORS:
        raise ValueError(f"at most {MAX_FACTORS} factors (2^d evaluations each)")
    names = tuple(factor_names) if factor_names else tuple(f"x{j}" for j in range(d))
    if len(names) != d:
        raise ValueError("factor_names length mismatch")

    vertices = _vertex_matrix(x_from, x_to).reshape(n << d, d)
    if batch_g is not None:
        values = np.asarray(batch_g(vertices), dtype=float).reshape(n, 1 << d)
    else:
        values = np.array([float(g(v)) for v in vertices]).reshape(n, 1 << d)
    phi = _mobius_transform(values, d)
    order = [_mask(s) for s in subsets(d)]
    return FiniteChangeEnsemble(
        factor_names=names,
        subset_list=subsets(d),
        effects=phi[:, order],
        x_from=x_from,
        x_to=x_to,
        y_from=values[:, 0],
        y_to=values[:, -1],
        n_evaluations=n << d,
    ).validate()


def pair_sampler(spec) -> Callable[[int, int], tuple[np.ndarray, np.ndarray]]:
    """Endpoint-pair source drawing both ends i.i.d. from a distribution spec."""
    from .uq import sample_inputs

    def draw(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rows = sample_inputs(spec, 2 * n, seed).matrix
        return rows[0::2], rows[1::2]

    return draw


def total_indices_from_ensemble(
    ens: FiniteChangeEnsemble,
    output_variance: float,
) -> np.ndarray:
    """Total indices T_i = mean(phi_i^2) / (2 * V_Y) from singleton effects."""
    if ens.n_replicates < 30:
        raise TooFewSamples("need at least 30 replicates for total indices")
    if not output_variance > 0:
        raise DegenerateVariance(f"output variance must be > 0, got {output_variance}")
    first = ens.first_order_effects()
    return np.maximum((first**2).mean(axis=0) / (2.0 * output_variance), 0.0)


def mean_dimension(t_indices) -> float:
    """Sum of total indices; 1 for additive models, larger with interactions."""
    t = np.asarray(t_indices, dtype=float)
    if np.any(t < 0):
        raise ValueError("total indices must be >= 0")
    return float(t.sum())


@dataclass(frozen=True)
class InteractionSpectrum:
    """Mean absolute effect magnitude per factor subset, in (order, lex) order."""

    factor_names: tuple[str, ...]
    subset_list: tuple[tuple[int, ...], ...]
    mean_abs: np.ndarray

    def labels(self) -> list[str]:
        return ["+".join(self.factor_names[j] for j in s) for s in self.subset_list]

    def largest_singleton(self) -> tuple[tuple[int, ...], float]:
        d = len(self.factor_names)
        k = int(np.argmax(self.mean_abs[:d]))
        return self.subset_list[k], float(self.mean_abs[k])

    def largest_interaction(self) -> tuple[tuple[int, ...], float]:
        d = len(self.factor_names)
        k = d + int(np.argmax(self.mean_abs[d:]))
        return self.subset_list[k], float(self.mean_abs[k])


def interaction_spectrum(ens: FiniteChangeEnsemble) -> InteractionSpectrum:
    """Average |phi_z| per subset: singletons first, then pairs, and so on."""
    return InteractionSpectrum(
        factor_names=ens.factor_names,
        subset_list=ens.subset_list,
        mean_abs=np.abs(ens.effects).mean(axis=0),
    )


# -- given-data estimators -----------------------------------------------------


def _check_given_data(x, y, m_bins: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValueError("x and y must be aligned 1-D samples")
    if m_bins < 2:
        raise ValueError("need at least 2 bins")
    if len(x) < 2 * m_bins:
        raise TooFewSamples(
            f"{len(x)} samples are too few for {m_bins} bins; "
            f"use at least {2 * m_bins} (100 per bin recommended)"
        )
    return x, y


def equal_count_bins(x: np.ndarray, m_bins: int) -> list[np.ndarray]:
    """Index groups partitioning x into near-equal-count bins.

    A factor with at most m_bins distinct values is discrete: it gets one
    bin per support point instead.
    """
    values = np.unique(x)
    if len(values) <= m_bins:
        return [np.nonzero(x == v)[0] for v in values]
    order = np.argsort(x, kind="stable")
    return [idx for idx in np.array_split(order, m_bins) if len(idx)]


def first_order_given_data(x_col, y, m_bins: int = 50) -> float:
    """First-order index: variance of bin-conditional means over total variance."""
    x, y = _check_given_data(x_col, y, m_bins)
    v_y = float(y.var())
    if v_y == 0.0:
        return 0.0
    grand = y.mean()
    n = len(y)
    num = sum(
        len(idx) / n * (y[idx].mean() - grand) ** 2 for idx in equal_count_bins(x, m_bins)
    )
    return float(num / v_y)


def kuiper_beta(x_col, y, m_bins: int = 50) -> float:
    """Kuiper importance: expected Kuiper distance between the conditional
    (per-bin) and marginal output distributions, both evaluated empirically
    on the pooled sample."""
    x, y = _check_given_data(x_col, y, m_bins)
    n = len(y)
    order = np.argsort(y, kind="stable")
    y_sorted = y[order]
    # evaluate step functions only at the last index of each tie run
    eval_at = np.nonzero(np.diff(y_sorted) != 0)[0]
    eval_at = np.append(eval_at, n - 1)
    marginal = (np.arange(n) + 1.0) / n
    rank_of = np.empty(n, dtype=np.intp)
    rank_of[order] = np.arange(n)

    beta = 0.0
    for idx in equal_count_bins(x, m_bins):
        member = np.zeros(n, dtype=bool)
        member[rank_of[idx]] = True
        conditional = np.cumsum(member) / len(idx)
        diff = (conditional - marginal)[eval_at]
        d_plus = max(float(diff.max()), 0.0)
        d_minus = max(float(-diff.min()), 0.0)
        beta += len(idx) / n * (d_plus + d_minus)
    return float(beta)


@dataclass(frozen=True)
class ConditionalCurve:
    """Binwise regression of the output on one factor."""

    factor_name: str
    centers: np.ndarray
    means: np.ndarray
    medians: np.ndarray
    counts: np.ndarray
    direction: int  # sign of the Spearman correlation of bin means vs centers

    def median_at(self, center_value: float) -> float:
        k = int(np.argmin(np.abs(self.centers - center_value)))
        return float(self.medians[k])


def conditional_regression(
    x_col,
    y,
    m_bins: int = 50,
    *,
    factor_name: str = "x",
) -> ConditionalCurve:
    """Bin-conditional means/medians of y against the factor's bin centers."""
    x, y = _check_given_data(x_col, y, m_bins)
    bins = equal_count_bins(x, m_bins)
    centers = np.array([x[idx].mean() for idx in bins])
    means = np.array([y[idx].mean() for idx in bins])
    medians = np.array([np.quantile(y[idx], 0.5) for idx in bins])
    counts = np.array([len(idx) for idx in bins])
    if len(bins) < 2 or np.all(means == means[0]):
        direction = 0
    else:
        rho = spearmanr(centers, means).statistic
        direction = 0 if math.isnan(rho) else int(np.sign(rho))
    return ConditionalCurve(
        factor_name=factor_name,
        centers=centers,
        means=means,
        medians=medians,
        counts=counts,
        direction=direction,
    )


# -- report assembly -----------------------------------------------------------


@dataclass(frozen=True)
class SensitivityReport:
    """All sensitivity measures for one ensemble, rank-ordered per measure."""

    factor_names: tuple[str, ...]
    first_order: dict[str, float]
    kuiper: dict[str, float]
    total: dict[str, float] | None
    mean_dimension: float | None
    first_order_sum: float
    interaction_fraction: float
    ranks: dict[str, tuple[str, ...]]
    spectrum_labels: tuple[str, ...] | None
    spectrum_values: tuple[float, ...] | None

    def to_dict(self) -> dict:
        out = {
            "factors": list(self.factor_names),
            "first_order": self.first_order,
            "kuiper": self.kuiper,
            "first_order_sum": self.first_order_sum,
            "interaction_fraction": self.interaction_fraction,
            "ranks": {k: list(v) for k, v in self.ranks.items()},
        }
        out["total"] = self.total
        out["mean_dimension"] = self.mean_dimension
        if self.spectrum_labels is not None:
            out["interaction_means"] = [
                {"factors": label.split("+"), "mean_abs_effect": value}
                for label, value in zip(self.spectrum_labels, self.spectrum_values)
            ]
        return out


def _rank(names: Sequence[str], scores: dict[str, float]) -> tuple[str, ...]:
    return tuple(sorted(names, key=lambda n: (-scores[n], n)))


def build_report(
    factor_names: Sequence[str],
    x_matrix: np.ndarray,
    y: np.ndarray,
    m_bins: int = 50,
    *,
    ensemble: FiniteChangeEnsemble | None = None,
    output_variance: float | None = None,
) -> SensitivityReport:
    """Given-data S and Kuiper measures, plus finite-change totals when an
    ensemble is supplied."""
    names = tuple(factor_names)
    x_matrix = np.asarray(x_matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    s = {n: first_order_given_data(x_matrix[:, j], y, m_bins) for j, n in enumerate(names)}
    b = {n: kuiper_beta(x_matrix[:, j], y, m_bins) for j, n in enumerate(names)}
    ranks = {"first_order": _rank(names, s), "kuiper": _rank(names, b)}

    total = None
    d_mean = None
    spectrum_labels = None
    spectrum_values = None
    if ensemble is not None:
        if tuple(ensemble.factor_names) != names:
            raise ValueError("ensemble factors do not match the sample factors")
        v_y = float(y.var(ddof=1)) if output_variance is None else output_variance
        t = total_indices_from_ensemble(ensemble, v_y)
        total = {n: float(v) for n, v in zip(names, t)}
        d_mean = mean_dimension(t)
        spec = interaction_spectrum(ensemble)
        spectrum_labels = tuple(spec.labels())
        spectrum_values = tuple(float(v) for v in spec.mean_abs)
        ranks["total"] = _rank(names, total)

    s_sum = float(sum(s.values()))
    return SensitivityReport(
        factor_names=names,
        first_order={n: float(v) for n, v in s.items()},
        kuiper={n: float(v) for n, v in b.items()},
        total=total,
        mean_dimension=d_mean,
        first_order_sum=s_sum,
        interaction_fraction=1.0 - s_sum,
        ranks=ranks,
        spectrum_labels=spectrum_labels,
        spectrum_values=spectrum_values,
    )


# -- resampling helpers ---------------------------------------------------------


def bootstrap_first_order(
    x_col,
    y,
    m_bins: int,
    n_boot: int,
    seed: int,
) -> np.ndarray:
    """First-order index on n_boot row-resamples (for standard errors)."""
    x = np.asarray(x_col, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, len(y), size=len(y))
        out[b] = first_order_given_data(x[idx], y[idx], m_bins)
    return out


def bootstrap_total_indices(
    ens: FiniteChangeEnsemble,
    output_variance: float,
    n_boot: int,
    seed: int,
) -> np.ndarray:
    """(n_boot, d) total indices over replicate resamples."""
    rng = np.random.default_rng(seed)
    first = ens.first_order_effects()
    n = first.shape[0]
    out = np.empty((n_boot, first.shape[1]))
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        out[b] = (first[idx] ** 2).mean(axis=0) / (2.0 * output_variance)
    return out
