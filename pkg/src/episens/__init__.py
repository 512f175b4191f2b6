"""Generalized SEIR calibration, uncertainty quantification, and global
sensitivity analysis for epidemic case data."""

from .calibrate import (
    FitResult,
    InitPolicy,
    ParamBounds,
    build_initial_state,
    fit,
    r_squared,
    rmse,
)
from .data import (
    ObservedSeries,
    from_normalized_csv,
    parse_national_csv,
    slice_window,
    to_normalized_csv,
)
from .gsa import (
    ConditionalCurve,
    FiniteChangeEnsemble,
    InteractionSpectrum,
    SensitivityReport,
    build_report,
    conditional_regression,
    finite_change_decomposition,
    first_order_given_data,
    interaction_spectrum,
    kuiper_beta,
    mean_dimension,
    newton_ratios,
    pair_sampler,
    replicated_factorial,
    total_indices_from_ensemble,
)
from .scenario import DelaySweepRow, TwoRegimeConfig, delay_sweep, simulate_two_regime
from .seir import (
    SeirDerivative,
    SeirParams,
    SeirState,
    Trajectory,
    cure_rate,
    derivatives,
    integrate,
    mortality_rate,
    total_confirmed,
)
from .uq import (
    EnsembleStats,
    FactorSpec,
    InputDistributionSpec,
    InputSample,
    OutputSample,
    empirical_stats,
    evaluate_ensemble,
    evaluate_factor_matrix,
    sample_inputs,
    seir_factor_spec,
)

__version__ = "0.1.0"

_LAZY = {"SeirCalibrator", "GivenDataSensitivityAnalyzer"}


def __getattr__(name):
    # estimators pull in sklearn; import only when asked for
    if name in _LAZY:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
