"""Exception taxonomy.

Two families matter to callers: ``DataError`` covers malformed or
infeasible inputs (CLI exit code 1), ``NumericalError`` covers failures
that arise while computing (CLI exit code 2).
"""


class EpisensError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EpisensError):
    """Invalid, inconsistent, or infeasible input."""


class NumericalError(EpisensError):
    """A computation failed or degenerated."""


# -- data ingestion ---------------------------------------------------------

class MissingColumn(DataError):
    """A required CSV column is absent from the header."""


class MalformedRow(DataError):
    """A CSV row holds an unparseable date or count."""


class InconsistentSeries(DataError):
    """A series invariant (ordering, monotonicity, accounting identity) fails."""


class OutOfRange(DataError):
    """A requested date window falls outside the available series."""


# -- integration ------------------------------------------------------------

class NonFiniteState(NumericalError):
    """A compartment became NaN/Inf or went negative beyond roundoff."""


# -- calibration ------------------------------------------------------------

class DegenerateSeries(DataError):
    """A series is constant or too short for the requested statistic."""


class LengthMismatch(DataError):
    """Two series that must align have different lengths."""


class NoConvergence(NumericalError):
    """The optimizer cannot converge (e.g. under-determined window)."""


class InfeasibleBounds(DataError):
    """Parameter bounds are empty or do not contain the initial guess."""


# -- uncertainty quantification ---------------------------------------------

class EmptySupport(DataError):
    """A factor distribution has an empty support."""


class EmptySample(DataError):
    """A sample with no usable rows was passed where data is required."""


class FailureRateExceeded(NumericalError):
    """More than the tolerated fraction of ensemble rows failed to simulate."""


# -- sensitivity analysis ----------------------------------------------------

class ZeroDelta(DataError):
    """A Newton ratio was requested for a zero coordinate shift."""


class DegenerateVariance(NumericalError):
    """An output variance required for normalization is not positive."""


class TooFewSamples(DataError):
    """Not enough samples/replicates for the requested estimator."""
