"""Input-validation helpers shared by the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import EmptySample, LengthMismatch


def check_matrix(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptySample(f"{name} has no rows")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN/Inf")
    return X


def check_vector(y, *, name: str = "y") -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if len(y) == 0:
        raise EmptySample(f"{name} is empty")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN/Inf")
    return y


def check_aligned(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a sample matrix and an output vector of matching length."""
    X = check_matrix(X)
    y = check_vector(y)
    if X.shape[0] != len(y):
        raise LengthMismatch(f"X has {X.shape[0]} rows, y has {len(y)}")
    return X, y
