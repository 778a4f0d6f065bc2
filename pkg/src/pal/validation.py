"""Input validation helpers for the estimator layer."""
from __future__ import annotations

import numpy as np

from .exceptions import ParameterError, ShapeError


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ShapeError(f"{name} must be a nonempty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError(f"{name} contains non-finite values")
    return X


def check_labels(y, n_rows: int, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n_rows:
        raise ShapeError(f"{name} must be 1-D with {n_rows} entries, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.asarray(y, dtype=np.int64)
        if not np.all(rounded == y):
            raise ParameterError(f"{name} must hold integer class ids")
        y = rounded
    return y.astype(np.int64)


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise ParameterError(
            f"{type(estimator).__name__} is not fitted yet; call fit before predict/transform"
        )
