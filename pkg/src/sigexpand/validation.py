"""Input validation helpers shared by the estimators and the functional API.

Conventions: signals are float32 arrays shaped [n, 2, length] (I channel
then Q channel); labels are non-negative integer class ids; index sets are
sorted unique int64 arrays into a dataset.
"""

from __future__ import annotations

import numpy as np


def check_signal_array(X, signal_len: int | None = None) -> np.ndarray:
    """Coerce `X` to a float32 [n, 2, L] batch.

    Accepts [n, 2, L], a single [2, L] signal, or the flattened sklearn-style
    [n, 2*L] layout (I channel first, then Q).
    """
    X = np.asarray(X)
    if X.ndim == 2 and signal_len is not None and X.shape[1] == 2 * signal_len:
        X = X.reshape(X.shape[0], 2, signal_len)
    elif X.ndim == 2 and X.shape[0] == 2:
        X = X[np.newaxis]
    elif X.ndim == 2 and X.shape[1] % 2 == 0 and signal_len is None:
        X = X.reshape(X.shape[0], 2, X.shape[1] // 2)
    if X.ndim != 3 or X.shape[1] != 2:
        raise ValueError(f"expected signals shaped [n, 2, L], got {X.shape}")
    if signal_len is not None and X.shape[2] != signal_len:
        raise ValueError(f"expected signal length {signal_len}, got {X.shape[2]}")
    X = np.ascontiguousarray(X, dtype=np.float32)
    if not np.all(np.isfinite(X)):
        raise ValueError("signal array contains non-finite values")
    return X


def check_labels(y, num_classes: int | None = None, n: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        y_int = y.astype(np.int64)
        if not np.array_equal(y_int, y):
            raise ValueError("labels must be integers")
        y = y_int
    y = y.astype(np.int64)
    if n is not None and len(y) != n:
        raise ValueError(f"expected {n} labels, got {len(y)}")
    if len(y) and y.min() < 0:
        raise ValueError("labels must be non-negative")
    if num_classes is not None and len(y) and y.max() >= num_classes:
        raise ValueError(f"label {y.max()} out of range for {num_classes} classes")
    return y


def check_probability_matrix(P, atol: float = 1e-5) -> np.ndarray:
    """Validate rows of `P` as probability vectors; returns float64 [n, C]."""
    P = np.asarray(P, dtype=np.float64)
    single = P.ndim == 1
    if single:
        P = P[np.newaxis]
    if P.ndim != 2:
        raise ValueError(f"expected a probability vector or matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < -atol):
        raise ValueError("probabilities must be finite and non-negative")
    sums = P.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise ValueError("probability rows must sum to 1")
    return P


def check_index_array(indices, n: int, name: str = "indices", require_sorted_unique: bool = True) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if len(idx):
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError(f"{name} out of range [0, {n})")
        if require_sorted_unique and (np.any(np.diff(idx) <= 0)):
            raise ValueError(f"{name} must be strictly increasing (sorted, unique)")
    return idx
