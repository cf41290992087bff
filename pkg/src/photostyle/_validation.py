"""Input validation shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d


def check_image_batch(X) -> np.ndarray:
    """Coerce ``X`` to a finite float64 batch shaped ``(n, C, H, W)``.

    A 3-D input is read as ``(n, H, W)`` single-channel images.
    """
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_2d=False)
    if X.ndim == 3:
        X = X[:, None, :, :]
    if X.ndim != 4:
        raise ValueError(f"expected an image batch of shape (n, C, H, W), got {X.shape}")
    return X


def check_labels(y, n_samples=None):
    """Return ``(classes, encoded)`` with classes sorted as ``np.unique`` does."""
    y = column_or_1d(y, warn=True)
    if n_samples is not None:
        check_consistent_length(np.empty(n_samples), y)
    classes, encoded = np.unique(y, return_inverse=True)
    return classes, encoded


def check_regression_inputs(X, y):
    X = check_array(X, dtype=np.float64, ensure_min_features=1)
    y = column_or_1d(check_array(np.asarray(y).reshape(-1, 1), dtype=np.float64))
    check_consistent_length(X, y)
    return X, y
