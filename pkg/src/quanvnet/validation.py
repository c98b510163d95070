"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ValidationError


def check_image_batch(X, channels: int | None = None) -> np.ndarray:
    """Coerce to a float32 (N, H, W, C) batch.

    Accepts (N, H, W) as single-channel and (N, H, W, C) as-is.
    """
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[:, :, :, None]
    if X.ndim != 4:
        raise DimensionError(
            f"expected (N, H, W[, C]) image batch, got shape {X.shape}"
        )
    if channels is not None and X.shape[3] != channels:
        raise DimensionError(f"expected {channels} channel(s), got {X.shape[3]}")
    X = X.astype(np.float32, copy=False)
    if not np.isfinite(X).all():
        raise ValidationError("image batch contains non-finite values")
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValidationError(
            f"labels must be 1-D of length {n_samples}, got shape {y.shape}"
        )
    return y


def check_fitted(estimator, attribute: str) -> None:
    if getattr(estimator, attribute, None) is None:
        raise ValidationError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
