"""Scikit-learn compatible wrappers around the quanvolution transform and
the from-scratch CNN, so both compose with pipelines and model selection."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from . import network
from .errors import ValidationError
from .quanv import QuanvFilterSpec, quanv_image
from .validation import check_fitted, check_image_batch, check_labels


class QuanvolutionTransformer(TransformerMixin, BaseEstimator):
    """Stateless image-to-feature-map transform behind the estimator API.

    fit() only materializes the seeded filter circuits; no statistics are
    learned from the data.  transform() maps (N, H, W, 1) images in [0, 1]
    to (N, H//2, W//2, 4 * n_filters) feature maps in [-1, 1].
    """

    def __init__(self, n_random_layers: int = 2, seed: int = 0,
                 embed_scale: float = math.pi, n_filters: int = 1):
        self.n_random_layers = n_random_layers
        self.seed = seed
        self.embed_scale = embed_scale
        self.n_filters = n_filters

    def _spec(self) -> QuanvFilterSpec:
        return QuanvFilterSpec(
            n_random_layers=self.n_random_layers,
            seed=self.seed,
            embed_scale=self.embed_scale,
            n_filters=self.n_filters,
        )

    def fit(self, X=None, y=None):
        self.spec_ = self._spec()
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "spec_")
        X = check_image_batch(X, channels=1)
        return np.stack([quanv_image(image, self.spec_) for image in X])

    def __sklearn_is_fitted__(self):
        return getattr(self, "spec_", None) is not None


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """Small convolutional classifier trained with Adam on cross-entropy.

    Works on raw grayscale images and on quanvolved feature maps alike; the
    network is built to match the input shape seen at fit time.
    """

    def __init__(self, batch_size: int = 32, epochs: int = 10,
                 learning_rate: float = 1e-3, seed: int = 0):
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y, validation_data=None):
        X = check_image_batch(X)
        y = check_labels(y, X.shape[0])
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValidationError("need at least two classes to fit a classifier")
        config = network.TrainConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )
        self.network_ = network.Network.build(
            X.shape[1:], self.classes_.shape[0], seed=self.seed
        )
        if validation_data is None:
            val_x, val_y = X, y_idx
        else:
            val_x = check_image_batch(validation_data[0])
            val_y = check_labels(validation_data[1], val_x.shape[0])
            val_y = np.searchsorted(self.classes_, val_y)
        self.history_ = network.train(self.network_, X, y_idx, val_x, val_y, config)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_fitted(self, "network_")
        X = check_image_batch(X)
        outputs = []
        for start in range(0, X.shape[0], 256):
            outputs.append(self.network_.forward(X[start : start + 256]))
        return np.concatenate(outputs) if outputs else np.zeros((0, len(self.classes_)))

    def predict_proba(self, X) -> np.ndarray:
        return network.softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        check_fitted(self, "network_")
        return self.classes_[self.decision_function(X).argmax(axis=1)]

    def __sklearn_is_fitted__(self):
        return getattr(self, "network_", None) is not None
