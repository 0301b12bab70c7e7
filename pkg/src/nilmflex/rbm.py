"""Restricted Boltzmann Machine trained by contrastive divergence.

The model is a two-layer bipartite network: visible units carry the
scaled input windows, hidden units the extracted features. Training
follows CD-n (default n=1): the gradient of each parameter is the gap
between data-side and model-side pair statistics, where the model side
comes from n steps of alternating Gibbs sampling started at the data.
Updates use momentum plus weight decay on the weight matrix only.

After training, ``transform`` returns the hidden-unit probabilities,
which downstream classifiers consume as features.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

__all__ = ["BernoulliRbm", "momentum_update"]

SERIALIZATION_FORMAT = "nilmflex-rbm"
SERIALIZATION_VERSION = 1


def momentum_update(param, grad, velocity, learning_rate, momentum, weight_decay=0.0):
    """One momentum step: v' = momentum*v + lr*(grad - decay*param).

    Returns (param + v', v'). Raises if the result is not finite, so a
    diverging run surfaces instead of being masked.
    """
    velocity_new = momentum * velocity + learning_rate * (grad - weight_decay * param)
    param_new = param + velocity_new
    if not np.all(np.isfinite(param_new)):
        raise FloatingPointError("parameter update produced non-finite values (divergence)")
    return param_new, velocity_new


class BernoulliRbm(BaseEstimator, TransformerMixin):
    """RBM feature extractor with binary hidden units and [0, 1] visible
    inputs treated as probabilities.

    Parameters
    ----------
    n_hidden : int
        Number of hidden units (feature width).
    gibbs_steps : int
        Gibbs steps per gradient estimate (CD-n).
    learning_rate, momentum, weight_decay : float
        Update-rule coefficients; weight decay applies to the weight
        matrix only, never to biases.
    n_epochs, batch_size : int
        Mini-batch schedule. Rows are reshuffled each epoch.
    random_state : int or None
        Seed for init, shuffling, and hidden-unit sampling. Fitting is
        bit-reproducible for a fixed (X, random_state) pair, including
        the order of rows in X.

    Attributes (after fit)
    ----------
    weights_ : (n_visible, n_hidden) weight matrix
    visible_bias_ : (n_visible,) biases
    hidden_bias_ : (n_hidden,) biases
    """

    def __init__(
        self,
        n_hidden: int = 20,
        gibbs_steps: int = 1,
        learning_rate: float = 1e-2,
        momentum: float = 0.5,
        weight_decay: float = 2e-4,
        n_epochs: int = 25,
        batch_size: int = 100,
        random_state: int | None = None,
    ):
        self.n_hidden = n_hidden
        self.gibbs_steps = gibbs_steps
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.random_state = random_state

    # -- validation ----------------------------------------------------

    def _check_config(self) -> None:
        if self.n_hidden < 1 or self.gibbs_steps < 1:
            raise ValueError("n_hidden and gibbs_steps must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.n_epochs < 0 or self.batch_size < 1:
            raise ValueError("n_epochs must be >= 0 and batch_size >= 1")

    def _check_rows(self, X, check_range: bool) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("expected a non-empty 2-d array of rows")
        if check_range and (X.min() < -1e-9 or X.max() > 1 + 1e-9):
            raise ValueError("visible inputs must be scaled into [0, 1]")
        return X

    def _check_width(self, X: np.ndarray) -> None:
        if X.shape[1] != self.n_visible_:
            raise ValueError(
                f"expected rows of width {self.n_visible_}, got {X.shape[1]}"
            )

    # -- model equations -----------------------------------------------

    def energy(self, v, h) -> float:
        """Scalar energy of a joint state: minus the sum of all
        unit-unit interactions and unit biases."""
        check_is_fitted(self, "weights_")
        v = np.asarray(v, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if v.shape != (self.n_visible_,) or h.shape != (self.n_hidden_,):
            raise ValueError(
                f"expected shapes ({self.n_visible_},) and ({self.n_hidden_},), "
                f"got {v.shape} and {h.shape}"
            )
        return float(-v @ self.weights_ @ h - self.visible_bias_ @ v - self.hidden_bias_ @ h)

    def hidden_probabilities(self, V) -> np.ndarray:
        """p(h_j = 1 | v) for each row of V, overflow-safe."""
        check_is_fitted(self, "weights_")
        V = self._check_rows(V, check_range=False)
        self._check_width(V)
        return expit(self.hidden_bias_ + V @ self.weights_)

    def visible_probabilities(self, H) -> np.ndarray:
        """p(v_i = 1 | h) for each row of H (mirror of the hidden side)."""
        check_is_fitted(self, "weights_")
        H = self._check_rows(H, check_range=False)
        if H.shape[1] != self.n_hidden_:
            raise ValueError(f"expected rows of width {self.n_hidden_}, got {H.shape[1]}")
        return expit(self.visible_bias_ + H @ self.weights_.T)

    # -- contrastive divergence ------------------------------------------

    def cd_gradients(self, V, rng: np.random.Generator):
        """Batch-averaged CD-n gradient estimates for (weights, visible
        bias, hidden bias).

        Positive phase pairs the data with hidden probabilities; the
        negative phase alternates binary hidden sampling with visible
        probabilities for ``gibbs_steps`` steps.
        """
        check_is_fitted(self, "weights_")
        V = self._check_rows(V, check_range=True)
        self._check_width(V)
        n = V.shape[0]

        h_prob = self.hidden_probabilities(V)
        pos_w = V.T @ h_prob / n
        pos_a = V.mean(axis=0)
        pos_b = h_prob.mean(axis=0)

        h_sample = (rng.random(h_prob.shape) < h_prob).astype(np.float64)
        for step in range(self.gibbs_steps):
            v_prob = self.visible_probabilities(h_sample)
            h_prob = self.hidden_probabilities(v_prob)
            if step + 1 < self.gibbs_steps:
                h_sample = (rng.random(h_prob.shape) < h_prob).astype(np.float64)

        neg_w = v_prob.T @ h_prob / n
        neg_a = v_prob.mean(axis=0)
        neg_b = h_prob.mean(axis=0)
        return pos_w - neg_w, pos_a - neg_a, pos_b - neg_b

    def _apply_gradients(self, grads) -> None:
        grad_w, grad_a, grad_b = grads
        self.weights_, self._velocity_w = momentum_update(
            self.weights_, grad_w, self._velocity_w,
            self.learning_rate, self.momentum, self.weight_decay,
        )
        self.visible_bias_, self._velocity_a = momentum_update(
            self.visible_bias_, grad_a, self._velocity_a,
            self.learning_rate, self.momentum,
        )
        self.hidden_bias_, self._velocity_b = momentum_update(
            self.hidden_bias_, grad_b, self._velocity_b,
            self.learning_rate, self.momentum,
        )

    @classmethod
    def from_parameters(cls, weights, visible_bias, hidden_bias, **config) -> "BernoulliRbm":
        """Build a ready-to-use model from explicit parameter arrays."""
        weights = np.asarray(weights, dtype=np.float64)
        visible_bias = np.asarray(visible_bias, dtype=np.float64)
        hidden_bias = np.asarray(hidden_bias, dtype=np.float64)
        if weights.ndim != 2 or weights.shape != (len(visible_bias), len(hidden_bias)):
            raise ValueError(
                f"weights shape {weights.shape} inconsistent with bias lengths "
                f"{len(visible_bias)} and {len(hidden_bias)}"
            )
        model = cls(n_hidden=weights.shape[1], **config)
        model.n_visible_ = weights.shape[0]
        model.n_hidden_ = weights.shape[1]
        model.weights_ = weights
        model.visible_bias_ = visible_bias
        model.hidden_bias_ = hidden_bias
        return model

    # -- estimator API ---------------------------------------------------

    def fit(self, X, y=None):
        """Unsupervised mini-batch CD training (labels are ignored)."""
        self._check_config()
        X = self._check_rows(X, check_range=True)
        rng = np.random.default_rng(self.random_state)

        self.n_visible_ = X.shape[1]
        self.n_hidden_ = int(self.n_hidden)
        self.weights_ = rng.normal(0.0, 0.01, size=(self.n_visible_, self.n_hidden_))
        self.visible_bias_ = np.zeros(self.n_visible_)
        self.hidden_bias_ = np.zeros(self.n_hidden_)
        self._velocity_w = np.zeros_like(self.weights_)
        self._velocity_a = np.zeros_like(self.visible_bias_)
        self._velocity_b = np.zeros_like(self.hidden_bias_)

        n = X.shape[0]
        for _ in range(self.n_epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = X[order[start : start + self.batch_size]]
                self._apply_gradients(self.cd_gradients(batch, rng))
        return self

    def transform(self, X) -> np.ndarray:
        """Deterministic feature extraction: row-wise hidden probabilities."""
        return self.hidden_probabilities(X)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "weights_")
        return {
            "format": SERIALIZATION_FORMAT,
            "version": SERIALIZATION_VERSION,
            "n_visible": self.n_visible_,
            "n_hidden": self.n_hidden_,
            "weights": self.weights_.tolist(),  # row-major: visible x hidden
            "visible_bias": self.visible_bias_.tolist(),
            "hidden_bias": self.hidden_bias_.tolist(),
            "config": {
                "gibbs_steps": self.gibbs_steps,
                "learning_rate": self.learning_rate,
                "momentum": self.momentum,
                "weight_decay": self.weight_decay,
                "n_epochs": self.n_epochs,
                "batch_size": self.batch_size,
                "random_state": self.random_state,
            },
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "BernoulliRbm":
        if blob.get("format") != SERIALIZATION_FORMAT:
            raise ValueError(f"not an RBM blob: format={blob.get('format')!r}")
        if blob.get("version") != SERIALIZATION_VERSION:
            raise ValueError(f"unsupported RBM blob version {blob.get('version')!r}")
        model = cls(n_hidden=int(blob["n_hidden"]), **blob.get("config", {}))
        model.n_visible_ = int(blob["n_visible"])
        model.n_hidden_ = int(blob["n_hidden"])
        model.weights_ = np.asarray(blob["weights"], dtype=np.float64)
        model.visible_bias_ = np.asarray(blob["visible_bias"], dtype=np.float64)
        model.hidden_bias_ = np.asarray(blob["hidden_bias"], dtype=np.float64)
        if model.weights_.shape != (model.n_visible_, model.n_hidden_):
            raise ValueError("RBM blob has inconsistent dimensions")
        return model

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str) -> "BernoulliRbm":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
