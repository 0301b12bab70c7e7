"""Four from-scratch binary classifiers behind the fit/predict interface:
Gaussian naive Bayes, brute-force k-nearest neighbors, an RBF-kernel SVM
trained by sequential minimal optimization, and AdaBoost over decision
stumps.

Labels are {0, 1} everywhere at the interface; the margin-based models
map to {-1, +1} internally. All predictors are deterministic once
fitted; SVM training uses a seeded generator for its second-choice
heuristic, so fitting is deterministic given the data order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

__all__ = [
    "GaussianNaiveBayes",
    "KnnClassifier",
    "SmoSvmClassifier",
    "AdaBoostStumps",
    "ConvergenceError",
    "classifier_to_dict",
    "classifier_from_dict",
]

SERIALIZATION_FORMAT = "nilmflex-classifier"
SERIALIZATION_VERSION = 1


class ConvergenceError(RuntimeError):
    """SMO failed to reach the KKT conditions within the iteration cap."""

    def __init__(self, message: str, n_violations: int):
        super().__init__(message)
        self.n_violations = n_violations


def _check_train(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty 2-d array")
    if y.shape != (X.shape[0],):
        raise ValueError(f"{X.shape[0]} rows but {y.shape} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary {0, 1}")
    return X, y


def _check_predict(model, X):
    check_is_fitted(model, "n_features_in_")
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("predict expects a 2-d array of rows; reshape single vectors")
    if X.shape[1] != model.n_features_in_:
        raise ValueError(
            f"feature width mismatch: model was fitted on {model.n_features_in_} "
            f"features, got {X.shape[1]}"
        )
    return X


def _require_both_classes(y):
    if y.min() == y.max():
        raise ValueError("training set contains a single class; need both 0 and 1")


class GaussianNaiveBayes(BaseEstimator, ClassifierMixin):
    """Per-class, per-feature Gaussian likelihoods under the independence
    assumption; priors are the class frequencies.

    Variances are floored at ``var_floor_ratio`` times the largest
    feature variance so constant features cannot divide by zero. All
    likelihood work happens in log space.
    """

    def __init__(self, var_floor_ratio: float = 1e-9):
        self.var_floor_ratio = var_floor_ratio

    def fit(self, X, y):
        X, y = _check_train(X, y)
        _require_both_classes(y)
        floor = self.var_floor_ratio * float(X.var(axis=0).max())
        if floor <= 0.0:
            floor = 1e-12  # every feature constant: any positive floor works
        self.class_log_prior_ = np.empty(2)
        self.theta_ = np.empty((2, X.shape[1]))
        self.var_ = np.empty((2, X.shape[1]))
        for cls in (0, 1):
            rows = X[y == cls]
            self.class_log_prior_[cls] = np.log(len(rows) / len(X))
            self.theta_[cls] = rows.mean(axis=0)
            self.var_[cls] = np.maximum(rows.var(axis=0), floor)
        self.n_features_in_ = X.shape[1]
        return self

    def _joint_log_likelihood(self, X) -> np.ndarray:
        jll = np.empty((X.shape[0], 2))
        for cls in (0, 1):
            gauss = -0.5 * (
                np.log(2.0 * np.pi * self.var_[cls])
                + (X - self.theta_[cls]) ** 2 / self.var_[cls]
            )
            jll[:, cls] = self.class_log_prior_[cls] + gauss.sum(axis=1)
        return jll

    def predict(self, X) -> np.ndarray:
        X = _check_predict(self, X)
        return np.argmax(self._joint_log_likelihood(X), axis=1)


class KnnClassifier(BaseEstimator, ClassifierMixin):
    """Majority vote among the k nearest training rows by Euclidean
    distance.

    Equal distances rank by lower training-row index; a tied vote (even
    k) falls back to the label of the single nearest neighbor.
    """

    _CHUNK_BUDGET = 4_000_000  # distance-matrix entries held at once

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        X, y = _check_train(X, y)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {X.shape[0]} training rows")
        self._X = X
        self._y = y
        self._sq_norms = np.einsum("ij,ij->i", X, X)
        self.n_features_in_ = X.shape[1]
        return self

    def _neighbor_indices(self, Q: np.ndarray) -> np.ndarray:
        """(m, k) nearest-neighbor indices, distance-then-index ordered."""
        k, n = self.k, self._X.shape[0]
        d2 = self._sq_norms + np.einsum("ij,ij->i", Q, Q)[:, None] - 2.0 * (Q @ self._X.T)
        np.maximum(d2, 0.0, out=d2)
        if k == n:
            part = np.broadcast_to(np.arange(n), d2.shape).copy()
        else:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        # index-sort first so a stable distance sort breaks ties by index
        part.sort(axis=1)
        cand_d = np.take_along_axis(d2, part, axis=1)
        order = np.argsort(cand_d, axis=1, kind="stable")
        nearest = np.take_along_axis(part, order, axis=1)
        if k < n:
            # ties straddling the partition boundary need a per-row fix
            kth = np.take_along_axis(cand_d, order[:, -1:], axis=1)
            ambiguous = np.flatnonzero((d2 <= kth).sum(axis=1) > k)
            for row in ambiguous:
                tied = np.flatnonzero(d2[row] <= kth[row, 0])
                resolved = tied[np.lexsort((tied, d2[row, tied]))]
                nearest[row] = resolved[:k]
        return nearest

    def predict(self, X) -> np.ndarray:
        X = _check_predict(self, X)
        out = np.empty(X.shape[0], dtype=np.int64)
        chunk = max(1, self._CHUNK_BUDGET // max(1, self._X.shape[0]))
        for start in range(0, X.shape[0], chunk):
            idx = self._neighbor_indices(X[start : start + chunk])
            votes = self._y[idx]
            on = 2 * votes.sum(axis=1)
            labels = (on > self.k).astype(np.int64)
            tied = on == self.k
            labels[tied] = votes[tied, 0]  # nearest neighbor decides
            out[start : start + chunk] = labels
        return out


class SmoSvmClassifier(BaseEstimator, ClassifierMixin):
    """Soft-margin SVM with an RBF kernel, trained by pairwise coordinate
    ascent on the dual (SMO).

    Parameters
    ----------
    C : float
        Box constraint on the dual coefficients.
    gamma : float or "scale"
        RBF width; "scale" uses 1 / (n_features * X.var()).
    tol : float
        KKT violation tolerance.
    max_passes : int
        Cap on optimization passes; hitting it with violations left
        raises :class:`ConvergenceError`.
    random_state : int
        Seed for the second-multiplier fallback choice.

    The full kernel matrix is materialized, so training is meant for at
    most a few thousand rows; prediction has no such limit.
    """

    def __init__(
        self,
        C: float = 1.0,
        gamma: float | str = "scale",
        tol: float = 1e-3,
        max_passes: int = 200,
        random_state: int = 0,
    ):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.random_state = random_state

    def _resolve_gamma(self, X) -> float:
        if self.gamma == "scale":
            var = float(X.var())
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        gamma = float(self.gamma)
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return gamma

    @staticmethod
    def _rbf(A, B, gamma) -> np.ndarray:
        d2 = (
            np.einsum("ij,ij->i", A, A)[:, None]
            + np.einsum("ij,ij->i", B, B)[None, :]
            - 2.0 * (A @ B.T)
        )
        np.maximum(d2, 0.0, out=d2)
        return np.exp(-gamma * d2)

    def fit(self, X, y):
        X, y01 = _check_train(X, y)
        _require_both_classes(y01)
        if self.C <= 0:
            raise ValueError("C must be positive")
        gamma = self._resolve_gamma(X)
        n = X.shape[0]
        y_pm = np.where(y01 == 1, 1.0, -1.0)
        K = self._rbf(X, X, gamma)
        rng = np.random.default_rng(self.random_state)

        alpha = np.zeros(n)
        b = 0.0
        errors = -y_pm.copy()  # f(x) - y with f == 0 initially
        C, tol = float(self.C), float(self.tol)

        def take_step(i, j) -> bool:
            nonlocal b
            if i == j:
                return False
            a_i, a_j = alpha[i], alpha[j]
            y_i, y_j = y_pm[i], y_pm[j]
            e_i, e_j = errors[i], errors[j]
            if y_i != y_j:
                low, high = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
            else:
                low, high = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
            if low >= high:
                return False
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0:
                return False
            a_j_new = np.clip(a_j - y_j * (e_i - e_j) / eta, low, high)
            if abs(a_j_new - a_j) < 1e-5 * (a_j_new + a_j + 1e-5):
                return False
            a_i_new = a_i + y_i * y_j * (a_j - a_j_new)

            b1 = b - e_i - y_i * (a_i_new - a_i) * K[i, i] - y_j * (a_j_new - a_j) * K[i, j]
            b2 = b - e_j - y_i * (a_i_new - a_i) * K[i, j] - y_j * (a_j_new - a_j) * K[j, j]
            if 0.0 < a_i_new < C:
                b_new = b1
            elif 0.0 < a_j_new < C:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)

            errors += (
                y_i * (a_i_new - a_i) * K[i]
                + y_j * (a_j_new - a_j) * K[j]
                + (b_new - b)
            )
            alpha[i], alpha[j] = a_i_new, a_j_new
            b = b_new
            return True

        def violates(i) -> bool:
            r = errors[i] * y_pm[i]
            return (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)

        def examine(i) -> bool:
            if not violates(i):
                return False
            # second choice: largest |E_i - E_j| among non-bound points,
            # then a seeded random scan as fallback
            non_bound = np.flatnonzero((alpha > 0) & (alpha < C))
            if non_bound.size > 1:
                j = non_bound[np.argmax(np.abs(errors[i] - errors[non_bound]))]
                if take_step(i, int(j)):
                    return True
            for j in rng.permutation(n):
                if take_step(i, int(j)):
                    return True
            return False

        # Alternate full passes with passes over the non-bound set; an
        # update-free full pass means no point can make progress.
        converged = False
        examine_all = True
        for _ in range(self.max_passes):
            if examine_all:
                candidates = range(n)
            else:
                candidates = np.flatnonzero((alpha > 0) & (alpha < C))
            changed = sum(examine(int(i)) for i in candidates)
            if examine_all:
                if changed == 0:
                    converged = True
                    break
                examine_all = False
            elif changed == 0:
                examine_all = True
        if not converged:
            n_violations = int(sum(violates(i) for i in range(n)))
            if n_violations:
                raise ConvergenceError(
                    f"SMO did not converge within {self.max_passes} passes: "
                    f"{n_violations} KKT violations remain (tol={tol})",
                    n_violations=n_violations,
                )

        self.gamma_ = gamma
        self.alpha_ = alpha
        self.intercept_ = float(b)
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * y_pm)[sv]
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = _check_predict(self, X)
        out = np.empty(X.shape[0])
        chunk = max(1, 4_000_000 // max(1, len(self.support_vectors_)))
        for start in range(0, X.shape[0], chunk):
            K = self._rbf(X[start : start + chunk], self.support_vectors_, self.gamma_)
            out[start : start + chunk] = K @ self.dual_coef_ + self.intercept_
        return out

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


class AdaBoostStumps(BaseEstimator, ClassifierMixin):
    """Adaptive boosting of depth-1 threshold stumps.

    Each round picks the (feature, threshold, polarity) stump with the
    lowest weighted error, weights it by half the log odds of being
    right, and re-weights the samples. Stops early on a perfect stump or
    when nothing beats chance.
    """

    def __init__(self, n_rounds: int = 50):
        self.n_rounds = n_rounds

    def fit(self, X, y):
        X, y01 = _check_train(X, y)
        _require_both_classes(y01)
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be at least 1")
        n, d = X.shape
        y_pm = np.where(y01 == 1, 1.0, -1.0)
        order = np.argsort(X, axis=0, kind="stable")  # per-feature sort, reused each round
        sorted_x = np.take_along_axis(X, order, axis=0)
        boundary = np.empty((n + 1, d), dtype=bool)  # valid split positions
        boundary[0] = True
        boundary[n] = True
        boundary[1:n] = sorted_x[1:] > sorted_x[:-1]

        weights = np.full(n, 1.0 / n)
        features, thresholds, polarities, alphas, errors = [], [], [], [], []
        for _ in range(self.n_rounds):
            best = None  # (error, feature, threshold, polarity)
            for f in range(d):
                w_sorted = weights[order[:, f]]
                pos = np.where(y_pm[order[:, f]] > 0, w_sorted, 0.0)
                neg = w_sorted - pos
                # polarity +1 predicts +1 strictly above the threshold;
                # error at split p = positives below + negatives at/above
                err_up = np.concatenate(([0.0], np.cumsum(pos))) + (
                    neg.sum() - np.concatenate(([0.0], np.cumsum(neg)))
                )
                combined = np.minimum(err_up, 1.0 - err_up)
                combined[~boundary[:, f]] = np.inf
                p_best = int(np.argmin(combined))
                e_up = err_up[p_best]
                err, polarity = (e_up, 1) if e_up <= 1.0 - e_up else (1.0 - e_up, -1)
                if best is None or err < best[0]:
                    if p_best == 0:
                        thr = sorted_x[0, f] - 1.0
                    elif p_best == n:
                        thr = sorted_x[n - 1, f]
                    else:
                        thr = 0.5 * (sorted_x[p_best - 1, f] + sorted_x[p_best, f])
                    best = (float(err), f, float(thr), polarity)

            err, f, thr, polarity = best
            if err >= 0.5 - 1e-10:
                break  # nothing beats chance; stop without adding
            alpha = 0.5 * np.log((1.0 - err) / max(err, 1e-12))
            features.append(f)
            thresholds.append(thr)
            polarities.append(polarity)
            alphas.append(alpha)
            errors.append(err)
            if err == 0.0:
                break  # perfect stump classifies alone
            h = np.where(X[:, f] > thr, polarity, -polarity)
            weights *= np.exp(-alpha * y_pm * h)
            weights /= weights.sum()

        self.features_ = np.asarray(features, dtype=np.int64)
        self.thresholds_ = np.asarray(thresholds)
        self.polarities_ = np.asarray(polarities, dtype=np.int64)
        self.alphas_ = np.asarray(alphas)
        self.stump_errors_ = np.asarray(errors)
        self.n_features_in_ = d
        return self

    def decision_function(self, X) -> np.ndarray:
        X = _check_predict(self, X)
        if len(self.features_) == 0:
            return np.zeros(X.shape[0])
        h = np.where(X[:, self.features_] > self.thresholds_, 1, -1) * self.polarities_
        return h @ self.alphas_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


# -- serialization ------------------------------------------------------

_VARIANTS = {
    "naive_bayes": GaussianNaiveBayes,
    "knn": KnnClassifier,
    "svm": SmoSvmClassifier,
    "adaboost": AdaBoostStumps,
}

_FITTED_FIELDS = {
    "naive_bayes": ("class_log_prior_", "theta_", "var_"),
    "knn": ("_X", "_y"),
    "svm": ("gamma_", "alpha_", "intercept_", "support_vectors_", "dual_coef_"),
    "adaboost": ("features_", "thresholds_", "polarities_", "alphas_", "stump_errors_"),
}


def _variant_of(model) -> str:
    for name, cls in _VARIANTS.items():
        if type(model) is cls:
            return name
    raise TypeError(f"unknown classifier type {type(model).__name__}")


def classifier_to_dict(model) -> dict:
    """Versioned JSON-safe snapshot of a fitted classifier."""
    check_is_fitted(model, "n_features_in_")
    variant = _variant_of(model)
    state = {}
    for field in _FITTED_FIELDS[variant]:
        value = getattr(model, field)
        state[field] = value.tolist() if isinstance(value, np.ndarray) else value
    return {
        "format": SERIALIZATION_FORMAT,
        "version": SERIALIZATION_VERSION,
        "variant": variant,
        "params": model.get_params(),
        "n_features_in": model.n_features_in_,
        "state": state,
    }


def classifier_from_dict(blob: dict):
    if blob.get("format") != SERIALIZATION_FORMAT:
        raise ValueError(f"not a classifier blob: format={blob.get('format')!r}")
    if blob.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported classifier blob version {blob.get('version')!r}")
    variant = blob["variant"]
    if variant not in _VARIANTS:
        raise ValueError(f"unknown classifier variant {variant!r}")
    model = _VARIANTS[variant](**blob["params"])
    int_fields = {"_y", "features_", "polarities_"}
    for field, value in blob["state"].items():
        if isinstance(value, list):
            dtype = np.int64 if field in int_fields else np.float64
            value = np.asarray(value, dtype=dtype)
        setattr(model, field, value)
    model.n_features_in_ = int(blob["n_features_in"])
    if variant == "knn":
        model._sq_norms = np.einsum("ij,ij->i", model._X, model._X)
    return model
