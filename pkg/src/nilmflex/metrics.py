"""Scoring and the full experiment grid: confusion matrices, accuracy and
companion rates, and the per-(appliance, method, feature-mode) evaluation
table with wall-times.

Accuracy is the headline number; precision/recall/F1 ride along because
the on/off classes are heavily imbalanced for some appliances and
accuracy alone can flatter a majority-class predictor.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .classifiers import (
    AdaBoostStumps,
    GaussianNaiveBayes,
    KnnClassifier,
    SmoSvmClassifier,
)
from .config import PipelineConfig
from .core import FLEXIBLE_KINDS, ApplianceKind, ConfusionMatrix, confusion_accuracy
from .preprocessing import build_dataset
from .rbm import BernoulliRbm
from .redd import BuildingData

__all__ = [
    "score",
    "binary_rates",
    "CellResult",
    "EvaluationResult",
    "METHOD_NAMES",
    "make_classifier",
    "subsample_rows",
    "evaluate_experiment",
]

METHOD_NAMES = ("naive_bayes", "knn", "svm", "adaboost")

CSV_COLUMNS = (
    "appliance",
    "method",
    "features",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "train_s",
    "predict_s",
    "n_test",
    "error",
)


def score(predictions, truth) -> ConfusionMatrix:
    """Count matrix A[i, j] = instances with truth i predicted j."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise ValueError(
            f"predictions {predictions.shape} and truth {truth.shape} must be "
            "1-d and equal length"
        )
    if predictions.size == 0:
        raise ValueError("cannot score empty inputs")
    for name, arr in (("predictions", predictions), ("truth", truth)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary {{0, 1}}")
    counts = np.bincount(truth * 2 + predictions, minlength=4).reshape(2, 2)
    return ConfusionMatrix(counts)


def binary_rates(cm: ConfusionMatrix) -> dict[str, float]:
    """Accuracy plus positive-class precision/recall/F1 (0.0 on empty
    denominators)."""
    tn, fp = int(cm.counts[0, 0]), int(cm.counts[0, 1])
    fn, tp = int(cm.counts[1, 0]), int(cm.counts[1, 1])
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": confusion_accuracy(cm),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


@dataclass
class CellResult:
    """One cell of the evaluation grid; ``error`` is set instead of the
    metric fields when that cell failed."""

    appliance: str
    method: str
    features: str
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    train_s: float | None = None
    predict_s: float | None = None
    n_test: int | None = None
    error: str | None = None


@dataclass
class EvaluationResult:
    cells: list[CellResult]

    def cell(self, appliance: str, method: str, features: str) -> CellResult:
        for c in self.cells:
            if (c.appliance, c.method, c.features) == (appliance, method, features):
                return c
        raise KeyError(f"no cell ({appliance}, {method}, {features})")

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump([asdict(c) for c in self.cells], fh, indent=2)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for c in self.cells:
                row = {k: ("" if v is None else v) for k, v in asdict(c).items()}
                writer.writerow(row)


def make_classifier(method: str, config: PipelineConfig):
    if method == "naive_bayes":
        return GaussianNaiveBayes(var_floor_ratio=config.nb_var_floor)
    if method == "knn":
        return KnnClassifier(k=config.knn_k)
    if method == "svm":
        return SmoSvmClassifier(
            C=config.svm_c, gamma=config.svm_gamma, tol=config.svm_tol,
            random_state=config.seed,
        )
    if method == "adaboost":
        return AdaBoostStumps(n_rounds=config.adaboost_rounds)
    raise ValueError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")


def subsample_rows(X, y, cap: int, seed: int):
    """Seeded stratified subsample keeping class balance; no-op when the
    data fits under the cap (or cap <= 0)."""
    if cap <= 0 or len(X) <= cap:
        return X, y
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        quota = max(1, int(round(cap * len(idx) / len(y))))
        keep.append(rng.choice(idx, size=min(quota, len(idx)), replace=False))
    chosen = np.sort(np.concatenate(keep))
    return X[chosen], y[chosen]


def _fit_rbm(rows: np.ndarray, config: PipelineConfig, seed_offset: int = 0) -> BernoulliRbm:
    return BernoulliRbm(
        n_hidden=config.rbm_hidden,
        gibbs_steps=config.rbm_gibbs_steps,
        learning_rate=config.rbm_learning_rate,
        momentum=config.rbm_momentum,
        weight_decay=config.rbm_weight_decay,
        n_epochs=config.rbm_epochs,
        batch_size=config.rbm_batch_size,
        random_state=config.seed + seed_offset,
    ).fit(rows)


def evaluate_experiment(
    buildings: Mapping[int, BuildingData],
    config: PipelineConfig | None = None,
    test_building: int = 1,
    appliances: Sequence[ApplianceKind] = FLEXIBLE_KINDS,
    methods: Sequence[str] = METHOD_NAMES,
    feature_modes: Sequence[str] = ("raw", "rbm"),
    train_buildings: Sequence[int] | None = None,
) -> EvaluationResult:
    """Train and score every requested (appliance, method, feature-mode)
    cell on the cross-building split.

    The table is row-complete: a failing cell is reported with an error
    annotation instead of aborting the grid.
    """
    config = config or PipelineConfig()
    for mode in feature_modes:
        if mode not in ("raw", "rbm"):
            raise ValueError(f"unknown feature mode {mode!r}")
    dataset = build_dataset(buildings, test_building, appliances, config, train_buildings)

    features: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    if "raw" in feature_modes:
        features["raw"] = (dataset.train_rows, dataset.test_rows)
    shared_rbm: BernoulliRbm | None = None
    if "rbm" in feature_modes and not config.rbm_per_appliance:
        shared_rbm = _fit_rbm(dataset.train_rows, config)
        features["rbm"] = (
            shared_rbm.transform(dataset.train_rows),
            shared_rbm.transform(dataset.test_rows),
        )

    cells: list[CellResult] = []
    for i, kind in enumerate(appliances):
        per_appliance = dict(features)
        if "rbm" in feature_modes and config.rbm_per_appliance:
            # training is unsupervised on shared windows, so per-appliance
            # models differ only through their seeds
            rbm = _fit_rbm(dataset.train_rows, config, seed_offset=1 + i)
            per_appliance["rbm"] = (
                rbm.transform(dataset.train_rows),
                rbm.transform(dataset.test_rows),
            )
        for mode in feature_modes:
            train_X, test_X = per_appliance[mode]
            train_y = dataset.train_labels[kind]
            test_y = dataset.test_labels[kind]
            for method in methods:
                cell = CellResult(appliance=kind.name, method=method, features=mode)
                try:
                    model = make_classifier(method, config)
                    fit_X, fit_y = train_X, train_y
                    if method == "svm":
                        fit_X, fit_y = subsample_rows(
                            train_X, train_y, config.svm_train_cap, config.seed
                        )
                    t0 = time.perf_counter()
                    model.fit(fit_X, fit_y)
                    t1 = time.perf_counter()
                    predicted = model.predict(test_X)
                    t2 = time.perf_counter()
                    rates = binary_rates(score(predicted, test_y))
                    cell.accuracy = rates["accuracy"]
                    cell.precision = rates["precision"]
                    cell.recall = rates["recall"]
                    cell.f1 = rates["f1"]
                    cell.train_s = t1 - t0
                    cell.predict_s = t2 - t1
                    cell.n_test = len(test_y)
                except Exception as exc:  # annotate, never omit the cell
                    cell.error = f"{type(exc).__name__}: {exc}"
                cells.append(cell)
    return EvaluationResult(cells)
