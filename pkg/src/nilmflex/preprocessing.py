"""Signal conditioning and dataset assembly: causal median filtering,
sliding-window extraction, min-max scaling, and the cross-building
train/test protocol (train on a set of buildings, test on a held-out one).

Everything is causal: a value at time t never depends on samples after t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import PipelineConfig
from .core import ApplianceKind, TimeSeries, WindowMatrix, label_activation
from .redd import BuildingData

__all__ = [
    "median_filter",
    "make_windows",
    "WindowScaler",
    "DatasetBundle",
    "ExperimentSplit",
    "build_dataset",
    "build_experiment",
]


def _lower_median(block: np.ndarray):
    # lower median keeps even-length windows integer-deterministic
    m = block.shape[-1]
    return np.sort(block, axis=-1)[..., (m - 1) // 2]


def median_filter(ts: TimeSeries, k: int = 6) -> TimeSeries:
    """Trailing (causal) median of the k samples ending at each position.

    The first k-1 outputs use the available prefix; even-length windows
    take the lower median.
    """
    if k < 1:
        raise ValueError("median window k must be at least 1")
    n = len(ts)
    if k > n:
        raise ValueError(f"median window k={k} exceeds series length {n}")
    if k == 1:
        return ts
    out = np.empty(n)
    for t in range(k - 1):
        out[t] = _lower_median(ts.values[: t + 1])
    out[k - 1 :] = _lower_median(sliding_window_view(ts.values, k))
    return ts.with_values(out)


def make_windows(aggregate: TimeSeries, labels, w: int = 10) -> WindowMatrix:
    """Causal windows over the aggregate: row t holds samples t-w+1..t and
    carries the label at t, for t = w-1 .. len-1."""
    labels = np.asarray(labels)
    if len(labels) != len(aggregate):
        raise ValueError(f"aggregate has {len(aggregate)} samples but {len(labels)} labels")
    if w < 1:
        raise ValueError("window length must be positive")
    if len(aggregate) < w:
        raise ValueError(f"series of length {len(aggregate)} is shorter than window {w}")
    rows = sliding_window_view(aggregate.values, w)
    return WindowMatrix(rows=rows, labels=labels[w - 1 :])


class WindowScaler(BaseEstimator, TransformerMixin):
    """Min-max scaler over all entries of the training windows.

    Maps x to (x - min) / (max - min) clamped into [0, 1]; test-time
    values outside the training range clamp rather than extrapolate.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            raise ValueError("cannot fit scaler on empty data")
        self.min_w_ = float(X.min())
        self.max_w_ = float(X.max())
        if self.max_w_ <= self.min_w_:
            raise ValueError(
                f"degenerate training data: all values equal {self.min_w_} "
                "(min-max scaling undefined)"
            )
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "min_w_")
        X = np.asarray(X, dtype=np.float64)
        scaled = (X - self.min_w_) / (self.max_w_ - self.min_w_)
        return np.clip(scaled, 0.0, 1.0)

    def to_dict(self) -> dict:
        check_is_fitted(self, "min_w_")
        return {"min_w": self.min_w_, "max_w": self.max_w_}

    @classmethod
    def from_dict(cls, blob: dict) -> "WindowScaler":
        scaler = cls()
        scaler.min_w_ = float(blob["min_w"])
        scaler.max_w_ = float(blob["max_w"])
        return scaler


@dataclass(frozen=True)
class DatasetBundle:
    """Windows and labels for one train/test split.

    The window rows are shared by every appliance (they come from the
    aggregate alone); only the label sequences differ per appliance.
    Rows are already scaled into [0, 1] by the scaler fitted on the
    training rows only.
    """

    train_rows: np.ndarray
    test_rows: np.ndarray
    train_labels: dict[ApplianceKind, np.ndarray]
    test_labels: dict[ApplianceKind, np.ndarray]
    scaler: WindowScaler


@dataclass(frozen=True)
class ExperimentSplit:
    train: WindowMatrix
    test: WindowMatrix
    scaler: WindowScaler


def _building_windows(
    building: BuildingData,
    appliances: Sequence[ApplianceKind],
    config: PipelineConfig,
) -> tuple[np.ndarray, dict[ApplianceKind, np.ndarray]]:
    """Median-filter, label and window one building (unscaled rows)."""
    aggregate = median_filter(building.mains, config.median_k)
    if len(aggregate) < config.window:
        raise ValueError(
            f"building {building.building_id} has {len(aggregate)} samples, "
            f"fewer than the window length {config.window}"
        )
    rows = sliding_window_view(aggregate.values, config.window)
    labels: dict[ApplianceKind, np.ndarray] = {}
    for kind in appliances:
        if kind not in building.appliances:
            raise ValueError(f"building {building.building_id} has no {kind} channel")
        channel = building.appliances[kind]
        if config.filter_appliances:
            channel = median_filter(channel, config.median_k)
        activation = label_activation(channel, config.policy_for(kind))
        labels[kind] = activation[config.window - 1 :]
    return rows, labels


def build_dataset(
    buildings: Mapping[int, BuildingData],
    test_building: int,
    appliances: Sequence[ApplianceKind],
    config: PipelineConfig | None = None,
    train_buildings: Sequence[int] | None = None,
) -> DatasetBundle:
    """Assemble the cross-building protocol: concatenate windows from the
    training buildings, hold out ``test_building``, and fit the min-max
    scaler on training rows only."""
    config = config or PipelineConfig()
    if test_building not in buildings:
        raise ValueError(f"test building {test_building} not among the loaded buildings")
    if train_buildings is None:
        train_ids = sorted(b for b in buildings if b != test_building)
    else:
        train_ids = sorted(train_buildings)
        if test_building in train_ids:
            raise ValueError(
                f"building {test_building} cannot be in both the training and test sets"
            )
        missing = [b for b in train_ids if b not in buildings]
        if missing:
            raise ValueError(f"training building {missing[0]} not among the loaded buildings")
    if not train_ids:
        raise ValueError("need at least one training building besides the test building")

    train_parts = []
    train_labels: dict[ApplianceKind, list[np.ndarray]] = {k: [] for k in appliances}
    for bid in train_ids:
        rows, labels = _building_windows(buildings[bid], appliances, config)
        train_parts.append(rows)
        for kind in appliances:
            train_labels[kind].append(labels[kind])
    test_rows, test_labels = _building_windows(buildings[test_building], appliances, config)

    train_rows = np.concatenate(train_parts, axis=0)
    scaler = WindowScaler().fit(train_rows)
    return DatasetBundle(
        train_rows=scaler.transform(train_rows),
        test_rows=scaler.transform(test_rows),
        train_labels={k: np.concatenate(v) for k, v in train_labels.items()},
        test_labels=test_labels,
        scaler=scaler,
    )


def build_experiment(
    buildings: Mapping[int, BuildingData],
    test_building: int,
    appliance: ApplianceKind,
    config: PipelineConfig | None = None,
) -> ExperimentSplit:
    """Train/test window matrices for one appliance under the protocol."""
    dataset = build_dataset(buildings, test_building, [appliance], config)
    return ExperimentSplit(
        train=WindowMatrix(dataset.train_rows, dataset.train_labels[appliance]),
        test=WindowMatrix(dataset.test_rows, dataset.test_labels[appliance]),
        scaler=dataset.scaler,
    )
