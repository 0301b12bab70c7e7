"""Shared value types: power series, appliance kinds, window datasets,
binary activation labels, and confusion counts.

Everything here is immutable after construction and safe to share across
threads or processes. No I/O, no learning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeSeries",
    "ApplianceKind",
    "REFRIGERATOR",
    "ELECTRIC_HEATER",
    "WASHER_DRYER",
    "DISHWASHER",
    "FLEXIBLE_KINDS",
    "kind_from_label",
    "WindowMatrix",
    "ConfusionMatrix",
    "LabelPolicy",
    "DEFAULT_POLICIES",
    "DEFAULT_ON_THRESHOLD_WATTS",
    "confusion_accuracy",
    "label_activation",
]


def _frozen_f64(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled power readings in watts.

    ``start_epoch`` is POSIX seconds of the first sample, ``step`` the
    constant sampling interval in whole seconds. Values must be finite;
    gaps have to be filled or rejected before construction.
    """

    start_epoch: int
    step: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if int(self.step) <= 0:
            raise ValueError(f"step must be a positive number of seconds, got {self.step}")
        vals = _frozen_f64(self.values, ndim=1)
        if not np.all(np.isfinite(vals)):
            raise ValueError("time series values must be finite (no NaN/Inf)")
        object.__setattr__(self, "start_epoch", int(self.start_epoch))
        object.__setattr__(self, "step", int(self.step))
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_epoch(self) -> int:
        """Epoch one step past the last sample (exclusive end)."""
        return self.start_epoch + self.step * len(self.values)

    def epochs(self) -> np.ndarray:
        return self.start_epoch + self.step * np.arange(len(self.values), dtype=np.int64)

    def slice_epochs(self, start_epoch: int, end_epoch: int) -> "TimeSeries":
        """Samples whose timestamp falls in ``[start_epoch, end_epoch)``."""
        if end_epoch <= start_epoch:
            raise ValueError("end_epoch must be greater than start_epoch")
        first = max(0, -(-(start_epoch - self.start_epoch) // self.step))
        last = min(len(self.values), -(-(end_epoch - self.start_epoch) // self.step))
        if first >= last:
            raise ValueError(
                f"series [{self.start_epoch}, {self.end_epoch}) has no samples "
                f"in [{start_epoch}, {end_epoch})"
            )
        return TimeSeries(
            start_epoch=self.start_epoch + first * self.step,
            step=self.step,
            values=self.values[first:last],
        )

    def with_values(self, values) -> "TimeSeries":
        """Same time base, new values (used by filters)."""
        return TimeSeries(self.start_epoch, self.step, values)


@dataclass(frozen=True, order=True)
class ApplianceKind:
    """Appliance identity. Four named kinds form the flexibility-eligible
    set; anything else is carried verbatim as an "other" kind."""

    name: str

    def __str__(self) -> str:
        return self.name

    @property
    def is_flexible(self) -> bool:
        return self in FLEXIBLE_KINDS


REFRIGERATOR = ApplianceKind("refrigerator")
ELECTRIC_HEATER = ApplianceKind("electric_heater")
WASHER_DRYER = ApplianceKind("washer_dryer")
DISHWASHER = ApplianceKind("dishwasher")

FLEXIBLE_KINDS: tuple[ApplianceKind, ...] = (
    REFRIGERATOR,
    ELECTRIC_HEATER,
    WASHER_DRYER,
    DISHWASHER,
)

# REDD labels.dat spellings included ("electric_heat", and the dataset's
# actual "dishwaser" typo).
_CANONICAL_LABELS = {
    "refrigerator": REFRIGERATOR,
    "electric_heat": ELECTRIC_HEATER,
    "electric_heater": ELECTRIC_HEATER,
    "washer_dryer": WASHER_DRYER,
    "dishwasher": DISHWASHER,
    "dishwaser": DISHWASHER,
}


def kind_from_label(label: str) -> ApplianceKind:
    """Map a raw channel label to an ApplianceKind (unknown labels pass
    through as non-flexible kinds)."""
    return _CANONICAL_LABELS.get(label.strip().lower(), ApplianceKind(label.strip()))


@dataclass(frozen=True)
class WindowMatrix:
    """Fixed-length sliding windows (rows) with per-row binary labels."""

    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        rows = _frozen_f64(self.rows, ndim=2)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        if labels.ndim != 1:
            raise ValueError("labels must be a 1-d sequence")
        if len(rows) != len(labels):
            raise ValueError(f"{len(rows)} rows but {len(labels)} labels")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be binary {0, 1}")
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def w(self) -> int:
        """Window length (number of features per row)."""
        return self.rows.shape[1]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Class-indexed count matrix: ``counts[i, j]`` = instances of true
    class ``i`` predicted as class ``j``."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"counts must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified instances: trace over total."""
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty (total count is zero)")
    return float(np.trace(cm.counts)) / total


@dataclass(frozen=True)
class LabelPolicy:
    """How on/off ground truth is derived from an appliance power series."""

    on_threshold_watts: float
    min_on_duration_steps: int = 1

    def __post_init__(self) -> None:
        if not self.on_threshold_watts > 0:
            raise ValueError("on_threshold_watts must be strictly positive")
        if int(self.min_on_duration_steps) < 1:
            raise ValueError("min_on_duration_steps must be at least 1")
        object.__setattr__(self, "on_threshold_watts", float(self.on_threshold_watts))
        object.__setattr__(self, "min_on_duration_steps", int(self.min_on_duration_steps))


# Thresholds sit between standby and active draw for each appliance.
DEFAULT_POLICIES: dict[ApplianceKind, LabelPolicy] = {
    REFRIGERATOR: LabelPolicy(on_threshold_watts=50.0),
    ELECTRIC_HEATER: LabelPolicy(on_threshold_watts=20.0),
    WASHER_DRYER: LabelPolicy(on_threshold_watts=20.0),
    DISHWASHER: LabelPolicy(on_threshold_watts=10.0),
}

DEFAULT_ON_THRESHOLD_WATTS = 15.0


def label_activation(appliance: TimeSeries, policy: LabelPolicy) -> np.ndarray:
    """Binary on/off sequence for an appliance power series.

    A sample is on (1) iff it belongs to a run of at least
    ``min_on_duration_steps`` consecutive samples strictly above
    ``on_threshold_watts``.
    """
    above = appliance.values > policy.on_threshold_watts
    if policy.min_on_duration_steps == 1:
        return above.astype(np.int64)
    edges = np.flatnonzero(np.diff(np.r_[0, above.astype(np.int8), 0]))
    out = np.zeros(len(above), dtype=np.int64)
    for start, stop in zip(edges[0::2], edges[1::2]):
        if stop - start >= policy.min_on_duration_steps:
            out[start:stop] = 1
    return out
