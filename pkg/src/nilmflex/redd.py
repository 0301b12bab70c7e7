"""REDD-style low-frequency data: channel/label parsing, alignment of
appliance channels to the mains aggregate, and resampling to a common step.

On-disk layout: ``<root>/house_<k>/labels.dat`` plus
``<root>/house_<k>/channel_<n>.dat``; channel lines are exactly
``"%d %f\n"`` (epoch seconds, watts, single ASCII space).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from .core import ApplianceKind, TimeSeries, kind_from_label

__all__ = [
    "BuildingData",
    "ChannelFormatError",
    "AlignmentError",
    "RawChannel",
    "parse_channel_file",
    "parse_labels_file",
    "serialize_channel",
    "align_and_resample",
    "load_building",
    "load_buildings",
]

MAINS_LABEL = "mains"


class ChannelFormatError(ValueError):
    """Malformed channel or labels file; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class AlignmentError(ValueError):
    """Channels cannot be reconciled onto a common grid."""


RawChannel = tuple[np.ndarray, np.ndarray]  # (epochs int64, watts float64)


@dataclass(frozen=True)
class BuildingData:
    """One building after alignment: summed mains plus per-kind appliance
    series, all sharing start epoch and step."""

    building_id: int
    mains: TimeSeries
    appliances: dict[ApplianceKind, TimeSeries]
    label_map: dict[int, str]

    def __post_init__(self) -> None:
        for kind, series in self.appliances.items():
            if series.start_epoch != self.mains.start_epoch or series.step != self.mains.step:
                raise ValueError(f"appliance {kind} is not aligned with mains")
            if len(series) != len(self.mains):
                raise ValueError(f"appliance {kind} length differs from mains")


def _scan_channel_lines(text: str) -> RawChannel:
    """Slow line-by-line parse used to produce precise error locations."""
    epochs: list[int] = []
    watts: list[float] = []
    for i, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise ChannelFormatError(
                f"line {i}: expected '<epoch> <watts>', got {line!r}", line_number=i
            )
        try:
            epochs.append(int(parts[0]))
            watts.append(float(parts[1]))
        except ValueError:
            raise ChannelFormatError(
                f"line {i}: expected '<epoch> <watts>', got {line!r}", line_number=i
            ) from None
        if not np.isfinite(watts[-1]):
            raise ChannelFormatError(f"line {i}: non-finite reading {parts[1]!r}", line_number=i)
    return np.asarray(epochs, dtype=np.int64), np.asarray(watts, dtype=np.float64)


def parse_channel_file(data: bytes | str) -> RawChannel:
    """Parse a channel file into (epochs, watts) arrays in file order.

    Epochs need not be gap-free but must be non-decreasing. Malformed
    lines raise :class:`ChannelFormatError` with the line number.
    """
    text = data.decode("ascii") if isinstance(data, bytes) else data
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            sep=" ",
            header=None,
            names=("epoch", "watts"),
            dtype={"epoch": np.int64, "watts": np.float64},
        )
        epochs = frame["epoch"].to_numpy()
        watts = frame["watts"].to_numpy()
        if not np.all(np.isfinite(watts)):
            raise ValueError("non-finite reading")
    except pd.errors.EmptyDataError:
        epochs = np.empty(0, dtype=np.int64)
        watts = np.empty(0, dtype=np.float64)
    except (ValueError, pd.errors.ParserError):
        # Re-parse slowly only to name the bad line.
        epochs, watts = _scan_channel_lines(text)
    if len(epochs) > 1:
        drops = np.flatnonzero(np.diff(epochs) < 0)
        if drops.size:
            i = int(drops[0]) + 2  # 1-based line of the out-of-order epoch
            raise ChannelFormatError(
                f"line {i}: timestamps are not monotonic "
                f"({epochs[drops[0] + 1]} after {epochs[drops[0]]})",
                line_number=i,
            )
    return epochs, watts


def parse_labels_file(data: bytes | str) -> dict[int, str]:
    """Parse labels.dat into a channel-number to raw-label map."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    labels: dict[int, str] = {}
    for i, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split(None, 1)
        if len(parts) != 2 or not parts[0].isdigit():
            raise ChannelFormatError(
                f"line {i}: expected '<channel> <label>', got {line!r}", line_number=i
            )
        channel = int(parts[0])
        if channel in labels:
            raise ChannelFormatError(f"line {i}: duplicate channel {channel}", line_number=i)
        labels[channel] = parts[1].strip()
    return labels


def serialize_channel(epochs, watts) -> str:
    """Render (epochs, watts) in the on-disk channel format ``"%d %f\n"``."""
    epochs = np.asarray(epochs)
    watts = np.asarray(watts)
    return "".join(f"{int(t):d} {w:f}\n" for t, w in zip(epochs, watts))


def _resample_to_grid(
    channel: RawChannel, t0: int, step: int, n_bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean-aggregate one raw channel onto the grid starting at ``t0``.

    Returns (values, filled) where empty bins hold NaN and ``filled`` marks
    bins that had at least one source sample.
    """
    epochs, watts = channel
    inside = (epochs >= t0) & (epochs < t0 + step * n_bins)
    bins = (epochs[inside] - t0) // step
    counts = np.bincount(bins, minlength=n_bins).astype(np.float64)
    sums = np.bincount(bins, weights=watts[inside], minlength=n_bins)
    filled = counts > 0
    values = np.full(n_bins, np.nan)
    np.divide(sums, counts, out=values, where=filled)
    # Seed the fill with the most recent sample before the window, if any.
    if not filled[0]:
        before = np.flatnonzero(epochs < t0)
        if before.size:
            values[0] = watts[before[-1]]
            filled = filled.copy()
            filled[0] = True
    return values, filled


def _gap_runs(filled: np.ndarray) -> list[tuple[int, int]]:
    """[start, stop) index ranges of consecutive empty bins."""
    edges = np.flatnonzero(np.diff(np.r_[1, filled.astype(np.int8), 1]))
    return [(int(s), int(e)) for s, e in zip(edges[0::2], edges[1::2])]


def _forward_fill(values: np.ndarray) -> np.ndarray:
    mask = np.isnan(values)
    idx = np.where(~mask, np.arange(len(values)), 0)
    np.maximum.accumulate(idx, out=idx)
    return values[idx]


def align_and_resample(
    channels: Mapping[int, RawChannel],
    label_map: Mapping[int, str],
    building_id: int,
    target_step: int = 3,
    gap_limit: int = 20,
    strict_gaps: bool = True,
) -> BuildingData:
    """Reconcile raw channels onto a shared grid of ``target_step`` seconds.

    Mains channels (label "mains") are summed; channels sharing an
    appliance kind are summed as well (split-phase appliances). Finer
    samples are mean-aggregated per bin; gaps of at most ``gap_limit``
    bins are forward-filled. A longer gap raises :class:`AlignmentError`
    when ``strict_gaps`` is set, otherwise the grid is split at long gaps
    and the longest contiguous segment is kept for every series.
    """
    mains_nums = sorted(n for n, lbl in label_map.items() if lbl.strip().lower() == MAINS_LABEL)
    if not mains_nums:
        raise AlignmentError(f"building {building_id}: no mains channel in label map")
    for num in label_map:
        if num not in channels:
            raise AlignmentError(f"building {building_id}: channel {num} has no data")

    appliance_nums: dict[ApplianceKind, list[int]] = {}
    for num, lbl in label_map.items():
        if num in mains_nums:
            continue
        appliance_nums.setdefault(kind_from_label(lbl), []).append(num)

    used = list(mains_nums) + [n for nums in appliance_nums.values() for n in nums]
    empty = [n for n in used if channels[n][0].size == 0]
    if empty:
        raise AlignmentError(f"building {building_id}: channel {empty[0]} is empty")

    mains_first = min(int(channels[n][0][0]) for n in mains_nums)
    mains_last = max(int(channels[n][0][-1]) for n in mains_nums)
    t0 = mains_first
    t1 = mains_last
    for kind, nums in appliance_nums.items():
        first = min(int(channels[n][0][0]) for n in nums)
        last = max(int(channels[n][0][-1]) for n in nums)
        if first > mains_last or last < mains_first:
            raise AlignmentError(
                f"building {building_id}: channel {nums[0]} ({kind}) does not "
                f"overlap the mains time range"
            )
        t0 = max(t0, first)
        t1 = min(t1, last)
    if t0 > t1:
        raise AlignmentError(f"building {building_id}: channels share no common time range")

    n_bins = (t1 - t0) // target_step + 1

    def grid_series(nums: list[int], what: str) -> tuple[np.ndarray, np.ndarray]:
        """Summed, gap-annotated grid values for a channel group."""
        total = np.zeros(n_bins)
        bad = np.zeros(n_bins, dtype=bool)
        for num in nums:
            values, filled = _resample_to_grid(channels[num], t0, target_step, n_bins)
            long_gaps = [(s, e) for s, e in _gap_runs(filled) if e - s > gap_limit]
            if long_gaps and strict_gaps:
                s, e = long_gaps[0]
                raise AlignmentError(
                    f"building {building_id}: channel {num} ({what}) has a gap of "
                    f"{e - s} steps (limit {gap_limit}); pass strict_gaps=False to split"
                )
            for s, e in long_gaps:
                bad[s:e] = True
            total += _forward_fill(values)
        return total, bad

    mains_values, mains_bad = grid_series(mains_nums, MAINS_LABEL)
    bad = mains_bad
    appliance_values: dict[ApplianceKind, np.ndarray] = {}
    for kind, nums in sorted(appliance_nums.items()):
        values, kind_bad = grid_series(nums, kind.name)
        appliance_values[kind] = values
        bad = bad | kind_bad

    # Keep the longest segment clear of every channel's long gaps.
    seg_start, seg_stop = 0, n_bins
    if bad.any():
        good_runs = _gap_runs(~bad)  # runs of good bins
        if not good_runs:
            raise AlignmentError(f"building {building_id}: no gap-free segment remains")
        seg_start, seg_stop = max(good_runs, key=lambda r: r[1] - r[0])

    start_epoch = t0 + seg_start * target_step
    mains = TimeSeries(start_epoch, target_step, mains_values[seg_start:seg_stop])
    appliances = {
        kind: TimeSeries(start_epoch, target_step, values[seg_start:seg_stop])
        for kind, values in appliance_values.items()
    }
    return BuildingData(
        building_id=building_id,
        mains=mains,
        appliances=appliances,
        label_map=dict(label_map),
    )


def load_building(
    root: str | os.PathLike,
    house_id: int,
    target_step: int = 3,
    gap_limit: int = 20,
    strict_gaps: bool = True,
) -> BuildingData:
    """Read ``<root>/house_<id>`` and align it onto the target grid."""
    house_dir = os.path.join(os.fspath(root), f"house_{house_id}")
    labels_path = os.path.join(house_dir, "labels.dat")
    with open(labels_path, "rb") as fh:
        label_map = parse_labels_file(fh.read())
    channels: dict[int, RawChannel] = {}
    for num in label_map:
        with open(os.path.join(house_dir, f"channel_{num}.dat"), "rb") as fh:
            channels[num] = parse_channel_file(fh.read())
    return align_and_resample(
        channels,
        label_map,
        building_id=house_id,
        target_step=target_step,
        gap_limit=gap_limit,
        strict_gaps=strict_gaps,
    )


def load_buildings(
    root: str | os.PathLike,
    house_ids,
    target_step: int = 3,
    gap_limit: int = 20,
    strict_gaps: bool = True,
) -> dict[int, BuildingData]:
    return {
        hid: load_building(root, hid, target_step, gap_limit, strict_gaps) for hid in house_ids
    }
