"""Building-flexibility accounting from per-appliance detections: energy
shares, the flexible/inflexible load decomposition, and summary
statistics.

Two distinct flexibility numbers are reported and must not be conflated:
``share_sum_pct`` (sum of per-appliance energy shares of the total) and
``flexibility_pct`` (mean over day-long windows of the flexible fraction
of consumption in that window).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ApplianceKind, TimeSeries

__all__ = [
    "ApplianceSummary",
    "FlexReport",
    "appliance_stats",
    "energy_share",
    "decompose",
]

SECONDS_PER_DAY = 86_400


def appliance_stats(ts: TimeSeries) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation in watts."""
    if len(ts) == 0:
        raise ValueError("cannot compute statistics of an empty series")
    return float(ts.values.mean()), float(ts.values.std())


def energy_share(appliance: TimeSeries, total: TimeSeries) -> float:
    """Percentage of the building total consumed by one appliance."""
    if (
        appliance.start_epoch != total.start_epoch
        or appliance.step != total.step
        or len(appliance) != len(total)
    ):
        raise ValueError("appliance and total series must be aligned")
    denom = float(total.values.sum())
    if denom == 0.0:
        raise ValueError("total consumption is zero; share undefined")
    return 100.0 * float(appliance.values.sum()) / denom


@dataclass(frozen=True)
class ApplianceSummary:
    """Share and moments of one appliance's attributed (detected-on)
    power series."""

    share_pct: float
    mean_watts: float
    std_watts: float


@dataclass(frozen=True)
class FlexReport:
    appliances: dict[ApplianceKind, ApplianceSummary]
    flexible_load: TimeSeries
    inflexible_load: TimeSeries
    flexibility_pct: float          # mean of per-day flexible fractions
    share_sum_pct: float            # sum of per-appliance energy shares
    day_window_pcts: tuple[float, ...]
    clamp_count: int                # samples where raw flexible exceeded total


def _attributed_power(
    total: TimeSeries,
    mask: np.ndarray,
    profile: TimeSeries | float,
    kind: ApplianceKind,
) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (len(total),):
        raise ValueError(
            f"{kind} detections have length {mask.shape}, expected {len(total)}"
        )
    if isinstance(profile, TimeSeries):
        if (
            profile.start_epoch != total.start_epoch
            or profile.step != total.step
            or len(profile) != len(total)
        ):
            raise ValueError(f"{kind} power profile is not aligned with the total series")
        power = profile.values
    else:
        power = float(profile)  # mean-on-power estimate
    return mask.astype(np.float64) * power


def decompose(
    total: TimeSeries,
    detections: Mapping[ApplianceKind, np.ndarray],
    profiles: Mapping[ApplianceKind, TimeSeries | float],
) -> FlexReport:
    """Split the total load into flexible and inflexible components.

    ``detections`` maps each appliance to its binary on/off sequence,
    aligned with ``total``. ``profiles`` supplies the power attributed
    while on: the ground-truth channel when evaluating, or a constant
    mean-on-power estimate in pure detection deployments.

    The flexible series is capped at the total so the two components sum
    to the total exactly; samples needing the cap are counted in
    ``clamp_count``.
    """
    denom = float(total.values.sum())
    if denom == 0.0:
        raise ValueError("total consumption is zero; flexibility undefined")

    per_appliance: dict[ApplianceKind, np.ndarray] = {}
    for kind, mask in detections.items():
        if kind not in profiles:
            raise ValueError(f"no power profile for {kind}")
        per_appliance[kind] = _attributed_power(total, mask, profiles[kind], kind)

    raw_flexible = (
        np.sum(list(per_appliance.values()), axis=0)
        if per_appliance
        else np.zeros(len(total))
    )
    clamp_count = int(np.count_nonzero(raw_flexible > total.values))
    flexible = np.minimum(raw_flexible, total.values)
    inflexible = total.values - flexible

    steps_per_day = max(1, SECONDS_PER_DAY // total.step)
    day_pcts = []
    for start in range(0, len(total), steps_per_day):
        stop = start + steps_per_day
        day_total = float(total.values[start:stop].sum())
        if day_total > 0:
            day_pcts.append(100.0 * float(flexible[start:stop].sum()) / day_total)
    if not day_pcts:
        raise ValueError("no day window with non-zero consumption")

    summaries = {
        kind: ApplianceSummary(
            share_pct=100.0 * float(series.sum()) / denom,
            mean_watts=float(series.mean()),
            std_watts=float(series.std()),
        )
        for kind, series in per_appliance.items()
    }
    return FlexReport(
        appliances=summaries,
        flexible_load=total.with_values(flexible),
        inflexible_load=total.with_values(inflexible),
        flexibility_pct=float(np.mean(day_pcts)),
        share_sum_pct=float(sum(s.share_pct for s in summaries.values())),
        day_window_pcts=tuple(day_pcts),
        clamp_count=clamp_count,
    )


def report_to_dict(report: FlexReport) -> dict:
    return {
        "flexibility_pct": report.flexibility_pct,
        "share_sum_pct": report.share_sum_pct,
        "day_window_pcts": list(report.day_window_pcts),
        "clamp_count": report.clamp_count,
        "appliances": {
            kind.name: {
                "share_pct": s.share_pct,
                "mean_watts": s.mean_watts,
                "std_watts": s.std_watts,
            }
            for kind, s in report.appliances.items()
        },
        "series": {
            "start_epoch": report.flexible_load.start_epoch,
            "step": report.flexible_load.step,
            "n_samples": len(report.flexible_load),
        },
    }


def write_report(report: FlexReport, json_path: str) -> None:
    """JSON report plus per-series CSV files referenced from it."""
    base = json_path[:-5] if json_path.endswith(".json") else json_path
    blob = report_to_dict(report)
    blob["series"]["flexible_csv"] = f"{base}_flexible.csv"
    blob["series"]["inflexible_csv"] = f"{base}_inflexible.csv"
    for name, series in (
        (blob["series"]["flexible_csv"], report.flexible_load),
        (blob["series"]["inflexible_csv"], report.inflexible_load),
    ):
        epochs = series.epochs()
        with open(name, "w") as fh:
            fh.write("epoch,watts\n")
            for t, w in zip(epochs, series.values):
                fh.write(f"{t},{w!r}\n")
    with open(json_path, "w") as fh:
        json.dump(blob, fh, indent=2)
