"""Deterministic synthetic households so the full pipeline, tests, and CI
run without any external dataset.

Shapes are only required to be separable-in-principle and compatible
with the on-disk channel format, not physically calibrated: a
duty-cycled refrigerator, a thermostat-driven electric heater over a
first-order thermal model, multi-stage washer/dishwasher programs at
Poisson-scheduled start times, and a non-negative random-walk base load.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DISHWASHER,
    ELECTRIC_HEATER,
    REFRIGERATOR,
    WASHER_DRYER,
    ApplianceKind,
    TimeSeries,
)
from .redd import BuildingData, serialize_channel

__all__ = [
    "FridgeSpec",
    "HeaterSpec",
    "ProgramSpec",
    "SynthSpec",
    "SynthBuilding",
    "generate",
    "generate_corpus",
    "write_redd_layout",
]


@dataclass(frozen=True)
class FridgeSpec:
    power_watts: float = 120.0
    period_s: float = 1800.0
    duty: float = 0.45
    period_jitter: float = 0.15


@dataclass(frozen=True)
class HeaterSpec:
    power_watts: float = 1500.0
    setpoint_c: float = 20.0
    hysteresis_c: float = 0.5
    ambient_c: float = 8.0
    ambient_swing_c: float = 4.0
    thermal_tau_s: float = 2400.0
    heat_gain_c_per_s: float = 0.012  # must outrun losses or the relay sticks on


@dataclass(frozen=True)
class ProgramSpec:
    """Multi-stage run: (duration seconds, watts) per stage."""

    stages: tuple[tuple[float, float], ...]
    starts_per_day: float = 2.0


@dataclass(frozen=True)
class SynthSpec:
    step: int = 60
    days: float = 1.0
    noise_sigma: float = 8.0
    base_load_watts: float = 150.0
    base_load_sigma: float = 3.0
    fridge: FridgeSpec = field(default_factory=FridgeSpec)
    heater: HeaterSpec = field(default_factory=HeaterSpec)
    washer: ProgramSpec = field(
        default_factory=lambda: ProgramSpec(
            stages=((600.0, 500.0), (1200.0, 800.0), (600.0, 300.0)),
            starts_per_day=3.0,
        )
    )
    dishwasher: ProgramSpec = field(
        default_factory=lambda: ProgramSpec(
            stages=((600.0, 700.0), (900.0, 1100.0), (600.0, 150.0)),
            starts_per_day=3.0,
        )
    )

    def validate(self) -> None:
        powers = [
            self.base_load_watts,
            self.fridge.power_watts,
            self.heater.power_watts,
            *(w for _, w in self.washer.stages),
            *(w for _, w in self.dishwasher.stages),
        ]
        if any(p < 0 for p in powers):
            raise ValueError("appliance powers must be non-negative")
        if self.step < 1 or self.days <= 0 or self.noise_sigma < 0:
            raise ValueError("step must be >= 1s, days > 0, noise_sigma >= 0")
        n_steps = int(self.days * SECONDS_PER_DAY // self.step)
        if n_steps < SECONDS_PER_DAY // self.step:
            raise ValueError("duration must cover at least one day of steps")


SECONDS_PER_DAY = 86_400
START_EPOCH = 1_300_000_000  # arbitrary fixed origin for reproducibility


@dataclass(frozen=True)
class SynthBuilding:
    building: BuildingData
    masks: dict[ApplianceKind, np.ndarray]  # generator-state on/off truth
    true_flexible_share_pct: float


def _fridge_channel(spec: FridgeSpec, n: int, step: int, rng) -> tuple[np.ndarray, np.ndarray]:
    power = np.zeros(n)
    mask = np.zeros(n, dtype=np.int64)
    t = 0
    while t < n:
        period = spec.period_s * (1.0 + spec.period_jitter * (2.0 * rng.random() - 1.0))
        on = max(1, int(round(period * spec.duty / step)))
        off = max(1, int(round(period * (1.0 - spec.duty) / step)))
        power[t : t + on] = spec.power_watts
        mask[t : t + on] = 1
        t += on + off
    return power, mask


def _heater_channel(spec: HeaterSpec, n: int, step: int, rng) -> tuple[np.ndarray, np.ndarray]:
    power = np.zeros(n)
    mask = np.zeros(n, dtype=np.int64)
    day = SECONDS_PER_DAY / step
    ambient = spec.ambient_c + spec.ambient_swing_c * np.sin(
        2.0 * np.pi * np.arange(n) / day + rng.uniform(0, 2 * np.pi)
    )
    temp = spec.setpoint_c + rng.uniform(-spec.hysteresis_c, spec.hysteresis_c)
    on = temp < spec.setpoint_c
    decay = step / spec.thermal_tau_s
    for t in range(n):
        if on:
            power[t] = spec.power_watts
            mask[t] = 1
        temp += (ambient[t] - temp) * decay + (spec.heat_gain_c_per_s * step if on else 0.0)
        if on and temp > spec.setpoint_c + spec.hysteresis_c:
            on = False
        elif not on and temp < spec.setpoint_c - spec.hysteresis_c:
            on = True
    return power, mask


def _program_channel(spec: ProgramSpec, n: int, step: int, rng) -> tuple[np.ndarray, np.ndarray]:
    power = np.zeros(n)
    mask = np.zeros(n, dtype=np.int64)
    mean_gap = SECONDS_PER_DAY / max(spec.starts_per_day, 1e-9)
    run_steps = sum(max(1, int(round(d / step))) for d, _ in spec.stages)
    t = int(rng.exponential(mean_gap) / step)
    while t < n:
        cursor = t
        for duration, watts in spec.stages:
            span = max(1, int(round(duration / step)))
            power[cursor : cursor + span] = watts
            mask[cursor : cursor + span] = 1
            cursor += span
        # next start; overlapping draws are pushed past the current run
        t = max(t + run_steps, t + int(rng.exponential(mean_gap) / step))
    return power, mask


def _base_load(watts: float, sigma: float, n: int, rng) -> np.ndarray:
    walk = np.cumsum(rng.normal(0.0, sigma, size=n)) + watts
    return np.abs(walk)  # reflect at zero to stay non-negative


def generate(spec: SynthSpec | None = None, building_id: int = 1, seed: int = 0) -> SynthBuilding:
    """One synthetic building; bit-identical for a fixed (spec, seed)."""
    spec = spec or SynthSpec()
    spec.validate()
    rng = np.random.default_rng(seed)
    n = int(spec.days * SECONDS_PER_DAY // spec.step)

    # mild per-building variation so cross-building generalization is real
    def vary(x: float) -> float:
        return x * (1.0 + 0.1 * (2.0 * rng.random() - 1.0))

    fridge = replace(spec.fridge, power_watts=vary(spec.fridge.power_watts))
    heater = replace(spec.heater, power_watts=vary(spec.heater.power_watts))

    channels: dict[ApplianceKind, np.ndarray] = {}
    masks: dict[ApplianceKind, np.ndarray] = {}
    channels[REFRIGERATOR], masks[REFRIGERATOR] = _fridge_channel(fridge, n, spec.step, rng)
    channels[ELECTRIC_HEATER], masks[ELECTRIC_HEATER] = _heater_channel(
        heater, n, spec.step, rng
    )
    channels[WASHER_DRYER], masks[WASHER_DRYER] = _program_channel(
        spec.washer, n, spec.step, rng
    )
    channels[DISHWASHER], masks[DISHWASHER] = _program_channel(
        spec.dishwasher, n, spec.step, rng
    )
    base = _base_load(spec.base_load_watts, spec.base_load_sigma, n, rng)

    aggregate = base + np.sum(list(channels.values()), axis=0)
    if spec.noise_sigma > 0:
        aggregate = np.maximum(aggregate + rng.normal(0.0, spec.noise_sigma, size=n), 0.0)

    flexible_energy = float(np.sum(list(channels.values())))
    share = 100.0 * flexible_energy / float(aggregate.sum())

    mains = TimeSeries(START_EPOCH, spec.step, aggregate)
    appliances = {
        kind: TimeSeries(START_EPOCH, spec.step, values) for kind, values in channels.items()
    }
    label_map = {
        1: "mains",
        2: "mains",
        3: "refrigerator",
        4: "electric_heat",
        5: "washer_dryer",
        6: "dishwaser",  # matches the upstream dataset's spelling
        7: "kitchen_outlets",
    }
    building = BuildingData(
        building_id=building_id,
        mains=mains,
        appliances=appliances,
        label_map=label_map,
    )
    return SynthBuilding(building=building, masks=masks, true_flexible_share_pct=share)


def generate_corpus(
    spec: SynthSpec | None = None, n_houses: int = 6, seed: int = 0
) -> dict[int, SynthBuilding]:
    """Houses 1..n, each generated from its own derived seed."""
    return {
        hid: generate(spec, building_id=hid, seed=seed * 1000 + hid)
        for hid in range(1, n_houses + 1)
    }


def write_redd_layout(houses: dict[int, SynthBuilding], out_dir: str | os.PathLike) -> None:
    """Emit the on-disk directory layout (labels.dat + channel files) so
    ingestion round-trips over generated data."""
    out_dir = os.fspath(out_dir)
    kind_channel = {
        REFRIGERATOR: 3,
        ELECTRIC_HEATER: 4,
        WASHER_DRYER: 5,
        DISHWASHER: 6,
    }
    for hid, synth in houses.items():
        building = synth.building
        house_dir = os.path.join(out_dir, f"house_{hid}")
        os.makedirs(house_dir, exist_ok=True)
        with open(os.path.join(house_dir, "labels.dat"), "w") as fh:
            for num, label in sorted(building.label_map.items()):
                fh.write(f"{num} {label}\n")
        epochs = building.mains.epochs()
        base = building.mains.values - np.sum(
            [s.values for s in building.appliances.values()], axis=0
        )
        base = np.maximum(base, 0.0)  # noise can push the remainder negative
        split = {1: building.mains.values * 0.6, 2: building.mains.values * 0.4}
        for num, values in split.items():
            with open(os.path.join(house_dir, f"channel_{num}.dat"), "w") as fh:
                fh.write(serialize_channel(epochs, values))
        for kind, num in kind_channel.items():
            with open(os.path.join(house_dir, f"channel_{num}.dat"), "w") as fh:
                fh.write(serialize_channel(epochs, building.appliances[kind].values))
        with open(os.path.join(house_dir, "channel_7.dat"), "w") as fh:
            fh.write(serialize_channel(epochs, base))
