"""Per-SOC median curves: voltage, per-percent charging time, temperature.

Curves pool raw values across a group's events and take the median per SOC
level; medians are always computed over pooled values, never as medians of
medians, so re-aggregating disjoint subsets reproduces the union's curve.
"""
from __future__ import annotations

import statistics
from typing import Callable, Iterator, Sequence

from .domain import ChargingEvent, CurveKind, CurvePoint, SocCurve
from .segmentation import interior_steps

# Levels backed by fewer raw values than this are flagged low-confidence
# in exports, but never suppressed.
LOW_CONFIDENCE_COUNT = 3

GROUP_DEVICE = "device"
GROUP_MODEL = "model"


def group_events(
    events: Sequence[ChargingEvent], group_key: str
) -> dict[str, list[ChargingEvent]]:
    if group_key == GROUP_DEVICE:
        key = lambda e: e.user_id
    elif group_key == GROUP_MODEL:
        key = lambda e: e.model
    else:
        raise ValueError(f"unknown group key {group_key!r}")
    groups: dict[str, list[ChargingEvent]] = {}
    for event in events:
        groups.setdefault(key(event), []).append(event)
    return groups


def sample_values_by_level(
    events: Sequence[ChargingEvent], value_of: Callable
) -> dict[int, list[float]]:
    """Pool one value per sample under its reported SOC level."""
    pooled: dict[int, list[float]] = {}
    for event in events:
        for sample in event.samples():
            pooled.setdefault(sample.soc, []).append(value_of(sample))
    return pooled


def seconds_per_percent_by_level(
    events: Sequence[ChargingEvent], include_terminal: bool = False
) -> dict[int, list[float]]:
    """Pool per-percent charging times under their destination levels.

    A step spanning several percent contributes delta_t / delta_soc to
    every level it crossed, which keeps level coverage under sparse
    sampling.  Non-charging steps carry no time; event-closing steps are
    excluded unless ``include_terminal`` is set.
    """
    return _step_values_by_level(
        events, lambda step: step.delta_t / step.delta_soc, include_terminal
    )


def rates_by_level(
    events: Sequence[ChargingEvent], include_terminal: bool = False
) -> dict[int, list[float]]:
    """Pool step C-rates under their destination levels."""
    return _step_values_by_level(events, lambda step: step.c_rate, include_terminal)


def _step_values_by_level(
    events: Sequence[ChargingEvent], value_of: Callable, include_terminal: bool
) -> dict[int, list[float]]:
    pooled: dict[int, list[float]] = {}
    for event in events:
        steps = event.steps if include_terminal else interior_steps(event)
        for step in steps:
            if step.delta_soc <= 0:
                continue
            value = value_of(step)
            for level in range(step.first.soc + 1, step.second.soc + 1):
                pooled.setdefault(level, []).append(value)
    return pooled


def _curve_from_pool(kind: CurveKind, pooled: dict[int, list[float]]) -> SocCurve:
    points = {
        level: CurvePoint(value=statistics.median(values), count=len(values))
        for level, values in pooled.items()
    }
    return SocCurve(kind=kind, points=points)


def pooled_curve(
    events: Sequence[ChargingEvent],
    kind: CurveKind,
    include_terminal: bool = False,
) -> SocCurve:
    """One curve over all given events, whatever group they form."""
    if kind is CurveKind.VOLTAGE:
        pooled = sample_values_by_level(events, lambda s: float(s.voltage))
    elif kind is CurveKind.TEMPERATURE:
        pooled = sample_values_by_level(events, lambda s: s.temperature)
    else:
        pooled = seconds_per_percent_by_level(events, include_terminal)
    return _curve_from_pool(kind, pooled)


def voltage_curve(
    events: Sequence[ChargingEvent], group_key: str = GROUP_DEVICE
) -> dict[str, SocCurve]:
    """Median battery voltage per SOC level, one curve per group."""
    return {
        group: pooled_curve(evts, CurveKind.VOLTAGE)
        for group, evts in group_events(events, group_key).items()
    }


def charge_time_curve(
    events: Sequence[ChargingEvent],
    group_key: str = GROUP_DEVICE,
    include_terminal: bool = False,
) -> dict[str, SocCurve]:
    """Median seconds-per-percent per SOC level, one curve per group."""
    return {
        group: pooled_curve(evts, CurveKind.CHARGE_TIME, include_terminal)
        for group, evts in group_events(events, group_key).items()
    }


def temperature_curve(
    events: Sequence[ChargingEvent], group_key: str = GROUP_DEVICE
) -> dict[str, SocCurve]:
    """Median battery temperature per SOC level, one curve per group."""
    return {
        group: pooled_curve(evts, CurveKind.TEMPERATURE)
        for group, evts in group_events(events, group_key).items()
    }


CURVE_COLUMNS = ("group", "kind", "soc", "value", "count", "low_confidence")


def curve_rows(
    group: str, curve: SocCurve, low_confidence_count: int = LOW_CONFIDENCE_COUNT
) -> Iterator[tuple]:
    """Plot-ready CSV rows for one curve."""
    for level in curve.levels():
        point = curve.points[level]
        yield (
            group,
            curve.kind.value,
            level,
            point.value,
            point.count,
            int(point.count < low_confidence_count),
        )
