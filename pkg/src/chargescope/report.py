"""Corpus-level summaries of profile and behavior artifacts."""
from __future__ import annotations

import json
from typing import Iterable, Optional, Sequence

from .domain import Technique

FAST_TECHNIQUES = (Technique.QUICK.value, Technique.FAST_PULSE.value)


def summarize_profiles(
    records: Iterable[dict],
    loss_band: tuple[float, float] = (1.0, 10.0),
) -> dict:
    """Aggregate profile records into counts, shares, and loss prevalence.

    ``loss_band`` bounds (inclusive) the capacity-loss range whose
    prevalence across all profiled devices is reported.
    """
    technique_counts: dict[str, int] = {}
    fuel_gauge_counts: dict[str, int] = {}
    variant_counts: dict[str, int] = {}
    losses: list[float] = []
    in_band = 0
    total = 0
    for record in records:
        total += 1
        technique_counts[record["technique"]] = (
            technique_counts.get(record["technique"], 0) + 1
        )
        fuel_gauge_counts[record["fuel_gauge"]] = (
            fuel_gauge_counts.get(record["fuel_gauge"], 0) + 1
        )
        for variant in record.get("variants", ()):
            variant_counts[variant] = variant_counts.get(variant, 0) + 1
        loss = record.get("capacity_loss_pct")
        if loss is not None:
            losses.append(loss)
            if loss_band[0] <= loss <= loss_band[1]:
                in_band += 1

    def pct(count: int) -> float:
        return 100.0 * count / total if total else 0.0

    fast_count = sum(technique_counts.get(t, 0) for t in FAST_TECHNIQUES)
    return {
        "device_count": total,
        "technique_counts": dict(sorted(technique_counts.items())),
        "technique_pct": {t: pct(c) for t, c in sorted(technique_counts.items())},
        "fast_pct": pct(fast_count),
        "fuel_gauge_counts": dict(sorted(fuel_gauge_counts.items())),
        "variant_counts": dict(sorted(variant_counts.items())),
        "capacity_loss": {
            "estimated_devices": len(losses),
            "band": list(loss_band),
            "band_prevalence_pct": pct(in_band),
            "mean_pct": sum(losses) / len(losses) if losses else None,
            "max_pct": max(losses) if losses else None,
        },
    }


def summarize_behavior(
    records: Iterable[dict], tail_quantile: float = 0.98
) -> dict:
    """Aggregate behavior records; the reversal-count quantile marks the
    heavy tail of the fluctuation distribution."""
    users = 0
    users_with_fluctuation = 0
    users_with_full_plugged = 0
    reversal_counts: list[int] = []
    active_use_episodes = 0
    total_plugged_s = 0.0
    total_cycles = 0
    total_wasted = 0.0
    wasted_known = False
    for record in records:
        users += 1
        episodes = record.get("fluctuation_episodes", ())
        if episodes:
            users_with_fluctuation += 1
        for ep in episodes:
            reversal_counts.append(ep["repetitions"])
            if ep["active_use"]:
                active_use_episodes += 1
        plugged = record.get("full_plugged_episodes", ())
        if plugged:
            users_with_full_plugged += 1
        total_cycles += sum(ep["maintenance_cycles"] for ep in plugged)
        total_plugged_s += record.get("total_full_plugged_s", 0.0)
        wasted = record.get("wasted_energy_mah")
        if wasted is not None:
            wasted_known = True
            total_wasted += wasted

    tail_cut: Optional[float] = None
    if reversal_counts:
        ordered = sorted(reversal_counts)
        index = min(len(ordered) - 1, int(tail_quantile * len(ordered)))
        tail_cut = float(ordered[index])
    return {
        "user_count": users,
        "users_with_fluctuation": users_with_fluctuation,
        "fluctuation_episodes": len(reversal_counts),
        "active_use_episodes": active_use_episodes,
        "reversal_tail_quantile": tail_quantile,
        "reversal_tail_cut": tail_cut,
        "users_with_full_plugged": users_with_full_plugged,
        "total_full_plugged_hours": total_plugged_s / 3600.0,
        "total_maintenance_cycles": total_cycles,
        "total_wasted_energy_mah": total_wasted if wasted_known else None,
    }


def build_report(
    profile_records: Sequence[dict],
    behavior_records: Sequence[dict] = (),
    health_rows: Sequence[dict] = (),
    loss_band: tuple[float, float] = (1.0, 10.0),
    tail_quantile: float = 0.98,
) -> dict:
    report = {"profiles": summarize_profiles(profile_records, loss_band)}
    if behavior_records:
        report["behavior"] = summarize_behavior(behavior_records, tail_quantile)
    if health_rows:
        report["health"] = list(health_rows)
    return report


def render_markdown(report: dict) -> str:
    lines = ["# Battery corpus report", ""]
    profiles = report["profiles"]
    lines.append(f"Devices profiled: {profiles['device_count']}")
    lines.append("")
    lines.append("## Charging techniques")
    lines.append("")
    lines.append("| technique | devices | share |")
    lines.append("|---|---:|---:|")
    for technique, count in profiles["technique_counts"].items():
        lines.append(
            f"| {technique} | {count} | {profiles['technique_pct'][technique]:.1f}% |"
        )
    lines.append("")
    lines.append(f"Fast-charging share: {profiles['fast_pct']:.1f}%")
    lines.append("")
    lines.append("## Fuel gauges")
    lines.append("")
    for gauge, count in profiles["fuel_gauge_counts"].items():
        lines.append(f"- {gauge}: {count}")
    loss = profiles["capacity_loss"]
    lines.append("")
    lines.append("## Capacity loss")
    lines.append("")
    lines.append(
        f"- devices with an estimate: {loss['estimated_devices']}"
    )
    band = loss["band"]
    lines.append(
        f"- share with {band[0]:g}-{band[1]:g}% loss: {loss['band_prevalence_pct']:.1f}%"
    )
    if loss["mean_pct"] is not None:
        lines.append(f"- mean loss: {loss['mean_pct']:.2f}%")
    behavior = report.get("behavior")
    if behavior:
        lines.append("")
        lines.append("## Charging behavior")
        lines.append("")
        lines.append(
            f"- users with SOC fluctuation: {behavior['users_with_fluctuation']}"
            f" ({behavior['fluctuation_episodes']} episodes,"
            f" {behavior['active_use_episodes']} during active use)"
        )
        lines.append(
            f"- users plugged at full: {behavior['users_with_full_plugged']}"
            f" ({behavior['total_full_plugged_hours']:.1f} h,"
            f" {behavior['total_maintenance_cycles']} maintenance cycles)"
        )
        if behavior["total_wasted_energy_mah"] is not None:
            lines.append(
                f"- estimated wasted energy: {behavior['total_wasted_energy_mah']:.0f} mAh"
            )
    health = report.get("health")
    if health:
        lines.append("")
        lines.append("## Battery health ranges")
        lines.append("")
        lines.append("| health | voltage (mV) | temperature (C) | samples |")
        lines.append("|---|---|---|---:|")
        for row in health:
            lines.append(
                f"| {row['health']} | {row['voltage_min']}-{row['voltage_max']}"
                f" | {row['temp_min']:g}-{row['temp_max']:g} | {row['count']} |"
            )
    lines.append("")
    return "\n".join(lines)


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
