"""User-side charging inefficiency detection.

Two patterns are mined from raw, pre-segmentation samples:

* SOC fluctuation: the level ping-pongs between two adjacent values
  (5, 6, 5, 6, ...) instead of stepping up once, typically because the
  device is drawing power while charging.  Segmentation would split the
  pattern at every downward step, so this scan runs on raw samples.
* At-full charging: the device sits plugged in at 100% and the charger
  tops it back up every time 1-2% self-discharges.  Each top-up wastes a
  measurable slice of the battery's capacity.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .domain import (
    BatterySample,
    BehaviorReport,
    ChargingEvent,
    FluctuationEpisode,
    FullPluggedEpisode,
    Screen,
)

MAINTENANCE_PCT_PER_CYCLE_DEFAULT = 1.5  # midpoint of the observed 1-2% dips
MAINTENANCE_DIP_SOCS = (98, 99)


def detect_fluctuation(samples: Sequence[BatterySample]) -> list[FluctuationEpisode]:
    """Find maximal runs alternating between two adjacent SOC levels.

    Samples must be time-sorted and unfiltered (screen state is part of
    the result).  A run is reported once it contains at least two
    direction reversals; reported runs never overlap.
    """
    episodes: list[FluctuationEpisode] = []
    i = 0
    n = len(samples)
    while i < n:
        run_levels = {samples[i].soc}
        j = i + 1
        while j < n:
            levels = run_levels | {samples[j].soc}
            if max(levels) - min(levels) > 1:
                break
            run_levels = levels
            j += 1
        run = samples[i:j]
        episode = _episode_from_run(run)
        if episode is not None:
            episodes.append(episode)
            i = j
        else:
            # Restart from the last sample so an alternation straddling the
            # window boundary is still caught.
            i = j - 1 if j - 1 > i else j
    return episodes


def _episode_from_run(run: Sequence[BatterySample]) -> Optional[FluctuationEpisode]:
    reversals = 0
    direction = 0
    for a, b in zip(run, run[1:]):
        move = b.soc - a.soc
        if move == 0:
            continue
        step = 1 if move > 0 else -1
        if direction != 0 and step != direction:
            reversals += 1
        direction = step
    if reversals < 2:
        return None
    socs = {s.soc for s in run}
    return FluctuationEpisode(
        event_id=None,
        soc_low=min(socs),
        soc_high=max(socs),
        repetitions=reversals,
        duration_s=run[-1].timestamp - run[0].timestamp,
        active_use=any(s.screen is Screen.ON for s in run),
        start_time=run[0].timestamp,
        end_time=run[-1].timestamp,
    )


def attribute_events(
    episodes: Sequence[FluctuationEpisode], events: Sequence[ChargingEvent]
) -> list[FluctuationEpisode]:
    """Tag each episode with the charging event whose span contains it."""
    out = []
    for ep in episodes:
        event_id = None
        for event in events:
            if event.start_time <= ep.start_time <= event.end_time:
                event_id = event.event_id
                break
        out.append(
            FluctuationEpisode(
                event_id=event_id,
                soc_low=ep.soc_low,
                soc_high=ep.soc_high,
                repetitions=ep.repetitions,
                duration_s=ep.duration_s,
                active_use=ep.active_use,
                start_time=ep.start_time,
                end_time=ep.end_time,
            )
        )
    return out


def detect_full_plugged(samples: Sequence[BatterySample]) -> list[FullPluggedEpisode]:
    """Find stretches spent plugged in at (or maintained near) 100%.

    An episode opens at a sample with soc 100 and charging true, and runs
    until charging goes false or the data ends.  Maintenance cycles count
    the dips to 98-99% that returned to 100% inside the episode; deeper
    excursions are real discharge, not charger top-ups, and do not count.
    """
    episodes: list[FullPluggedEpisode] = []
    i = 0
    n = len(samples)
    while i < n:
        s = samples[i]
        if s.soc == 100 and s.charging:
            j = i + 1
            while j < n and samples[j].charging:
                j += 1
            episodes.append(_plugged_episode(samples[i:j]))
            i = j
        else:
            i += 1
    return episodes


def _plugged_episode(run: Sequence[BatterySample]) -> FullPluggedEpisode:
    cycles = 0
    dipping = False
    dip_only_maintenance = True
    for s in run[1:]:
        if s.soc == 100:
            if dipping and dip_only_maintenance:
                cycles += 1
            dipping = False
            dip_only_maintenance = True
        else:
            dipping = True
            if s.soc not in MAINTENANCE_DIP_SOCS:
                dip_only_maintenance = False
    return FullPluggedEpisode(
        start_time=run[0].timestamp,
        duration_s=run[-1].timestamp - run[0].timestamp,
        maintenance_cycles=cycles,
    )


def estimate_wasted_energy(
    episode: FullPluggedEpisode,
    nominal_capacity_mah: float,
    maintenance_pct_per_cycle: float = MAINTENANCE_PCT_PER_CYCLE_DEFAULT,
) -> float:
    """Energy in mAh spent re-topping the battery during one episode.

    Each maintenance cycle recharges the self-discharged slice, by default
    1.5% of nominal capacity.
    """
    if nominal_capacity_mah <= 0:
        raise ValueError("nominal capacity must be positive")
    return (
        episode.maintenance_cycles
        * (maintenance_pct_per_cycle / 100.0)
        * nominal_capacity_mah
    )


def build_report(
    user_id: str,
    samples: Sequence[BatterySample],
    events: Sequence[ChargingEvent] = (),
    nominal_capacity_mah: Optional[float] = None,
    maintenance_pct_per_cycle: float = MAINTENANCE_PCT_PER_CYCLE_DEFAULT,
) -> BehaviorReport:
    """Scan one user's raw samples for both inefficiency patterns."""
    fluctuation = detect_fluctuation(samples)
    if events:
        fluctuation = attribute_events(fluctuation, events)
    plugged = detect_full_plugged(samples)
    wasted: Optional[float] = None
    if nominal_capacity_mah is not None:
        wasted = sum(
            estimate_wasted_energy(ep, nominal_capacity_mah, maintenance_pct_per_cycle)
            for ep in plugged
        )
    return BehaviorReport(
        user_id=user_id,
        fluctuation_episodes=tuple(fluctuation),
        full_plugged_episodes=tuple(
            ep for ep in plugged if ep.maintenance_cycles >= 1
        ),
        total_full_plugged_s=sum(ep.duration_s for ep in plugged),
        wasted_energy_mah=wasted,
    )


def report_to_record(report: BehaviorReport) -> dict:
    return {
        "user": report.user_id,
        "fluctuation_episodes": [
            {
                "event_id": ep.event_id,
                "soc_low": ep.soc_low,
                "soc_high": ep.soc_high,
                "repetitions": ep.repetitions,
                "duration_s": ep.duration_s,
                "active_use": ep.active_use,
                "start_time": ep.start_time,
                "end_time": ep.end_time,
            }
            for ep in report.fluctuation_episodes
        ],
        "full_plugged_episodes": [
            {
                "start_time": ep.start_time,
                "duration_s": ep.duration_s,
                "maintenance_cycles": ep.maintenance_cycles,
            }
            for ep in report.full_plugged_episodes
        ],
        "total_full_plugged_s": report.total_full_plugged_s,
        "wasted_energy_mah": report.wasted_energy_mah,
    }


def record_to_report(record: dict) -> BehaviorReport:
    return BehaviorReport(
        user_id=record["user"],
        fluctuation_episodes=tuple(
            FluctuationEpisode(
                event_id=ep["event_id"],
                soc_low=ep["soc_low"],
                soc_high=ep["soc_high"],
                repetitions=ep["repetitions"],
                duration_s=ep["duration_s"],
                active_use=ep["active_use"],
                start_time=ep["start_time"],
                end_time=ep["end_time"],
            )
            for ep in record["fluctuation_episodes"]
        ),
        full_plugged_episodes=tuple(
            FullPluggedEpisode(
                start_time=ep["start_time"],
                duration_s=ep["duration_s"],
                maintenance_cycles=ep["maintenance_cycles"],
            )
            for ep in record["full_plugged_episodes"]
        ),
        total_full_plugged_s=record["total_full_plugged_s"],
        wasted_energy_mah=record["wasted_energy_mah"],
    )
