"""Charge-rate computation and charging-event segmentation.

A charging event is a maximal run of SOC updates whose per-percent C-rate
stays above a termination threshold.  CC-CV chargers taper the current in
the CV phase; ordinary chargers cut off around 0.07C, while tablets can
trickle longer, so the default termination rate is the tablet-safe 0.03C.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .domain import BatterySample, ChargeStep, ChargingEvent

TERMINATION_C_DEFAULT = 0.03
TERMINATION_C_CHARGER_CUTOFF = 0.07  # typical charge-controller cut-off rate

# At 1C a battery charges 1% every 36 s (100% in one hour).
SECONDS_PER_PERCENT_AT_1C = 36.0


def c_rate(delta_soc: int, delta_t: float) -> float:
    """Charging rate in C units for a SOC gain over an interval.

    C = 36 * delta_soc / delta_t.  Steps that gained no charge
    (delta_soc <= 0) are not charging and carry rate 0.

    Raises ValueError for a non-positive interval.
    """
    if delta_t <= 0:
        raise ValueError("non-positive interval")
    if delta_soc <= 0:
        return 0.0
    return SECONDS_PER_PERCENT_AT_1C * delta_soc / delta_t


def make_step(first: BatterySample, second: BatterySample) -> ChargeStep:
    delta_soc = second.soc - first.soc
    delta_t = second.timestamp - first.timestamp
    return ChargeStep(
        first=first,
        second=second,
        delta_soc=delta_soc,
        delta_t=delta_t,
        c_rate=c_rate(delta_soc, delta_t),
    )


def pair_consecutive(samples: Sequence[BatterySample]) -> list[ChargeStep]:
    """Overlapping consecutive pairs of a time-sorted sample sequence.

    n samples yield n-1 steps; fewer than 2 samples yield none.  A sample
    sharing its predecessor's timestamp cannot form a positive interval
    and is skipped, keeping the remaining steps contiguous.
    """
    steps: list[ChargeStep] = []
    previous: Optional[BatterySample] = None
    for sample in samples:
        if previous is not None:
            if sample.timestamp <= previous.timestamp:
                continue
            steps.append(make_step(previous, sample))
        previous = sample
    return steps


def segment_events(
    steps: Sequence[ChargeStep],
    termination_c: float = TERMINATION_C_DEFAULT,
) -> list[ChargingEvent]:
    """Split a time-ordered step sequence into charging events.

    Scanning in order, a step with rate at or below ``termination_c``
    closes the current event and is kept inside it as the closing step;
    the next step opens the following event.  Event ids start at 1 and
    increment per user.  Every input step lands in exactly one event.
    """
    events: list[ChargingEvent] = []
    current: list[ChargeStep] = []
    event_id = 1
    for step in steps:
        current.append(step)
        if step.c_rate <= termination_c:
            events.append(_build_event(event_id, current, closed=True))
            current = []
            event_id += 1
    if current:
        events.append(_build_event(event_id, current, closed=False))
    return events


def _build_event(event_id: int, steps: list[ChargeStep], closed: bool) -> ChargingEvent:
    first = steps[0].first
    return ChargingEvent(
        event_id=event_id,
        user_id=first.user_id,
        model=first.model,
        steps=tuple(steps),
        start_time=first.timestamp,
        end_time=steps[-1].second.timestamp,
        closed=closed,
    )


def interior_steps(event: ChargingEvent) -> tuple[ChargeStep, ...]:
    """Steps excluding the closing one; closing steps sit at the
    termination rate and would bias rate statistics low."""
    if event.closed:
        return event.steps[:-1]
    return event.steps


@dataclass(frozen=True, slots=True)
class EventEndpoints:
    """Voltage at the lowest and highest SOC reached by an event.

    ``final_voltage`` is a full-charge reading candidate only when the
    event actually reached 100%.
    """

    initial_voltage: int
    final_voltage: int
    soc_min: int
    soc_max: int

    @property
    def is_full_charge(self) -> bool:
        return self.soc_max == 100


def soc_endpoints(samples: Sequence[BatterySample]) -> EventEndpoints:
    """Endpoints over an ordered, non-empty sample sequence.

    The initial voltage is read at the earliest lowest-SOC sample, the
    final voltage at the latest highest-SOC sample.
    """
    if not samples:
        raise ValueError("no samples")
    lowest = samples[0]
    highest = samples[0]
    for sample in samples[1:]:
        if sample.soc < lowest.soc:
            lowest = sample
        if sample.soc >= highest.soc:
            highest = sample
    return EventEndpoints(
        initial_voltage=lowest.voltage,
        final_voltage=highest.voltage,
        soc_min=lowest.soc,
        soc_max=highest.soc,
    )


def event_endpoints(event: ChargingEvent) -> EventEndpoints:
    return soc_endpoints(event.samples())


LABELED_STEP_COLUMNS = (
    "user",
    "event_id",
    "t1",
    "t2",
    "soc1",
    "soc2",
    "delta_t",
    "c_rate",
)


def labeled_step_rows(events: Sequence[ChargingEvent]) -> Iterator[tuple]:
    """Rows for the labeled-step CSV export, one per step."""
    for event in events:
        for step in event.steps:
            yield (
                event.user_id,
                event.event_id,
                step.first.timestamp,
                step.second.timestamp,
                step.first.soc,
                step.second.soc,
                step.delta_t,
                step.c_rate,
            )


def event_mean_rate_rows(events: Sequence[ChargingEvent]) -> Iterator[tuple]:
    """Per-event alternative to the per-step export: one row per event,
    c_rate carrying the mean rate over its interior charging steps."""
    for event in events:
        rates = [s.c_rate for s in interior_steps(event) if s.delta_soc > 0]
        if not rates:
            continue
        yield (
            event.user_id,
            event.event_id,
            event.start_time,
            event.end_time,
            event.min_soc,
            event.max_soc,
            event.end_time - event.start_time,
            sum(rates) / len(rates),
        )
