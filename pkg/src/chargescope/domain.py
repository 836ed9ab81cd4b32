"""Core data types for smartphone battery charging telemetry.

Samples are the raw unit: one state-of-charge (SOC) update together with
the battery attributes reported alongside it.  Consecutive samples form
charge steps, steps form charging events, and per-SOC curves, per-device
profiles, and behavior reports are derived downstream.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

SOC_MIN = 0
SOC_MAX = 100

# Plausibility bounds; readings outside are rejected at ingestion.
VOLTAGE_MV_MIN = 2000
VOLTAGE_MV_MAX = 5000
TEMP_C_MIN = -30.0
TEMP_C_MAX = 100.0


class Health(Enum):
    """Battery health as reported by the OS."""

    GOOD = "good"
    OVERHEAT = "overheat"
    OVER_VOLTAGE = "over_voltage"
    OTHER = "other"


class Charger(Enum):
    AC = "ac"
    USB = "usb"
    UNPLUGGED = "unplugged"


class Screen(Enum):
    ON = "on"
    OFF = "off"


class Technique(Enum):
    """Charging technique families distinguishable from voltage behavior."""

    CC_CV = "cccv"             # constant current, then constant voltage at ~4.20 V
    DLC = "dlc"                # double loop control: CC-CV variant charged to ~4.35 V
    QUICK = "quick"            # high-voltage CC phase peaking above 4.4 V
    FAST_PULSE = "fast_pulse"  # alternating charge current, oscillating voltage
    UNKNOWN = "unknown"


class Variant(Enum):
    """Secondary charging traits that overlay the base technique."""

    CV_FIRST = "cv_first"    # slow restore phase over roughly the first 10%
    CC_TAIL = "cc_tail"      # constant-current finish above 95%
    FAST_RATE = "fast_rate"  # CC-phase rates above 1C


class FuelGauge(Enum):
    COULOMB_COUNTER = "coulomb_counter"
    VOLTAGE_BASED = "voltage_based"
    INCONCLUSIVE = "inconclusive"


class CurveKind(Enum):
    VOLTAGE = "voltage"          # millivolts per SOC level
    CHARGE_TIME = "charge_time"  # seconds per percent per SOC level
    TEMPERATURE = "temperature"  # degrees Celsius per SOC level


def plausibility_error(soc: int, voltage_mv: int, temp_c: float) -> Optional[str]:
    """Return a rejection reason for implausible readings, or None."""
    if not SOC_MIN <= soc <= SOC_MAX:
        return "soc out of range"
    if not VOLTAGE_MV_MIN <= voltage_mv <= VOLTAGE_MV_MAX:
        return "voltage out of range"
    if not TEMP_C_MIN <= temp_c <= TEMP_C_MAX:
        return "temperature out of range"
    return None


@dataclass(frozen=True, slots=True)
class BatterySample:
    """One timestamped SOC-update event from a device.

    Immutable after construction and safe to share across threads, as are
    all types in this module.
    """

    timestamp: float        # epoch seconds
    user_id: str
    model: str
    soc: int                # battery level, integer percent 0..100
    voltage: int            # millivolts
    temperature: float      # degrees Celsius
    health: Health
    charger: Charger
    charging: bool          # plugged/unplugged status
    screen: Screen


@dataclass(frozen=True, slots=True)
class ChargeStep:
    """A consecutive sample pair with its SOC delta, duration, and C-rate.

    The C-rate is 36 * delta_soc / delta_t for charging steps; steps that
    gained no charge (delta_soc <= 0) carry rate 0 and are non-charging.
    """

    first: BatterySample
    second: BatterySample
    delta_soc: int
    delta_t: float          # seconds, strictly positive
    c_rate: float

    @property
    def is_charging(self) -> bool:
        return self.delta_soc > 0


@dataclass(frozen=True, slots=True)
class ChargingEvent:
    """An ordered, contiguous run of steps belonging to one charge session.

    ``closed`` is True when the event was ended by a step at or below the
    termination rate; that step is the last one in ``steps``.  The final
    event of a sample sequence is left open when the data simply ends.
    """

    event_id: int           # incremental per user, starting at 1
    user_id: str
    model: str
    steps: tuple[ChargeStep, ...]
    start_time: float
    end_time: float
    closed: bool = False

    def samples(self) -> list[BatterySample]:
        """Ordered samples covered by this event (step endpoints, deduplicated)."""
        if not self.steps:
            return []
        out = [self.steps[0].first]
        out.extend(step.second for step in self.steps)
        return out

    @property
    def max_soc(self) -> int:
        return max(s.soc for s in self.samples())

    @property
    def min_soc(self) -> int:
        return min(s.soc for s in self.samples())


@dataclass(frozen=True, slots=True)
class CurvePoint:
    value: float
    count: int              # number of raw values aggregated at this level


@dataclass(frozen=True, slots=True)
class SocCurve:
    """Per-SOC-level aggregate: median value plus sample count per level.

    Levels absent from the data are absent from ``points``.
    """

    kind: CurveKind
    points: dict[int, CurvePoint]

    def levels(self) -> list[int]:
        return sorted(self.points)

    def value_at(self, level: int) -> Optional[float]:
        point = self.points.get(level)
        return None if point is None else point.value

    def values(self, levels: Optional[list[int]] = None) -> list[float]:
        if levels is None:
            levels = self.levels()
        return [self.points[lv].value for lv in levels if lv in self.points]


@dataclass(frozen=True, slots=True)
class DeviceProfile:
    """Per-device (or per-model) classification results."""

    user_id: str
    model: str
    technique: Technique
    variants: frozenset[Variant]
    fuel_gauge: FuelGauge
    initial_voltage: Optional[int]        # mV at soc = 1, if observed
    final_voltage_mean: Optional[float]   # mean of per-event full-charge readings, mV
    nominal_final_voltage: Optional[int]  # 4200 or 4350, by technique
    capacity_loss_pct: Optional[float]
    event_count: int
    notes: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class FluctuationEpisode:
    """A maximal run where SOC ping-pongs between two adjacent levels."""

    event_id: Optional[int]   # charging event containing the run, when known
    soc_low: int
    soc_high: int
    repetitions: int          # direction reversals within the run, >= 2
    duration_s: float
    active_use: bool          # any sample in the run had the screen on
    start_time: float
    end_time: float


@dataclass(frozen=True, slots=True)
class FullPluggedEpisode:
    """A stretch where the device sat plugged in at 100%."""

    start_time: float
    duration_s: float
    maintenance_cycles: int   # dips to 98-99% followed by a return to 100%


@dataclass(frozen=True, slots=True)
class BehaviorReport:
    """Per-user charging inefficiencies.

    ``full_plugged_episodes`` lists episodes with at least one maintenance
    cycle; ``total_full_plugged_s`` also counts cycle-free plugged time.
    """

    user_id: str
    fluctuation_episodes: tuple[FluctuationEpisode, ...]
    full_plugged_episodes: tuple[FullPluggedEpisode, ...]
    total_full_plugged_s: float
    wasted_energy_mah: Optional[float]    # requires a configured capacity
