"""Per-device charging classification.

Derives the pieces of a device profile from its charging events:

* charging technique, from the voltage a full charge levels out at
  (4.20 V and 4.35 V designs, ~50 mV tolerance each), a peak above 4.4 V
  (high-voltage quick charging), or a sustained voltage oscillation
  (pulse charging);
* technique variants, from per-SOC-window rate medians;
* fuel-gauge type, from the dispersion of per-percent charging times over
  the constant-current window: charge integration updates SOC at steady
  intervals, voltage-table lookups do not;
* capacity loss, from the deficit of the reported full-charge voltage
  against the technique's nominal ceiling at 10 mV per percent;
* a battery-health range tabulation.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import curves as curves_mod
from .domain import (
    BatterySample,
    ChargingEvent,
    CurveKind,
    DeviceProfile,
    FuelGauge,
    Health,
    SocCurve,
    Technique,
    Variant,
)
from .segmentation import event_endpoints

NOMINAL_FINAL_MV = {Technique.CC_CV: 4200, Technique.DLC: 4350}

# Full-charge voltage deficit to capacity: 10 mV down = 1% lost.
MV_PER_PERCENT_LOSS = 10.0


@dataclass(frozen=True)
class TechniqueBands:
    """Voltage bands separating the two standard charging designs.

    The gap between bands maps to UNKNOWN rather than snapping to the
    nearest band; the ~50 mV design tolerance does not justify more
    precision.  Readings above ``quick_threshold`` (exclusive) indicate
    high-voltage quick charging.
    """

    cccv_center: int = 4200
    cccv_halfwidth: int = 50
    dlc_center: int = 4350
    dlc_halfwidth: int = 50
    quick_threshold: int = 4400

    def __post_init__(self) -> None:
        if self.cccv_upper >= self.dlc_lower:
            raise ValueError("voltage bands overlap")
        if self.quick_threshold < self.dlc_upper:
            raise ValueError("quick threshold below the upper band")

    @property
    def cccv_lower(self) -> int:
        return self.cccv_center - self.cccv_halfwidth

    @property
    def cccv_upper(self) -> int:
        return self.cccv_center + self.cccv_halfwidth

    @property
    def dlc_lower(self) -> int:
        return self.dlc_center - self.dlc_halfwidth

    @property
    def dlc_upper(self) -> int:
        return self.dlc_center + self.dlc_halfwidth

    def band_of(self, voltage_mv: float) -> Optional[Technique]:
        if self.cccv_lower <= voltage_mv <= self.cccv_upper:
            return Technique.CC_CV
        if self.dlc_lower <= voltage_mv <= self.dlc_upper:
            return Technique.DLC
        return None


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds for technique, variant, and fuel-gauge classification."""

    bands: TechniqueBands = field(default_factory=TechniqueBands)
    qualify_min_soc: int = 95          # events must get this far to vote on bands
    pulse_min_reversals: int = 4
    pulse_min_amplitude_mv: float = 20.0
    pulse_window: tuple[int, int] = (30, 95)
    pulse_min_levels: int = 10
    fuel_gauge_window: tuple[int, int] = (10, 50)
    fuel_gauge_min_levels: int = 20
    # Relative dispersion (IQR/median) at or below this is a Coulomb
    # counter; above twice it is voltage-based.  At 0.15 a +-40% jittered
    # trace misses the voltage-based cut ~5% of the time (41-level IQR
    # estimate is that noisy), so the default sits lower.
    fuel_gauge_dispersion: float = 0.10
    cv_first_window: tuple[int, int] = (1, 10)
    mid_rate_window: tuple[int, int] = (20, 50)
    cc_tail_window: tuple[int, int] = (96, 100)
    cv_first_max_c: float = 0.1
    mid_min_c: float = 0.3
    cc_tail_ratio: float = 0.7
    fast_rate_c: float = 1.0
    fast_rate_fraction: float = 0.05
    include_terminal: bool = False

    def to_dict(self) -> dict:
        return {
            "bands": {
                "cccv_center": self.bands.cccv_center,
                "cccv_halfwidth": self.bands.cccv_halfwidth,
                "dlc_center": self.bands.dlc_center,
                "dlc_halfwidth": self.bands.dlc_halfwidth,
                "quick_threshold": self.bands.quick_threshold,
            },
            "qualify_min_soc": self.qualify_min_soc,
            "pulse_min_reversals": self.pulse_min_reversals,
            "pulse_min_amplitude_mv": self.pulse_min_amplitude_mv,
            "pulse_window": list(self.pulse_window),
            "pulse_min_levels": self.pulse_min_levels,
            "fuel_gauge_window": list(self.fuel_gauge_window),
            "fuel_gauge_min_levels": self.fuel_gauge_min_levels,
            "fuel_gauge_dispersion": self.fuel_gauge_dispersion,
            "cv_first_window": list(self.cv_first_window),
            "mid_rate_window": list(self.mid_rate_window),
            "cc_tail_window": list(self.cc_tail_window),
            "cv_first_max_c": self.cv_first_max_c,
            "mid_min_c": self.mid_min_c,
            "cc_tail_ratio": self.cc_tail_ratio,
            "fast_rate_c": self.fast_rate_c,
            "fast_rate_fraction": self.fast_rate_fraction,
            "include_terminal": self.include_terminal,
        }


DEFAULT_CONFIG = ClassifierConfig()


@dataclass(frozen=True, slots=True)
class PulseResult:
    detected: bool
    reversals: int
    reason: Optional[str] = None


def detect_pulse(
    voltage_curve: SocCurve,
    min_reversals: int = 4,
    min_amplitude_mv: float = 20.0,
    soc_window: tuple[int, int] = (30, 95),
    min_levels: int = 10,
) -> PulseResult:
    """Detect an alternating-current voltage signature.

    Counts direction flips between adjacent level-to-level differences
    inside ``soc_window`` where both differences reach the amplitude
    floor.  The floor sits above the 10 mV quantization common in
    telemetry; the reversal minimum rejects isolated artifacts.
    """
    lo, hi = soc_window
    levels = [lv for lv in voltage_curve.levels() if lo <= lv <= hi]
    if len(levels) < min_levels:
        return PulseResult(False, 0, f"fewer than {min_levels} levels in {lo}..{hi}")
    values = [voltage_curve.points[lv].value for lv in levels]
    diffs = [b - a for a, b in zip(values, values[1:])]
    reversals = 0
    for d1, d2 in zip(diffs, diffs[1:]):
        if (
            abs(d1) >= min_amplitude_mv
            and abs(d2) >= min_amplitude_mv
            and (d1 > 0) != (d2 > 0)
        ):
            reversals += 1
    return PulseResult(reversals >= min_reversals, reversals)


@dataclass(frozen=True, slots=True)
class VariantReport:
    flags: frozenset[Variant]
    skipped: tuple[str, ...] = ()   # flags that could not be evaluated, with why


def _median_rate_in_window(
    rates_by_level: dict[int, list[float]], window: tuple[int, int]
) -> Optional[float]:
    pooled = [
        rate
        for level in range(window[0], window[1] + 1)
        for rate in rates_by_level.get(level, ())
    ]
    return statistics.median(pooled) if pooled else None


def detect_variants(
    events: Sequence[ChargingEvent], config: ClassifierConfig = DEFAULT_CONFIG
) -> VariantReport:
    """Flag CV-first starts, CC-tail finishes, and above-1C CC rates.

    CV-first: the first ~10% charges below 0.1C while the mid range runs
    at a healthy constant current.  CC-tail: the last 5% charges at a
    rate comparable to the mid range instead of a CV taper.  Fast rate:
    at least 5% of CC-window steps exceed 1C.
    """
    rates = curves_mod.rates_by_level(events, config.include_terminal)
    flags: set[Variant] = set()
    skipped: list[str] = []

    mid = _median_rate_in_window(rates, config.mid_rate_window)
    low = _median_rate_in_window(rates, config.cv_first_window)
    tail = _median_rate_in_window(rates, config.cc_tail_window)

    if low is None or mid is None:
        skipped.append("cv_first: no coverage of the low/mid SOC windows")
    elif low < config.cv_first_max_c and mid >= config.mid_min_c:
        flags.add(Variant.CV_FIRST)

    if tail is None or mid is None:
        skipped.append("cc_tail: no coverage of the tail/mid SOC windows")
    elif tail >= config.cc_tail_ratio * mid and tail >= config.mid_min_c:
        flags.add(Variant.CC_TAIL)

    cc_window_rates = [
        rate
        for level in range(config.mid_rate_window[0], config.mid_rate_window[1] + 1)
        for rate in rates.get(level, ())
    ]
    if not cc_window_rates:
        skipped.append("fast_rate: no coverage of the CC SOC window")
    else:
        fast = sum(1 for rate in cc_window_rates if rate > config.fast_rate_c)
        if fast >= config.fast_rate_fraction * len(cc_window_rates):
            flags.add(Variant.FAST_RATE)

    return VariantReport(flags=frozenset(flags), skipped=tuple(skipped))


@dataclass(frozen=True, slots=True)
class FuelGaugeResult:
    gauge: FuelGauge
    dispersion: Optional[float] = None
    reason: Optional[str] = None


def infer_fuel_gauge(
    charge_time_curve: SocCurve,
    window: tuple[int, int] = (10, 50),
    min_levels: int = 20,
    cv_threshold: float = DEFAULT_CONFIG.fuel_gauge_dispersion,
) -> FuelGaugeResult:
    """Classify the SOC estimation method from CC-phase update times.

    A Coulomb counter integrates current, so under constant current every
    percent takes the same time and the relative dispersion (IQR over
    median) of per-percent times is near zero.  Voltage-table gauges
    re-derive SOC from a noisy voltage, so their update times scatter.
    The window starts at 10% to stay clear of CV-first starts and stops
    at 50% where constant current reliably still holds.
    """
    lo, hi = window
    values = [
        charge_time_curve.points[lv].value
        for lv in range(lo, hi + 1)
        if lv in charge_time_curve.points
    ]
    if len(values) < min_levels:
        return FuelGaugeResult(
            FuelGauge.INCONCLUSIVE,
            reason=f"only {len(values)} of {min_levels} required levels in {lo}..{hi}",
        )
    median = statistics.median(values)
    if median <= 0:
        return FuelGaugeResult(FuelGauge.INCONCLUSIVE, reason="non-positive times")
    quartiles = statistics.quantiles(values, n=4)
    dispersion = (quartiles[2] - quartiles[0]) / median
    if dispersion <= cv_threshold:
        return FuelGaugeResult(FuelGauge.COULOMB_COUNTER, dispersion)
    if dispersion > 2 * cv_threshold:
        return FuelGaugeResult(FuelGauge.VOLTAGE_BASED, dispersion)
    return FuelGaugeResult(FuelGauge.INCONCLUSIVE, dispersion, "dispersion in the gap")


def capacity_loss(final_voltages: Sequence[float], nominal: int) -> float:
    """Capacity loss percent from full-charge voltage readings.

    The mean reported full-charge voltage is compared against the nominal
    ceiling; every 10 mV of deficit is one percent of capacity lost.
    Clamped below at zero.
    """
    if not final_voltages:
        raise ValueError("no final voltages")
    if nominal not in NOMINAL_FINAL_MV.values():
        raise ValueError(f"unsupported nominal final voltage {nominal}")
    mean = sum(final_voltages) / len(final_voltages)
    return max(0.0, (nominal - mean) / MV_PER_PERCENT_LOSS)


@dataclass(frozen=True, slots=True)
class HealthStats:
    voltage_min: int
    voltage_max: int
    temp_min: float
    temp_max: float
    count: int


def health_summary(samples: Iterable[BatterySample]) -> dict[Health, HealthStats]:
    """Exact voltage/temperature ranges per reported health class."""
    acc: dict[Health, list] = {}
    for s in samples:
        row = acc.get(s.health)
        if row is None:
            acc[s.health] = [s.voltage, s.voltage, s.temperature, s.temperature, 1]
        else:
            if s.voltage < row[0]:
                row[0] = s.voltage
            if s.voltage > row[1]:
                row[1] = s.voltage
            if s.temperature < row[2]:
                row[2] = s.temperature
            if s.temperature > row[3]:
                row[3] = s.temperature
            row[4] += 1
    return {health: HealthStats(*row) for health, row in acc.items()}


def merge_health_summaries(
    summaries: Iterable[dict[Health, HealthStats]]
) -> dict[Health, HealthStats]:
    merged: dict[Health, HealthStats] = {}
    for summary in summaries:
        for health, stats in summary.items():
            prev = merged.get(health)
            if prev is None:
                merged[health] = stats
            else:
                merged[health] = HealthStats(
                    voltage_min=min(prev.voltage_min, stats.voltage_min),
                    voltage_max=max(prev.voltage_max, stats.voltage_max),
                    temp_min=min(prev.temp_min, stats.temp_min),
                    temp_max=max(prev.temp_max, stats.temp_max),
                    count=prev.count + stats.count,
                )
    return merged


@dataclass(frozen=True, slots=True)
class TechniqueCall:
    technique: Technique
    variants: frozenset[Variant]
    pulse_reversals: int = 0
    reason: Optional[str] = None


def _qualifying_events(
    events: Sequence[ChargingEvent], min_soc: int
) -> list[ChargingEvent]:
    return [e for e in events if e.steps and e.max_soc >= min_soc]


def plateau_voltages(events: Sequence[ChargingEvent], min_soc: int) -> list[int]:
    """Per-event full-charge voltage: the maximum the event charged to.

    Aged batteries report their terminal 100% reading below the charging
    ceiling, so the per-event maximum, not the last reading, identifies
    the charger design.
    """
    return [
        max(s.voltage for s in e.samples())
        for e in _qualifying_events(events, min_soc)
    ]


def classify_technique(
    events: Sequence[ChargingEvent],
    config: ClassifierConfig = DEFAULT_CONFIG,
    variant_report: Optional[VariantReport] = None,
) -> TechniqueCall:
    """Label a device's charging technique from its events.

    Pulse charging is checked first (an oscillation plus a band voltage
    would otherwise read as a plain band member), then the quick-charging
    peak, then the 4.20/4.35 V band of the mean full-charge voltage.
    Requires at least one event reaching ``config.qualify_min_soc``.
    """
    variants = variant_report or detect_variants(events, config)
    qualifying = _qualifying_events(events, config.qualify_min_soc)
    if not qualifying:
        return TechniqueCall(
            Technique.UNKNOWN,
            variants.flags,
            reason=f"no event reaching soc >= {config.qualify_min_soc}",
        )

    curve = curves_mod.pooled_curve(events, CurveKind.VOLTAGE)
    pulse = detect_pulse(
        curve,
        config.pulse_min_reversals,
        config.pulse_min_amplitude_mv,
        config.pulse_window,
        config.pulse_min_levels,
    )
    if pulse.detected:
        return TechniqueCall(Technique.FAST_PULSE, variants.flags, pulse.reversals)

    max_voltage = max(max(s.voltage for s in e.samples()) for e in events if e.steps)
    if max_voltage > config.bands.quick_threshold:
        return TechniqueCall(Technique.QUICK, variants.flags, pulse.reversals)

    finals = plateau_voltages(events, config.qualify_min_soc)
    mean_final = sum(finals) / len(finals)
    band = config.bands.band_of(mean_final)
    if band is None:
        return TechniqueCall(
            Technique.UNKNOWN,
            variants.flags,
            pulse.reversals,
            reason=f"mean full-charge voltage {mean_final:.0f} mV outside both bands",
        )
    return TechniqueCall(band, variants.flags, pulse.reversals)


def build_profile(
    group_id: str,
    model: str,
    events: Sequence[ChargingEvent],
    config: ClassifierConfig = DEFAULT_CONFIG,
) -> DeviceProfile:
    """Assemble the full classification for one device or model group."""
    notes: list[str] = []
    variant_report = detect_variants(events, config)
    call = classify_technique(events, config, variant_report)
    if call.reason:
        notes.append(f"technique: {call.reason}")
    notes.extend(variant_report.skipped)

    time_curve = curves_mod.pooled_curve(
        events, CurveKind.CHARGE_TIME, config.include_terminal
    )
    gauge = infer_fuel_gauge(
        time_curve,
        config.fuel_gauge_window,
        config.fuel_gauge_min_levels,
        config.fuel_gauge_dispersion,
    )
    if gauge.reason:
        notes.append(f"fuel_gauge: {gauge.reason}")

    initial_voltage: Optional[int] = None
    start_point = curves_mod.pooled_curve(events, CurveKind.VOLTAGE).points.get(1)
    if start_point is not None:
        initial_voltage = round(start_point.value)
    else:
        notes.append("initial_voltage: no sample at soc 1")

    endpoints = [event_endpoints(e) for e in events if e.steps]
    full_charge_finals = [ep.final_voltage for ep in endpoints if ep.is_full_charge]
    final_mean = (
        sum(full_charge_finals) / len(full_charge_finals)
        if full_charge_finals
        else None
    )

    nominal = NOMINAL_FINAL_MV.get(call.technique)
    loss: Optional[float] = None
    if nominal is None:
        notes.append("capacity_loss: only estimated for the 4.20/4.35 V designs")
    elif final_mean is None:
        notes.append("capacity_loss: no event reached soc 100")
    else:
        loss = capacity_loss(full_charge_finals, nominal)

    return DeviceProfile(
        user_id=group_id,
        model=model,
        technique=call.technique,
        variants=call.variants,
        fuel_gauge=gauge.gauge,
        initial_voltage=initial_voltage,
        final_voltage_mean=final_mean,
        nominal_final_voltage=nominal,
        capacity_loss_pct=loss,
        event_count=len(events),
        notes=tuple(notes),
    )


def profile_to_record(profile: DeviceProfile, config: ClassifierConfig) -> dict:
    """JSONL record for a profile, carrying the configuration used."""
    return {
        "user": profile.user_id,
        "model": profile.model,
        "technique": profile.technique.value,
        "variants": sorted(v.value for v in profile.variants),
        "fuel_gauge": profile.fuel_gauge.value,
        "initial_voltage_mv": profile.initial_voltage,
        "final_voltage_mean_mv": profile.final_voltage_mean,
        "nominal_final_voltage_mv": profile.nominal_final_voltage,
        "capacity_loss_pct": profile.capacity_loss_pct,
        "event_count": profile.event_count,
        "notes": list(profile.notes),
        "config": config.to_dict(),
    }


def record_to_profile(record: dict) -> DeviceProfile:
    return DeviceProfile(
        user_id=record["user"],
        model=record["model"],
        technique=Technique(record["technique"]),
        variants=frozenset(Variant(v) for v in record["variants"]),
        fuel_gauge=FuelGauge(record["fuel_gauge"]),
        initial_voltage=record["initial_voltage_mv"],
        final_voltage_mean=record["final_voltage_mean_mv"],
        nominal_final_voltage=record["nominal_final_voltage_mv"],
        capacity_loss_pct=record["capacity_loss_pct"],
        event_count=record["event_count"],
        notes=tuple(record.get("notes", ())),
    )
