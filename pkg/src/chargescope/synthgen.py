"""Synthetic battery trace generation with known ground truth.

Emits one sample per SOC percent along phenomenological waveform
templates, one template per charging technique:

* 4.20 V and 4.35 V designs ramp voltage linearly from 3600 mV up to the
  ceiling, hold it through the constant-voltage phase, and taper the
  per-percent time geometrically until the final step runs at 0.1C;
* quick charging ramps to a 4480 mV peak, then declines to 4350 mV while
  the current tapers;
* pulse charging superimposes a +-40 mV square oscillation between 30%
  and 95%.

Capacity loss shifts only the terminal 100% reading down, 10 mV per
percent, leaving the charging ceiling itself intact.  Temperature falls
until 20%, holds flat to 80%, then falls again, sitting 9 degrees higher
for the fast techniques.  Voltage-based fuel gauges jitter each CC-phase
per-percent time by a uniform relative factor.

Generation is deterministic given the spec (including its seed); the
ground truth returned alongside each trace is the oracle the analysis
pipeline is verified against.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional

from .domain import (
    BatterySample,
    Charger,
    FuelGauge,
    Health,
    Screen,
    Technique,
    Variant,
)

BASE_VOLTAGE_MV = 3600
PLATEAU_MV = {Technique.CC_CV: 4200, Technique.DLC: 4350, Technique.FAST_PULSE: 4350}
QUICK_PEAK_MV = 4480
QUICK_END_MV = 4350
PULSE_AMPLITUDE_MV = 40
PULSE_WINDOW = (30, 95)
CV_FINAL_C = 0.1       # rate the geometric taper lands on at the last step
CV_FIRST_C = 0.05      # restore-phase rate over the first 10%
CV_FIRST_END_SOC = 10
CC_TAIL_START_SOC = 95
MV_PER_PERCENT_LOSS = 10.0

TEMP_START_C = 32.0
TEMP_FLAT_C = 29.0
TEMP_END_C = 27.0
FAST_TEMP_OFFSET_C = 9.0

MODEL_BY_TECHNIQUE = {
    Technique.CC_CV: "synth-cccv",
    Technique.DLC: "synth-dlc",
    Technique.QUICK: "synth-quick",
    Technique.FAST_PULSE: "synth-pulse",
}


@dataclass(frozen=True)
class FluctuationPattern:
    """Append a SOC ping-pong block: level, level+1, level, ... with
    ``reversals`` direction changes, screen on throughout."""

    level: int = 5
    reversals: int = 4
    sample_gap_s: float = 30.0


@dataclass(frozen=True)
class FullPluggedPattern:
    """Keep the device plugged at 100% for ``hours``, dipping to
    ``dip_soc`` once per ``cycle_period_s`` and recharging."""

    hours: float = 10.0
    dip_soc: int = 99
    cycle_period_s: float = 540.0
    recharge_s: float = 60.0


@dataclass(frozen=True)
class TraceSpec:
    """Parameters of one synthetic user trace."""

    technique: Technique = Technique.CC_CV
    variants: frozenset[Variant] = frozenset()
    fuel_gauge: FuelGauge = FuelGauge.COULOMB_COUNTER
    cc_rate: float = 0.5
    fast_rate: float = 1.1
    capacity_loss_pct: float = 0.0
    voltage_noise_mv: float = 0.0
    time_jitter_rel: float = 0.4
    cv_onset_soc: int = 80        # where the constant-voltage phase begins
    quick_cv_onset_soc: int = 60
    sessions: tuple[tuple[int, int], ...] = ((1, 100),)
    session_gap_s: float = 4 * 3600.0
    fluctuation: Optional[FluctuationPattern] = None
    full_plugged: Optional[FullPluggedPattern] = None
    user_id: str = "u0000"
    model: Optional[str] = None
    start_time: float = 1_600_000_000.0
    seed: int = 0

    def validate(self) -> None:
        if self.cc_rate <= 0 or self.fast_rate <= 0:
            raise ValueError("rates must be positive")
        if self.voltage_noise_mv < 0:
            raise ValueError("voltage noise must be non-negative")
        if not 0 <= self.time_jitter_rel < 1:
            raise ValueError("time jitter must be in [0, 1)")
        if self.capacity_loss_pct < 0:
            raise ValueError("capacity loss must be non-negative")
        if not 50 <= self.cv_onset_soc <= 90:
            raise ValueError("CV onset must lie in 50..90")
        if not self.sessions:
            raise ValueError("at least one session required")
        for start, end in self.sessions:
            if not 1 <= start < end <= 100:
                raise ValueError(f"bad session range {start}..{end}")
        if self.variants and self.technique in (Technique.QUICK, Technique.FAST_PULSE):
            raise ValueError(
                "variants only combine with the 4.20/4.35 V designs; a quick "
                "ramp or pulse train leaves no room for them"
            )
        if self.full_plugged is not None:
            if self.sessions[-1][1] != 100:
                raise ValueError(
                    "full-plugged pattern requires a final session to 100%"
                )
            p = self.full_plugged
            if p.hours <= 0 or not 0 <= p.dip_soc <= 100:
                raise ValueError("bad full-plugged pattern")
            if not 0 < p.recharge_s < p.cycle_period_s:
                raise ValueError("recharge time must fit inside the cycle period")
        if self.fluctuation is not None:
            f = self.fluctuation
            if not (0 <= f.level <= 99 and f.reversals >= 1 and f.sample_gap_s > 0):
                raise ValueError("bad fluctuation pattern")
        if self.technique not in MODEL_BY_TECHNIQUE:
            raise ValueError(f"cannot generate {self.technique}")

    @property
    def effective_model(self) -> str:
        return self.model or MODEL_BY_TECHNIQUE[self.technique]


def _charge_rate_at(spec: TraceSpec, level: int) -> float:
    """Nominal C-rate of the step arriving at ``level`` (before jitter)."""
    if spec.technique is Technique.QUICK:
        onset = spec.quick_cv_onset_soc
        if level <= onset:
            return spec.fast_rate
        taper = (spec.fast_rate / CV_FINAL_C) ** (1.0 / (100 - onset))
        return spec.fast_rate / taper ** (level - onset)

    base = (
        spec.fast_rate if spec.technique is Technique.FAST_PULSE else spec.cc_rate
    )
    if Variant.CV_FIRST in spec.variants and level <= CV_FIRST_END_SOC:
        return CV_FIRST_C
    cv_end = 100
    if Variant.CC_TAIL in spec.variants:
        if level > CC_TAIL_START_SOC:
            return base
        cv_end = CC_TAIL_START_SOC
    onset = spec.cv_onset_soc
    if level <= onset:
        return base
    taper = (base / CV_FINAL_C) ** (1.0 / (cv_end - onset))
    return base / taper ** (level - onset)


def _is_cc_level(spec: TraceSpec, level: int) -> bool:
    if spec.technique is Technique.QUICK:
        return level <= spec.quick_cv_onset_soc
    if Variant.CV_FIRST in spec.variants and level <= CV_FIRST_END_SOC:
        return False
    return level <= spec.cv_onset_soc


def _voltage_at(spec: TraceSpec, level: int) -> float:
    if spec.technique is Technique.QUICK:
        onset = spec.quick_cv_onset_soc
        if level >= 100:
            return QUICK_END_MV - MV_PER_PERCENT_LOSS * spec.capacity_loss_pct
        if level <= onset:
            return BASE_VOLTAGE_MV + (QUICK_PEAK_MV - BASE_VOLTAGE_MV) * (level - 1) / (
                onset - 1
            )
        return QUICK_PEAK_MV - (QUICK_PEAK_MV - QUICK_END_MV) * (level - onset) / (
            100 - onset
        )

    plateau = PLATEAU_MV[spec.technique]
    if level >= 100:
        v = plateau - MV_PER_PERCENT_LOSS * spec.capacity_loss_pct
    elif level <= spec.cv_onset_soc:
        v = BASE_VOLTAGE_MV + (plateau - BASE_VOLTAGE_MV) * (level - 1) / (
            spec.cv_onset_soc - 1
        )
    else:
        v = float(plateau)
    if (
        spec.technique is Technique.FAST_PULSE
        and PULSE_WINDOW[0] <= level <= PULSE_WINDOW[1]
    ):
        v += PULSE_AMPLITUDE_MV if level % 2 == 0 else -PULSE_AMPLITUDE_MV
    return v


def _temperature_at(spec: TraceSpec, level: int) -> float:
    if level <= 20:
        t = TEMP_START_C + (TEMP_FLAT_C - TEMP_START_C) * (level - 1) / 19
    elif level <= 80:
        t = TEMP_FLAT_C
    else:
        t = TEMP_FLAT_C + (TEMP_END_C - TEMP_FLAT_C) * (level - 80) / 20
    if spec.technique in (Technique.QUICK, Technique.FAST_PULSE):
        t += FAST_TEMP_OFFSET_C
    return round(t, 1)


def generate_trace(spec: TraceSpec) -> tuple[list[BatterySample], dict]:
    """Emit one user's samples plus the ground-truth labels.

    Returns (samples, truth).  ``truth`` records the generated technique,
    variants, fuel gauge, capacity loss, per-session sample spans, and
    any behavior patterns; byte-identical output is guaranteed for
    identical specs.
    """
    spec.validate()
    rng = random.Random(f"{spec.seed}:{spec.user_id}")
    model = spec.effective_model
    samples: list[BatterySample] = []
    session_truth: list[dict] = []
    t = spec.start_time
    jitter = spec.time_jitter_rel if spec.fuel_gauge is FuelGauge.VOLTAGE_BASED else 0.0

    def emit(soc: int, when: float, voltage: float, screen: Screen = Screen.OFF) -> None:
        if spec.voltage_noise_mv > 0:
            voltage += rng.gauss(0.0, spec.voltage_noise_mv)
        samples.append(
            BatterySample(
                timestamp=when,
                user_id=spec.user_id,
                model=model,
                soc=soc,
                voltage=round(voltage),
                temperature=_temperature_at(spec, max(1, min(soc, 100))),
                health=Health.GOOD,
                charger=Charger.AC,
                charging=True,
                screen=screen,
            )
        )

    for index, (soc_start, soc_end) in enumerate(spec.sessions):
        if index > 0:
            t += spec.session_gap_s
        first_index = len(samples)
        session_start_t = t
        emit(soc_start, t, _voltage_at(spec, soc_start))
        for level in range(soc_start + 1, soc_end + 1):
            dt = 36.0 / _charge_rate_at(spec, level)
            if jitter > 0 and _is_cc_level(spec, level):
                dt *= 1.0 + rng.uniform(-jitter, jitter)
            t += dt
            emit(level, t, _voltage_at(spec, level))
        session_truth.append(
            {
                "soc_start": soc_start,
                "soc_end": soc_end,
                "first_index": first_index,
                "n_samples": len(samples) - first_index,
                "t_start": session_start_t,
                "t_end": t,
            }
        )

    behavior_truth: dict = {}
    if spec.full_plugged is not None:
        pattern = spec.full_plugged
        final_v = _voltage_at(spec, 100)
        deadline = t + pattern.hours * 3600.0
        cycles = 0
        while t + pattern.cycle_period_s <= deadline:
            t += pattern.cycle_period_s - pattern.recharge_s
            emit(pattern.dip_soc, t, final_v)
            t += pattern.recharge_s
            emit(100, t, final_v)
            cycles += 1
        behavior_truth["full_plugged"] = {
            "hours": pattern.hours,
            "cycles": cycles,
            "dip_soc": pattern.dip_soc,
        }

    if spec.fluctuation is not None:
        pattern = spec.fluctuation
        t += 600.0
        level = pattern.level
        for k in range(pattern.reversals + 2):
            soc = level if k % 2 == 0 else level + 1
            emit(soc, t, _voltage_at(spec, soc), screen=Screen.ON)
            t += pattern.sample_gap_s
        behavior_truth["fluctuation"] = {
            "level": pattern.level,
            "reversals": pattern.reversals,
        }

    truth = {
        "user": spec.user_id,
        "model": model,
        "technique": spec.technique.value,
        "variants": sorted(v.value for v in spec.variants),
        "fuel_gauge": spec.fuel_gauge.value,
        "capacity_loss_pct": spec.capacity_loss_pct,
        "cc_rate": spec.cc_rate,
        "sessions": session_truth,
        **behavior_truth,
    }
    return samples, truth


def multi_session_spec(
    spec: TraceSpec, n_sessions: int, rng: random.Random
) -> TraceSpec:
    """Derive a spec with ``n_sessions`` random SOC ranges.

    Each later session starts at or below the previous end, so the gap
    step never gains charge and always sits below any termination rate.
    """
    sessions = []
    prev_end = None
    for _ in range(n_sessions):
        if prev_end is None:
            start = rng.randint(1, 40)
        else:
            start = rng.randint(1, max(1, prev_end - 5))
        end = rng.randint(min(99, start + 20), 100)
        sessions.append((start, end))
        prev_end = end
    return replace(spec, sessions=tuple(sessions))


def generate_corpus(specs: Iterable[TraceSpec]) -> Iterator[tuple[list[BatterySample], dict]]:
    for spec in specs:
        yield generate_trace(spec)
