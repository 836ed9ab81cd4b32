"""Per-SOC median curve aggregation."""
from __future__ import annotations

import random

import pytest

from chargescope.curves import (
    charge_time_curve,
    curve_rows,
    pooled_curve,
    temperature_curve,
    voltage_curve,
)
from chargescope.domain import CurveKind
from chargescope.segmentation import pair_consecutive, segment_events
from chargescope.synthgen import TraceSpec, generate_trace
from chargescope.domain import Technique

from conftest import make_sample, ramp_samples


def events_of(samples):
    return segment_events(pair_consecutive(samples))


class TestVoltageCurve:
    def test_single_linear_series_is_identity(self):
        samples = ramp_samples(range(1, 101), voltage_of=lambda s: 3600 + 6 * s)
        curves = voltage_curve(events_of(samples))
        curve = curves["u1"]
        for level in range(1, 101):
            assert curve.points[level].value == 3600 + 6 * level
            assert curve.points[level].count == 1

    def test_median_of_two_series_is_midpoint(self):
        low = ramp_samples(range(1, 51), voltage_of=lambda s: 4000)
        high = ramp_samples(
            range(1, 51), voltage_of=lambda s: 4020, start=1_000_000.0
        )
        curves = voltage_curve(events_of(low) + events_of(high))
        curve = curves["u1"]
        for level in range(1, 51):
            assert curve.points[level].value == 4010
            assert curve.points[level].count == 2

    def test_synthetic_dlc_plateaus_at_4350(self):
        samples, _ = generate_trace(TraceSpec(technique=Technique.DLC))
        curve = voltage_curve(events_of(samples))["u0000"]
        for level in range(80, 101):
            assert abs(curve.points[level].value - 4350) <= 5

    def test_absent_levels_absent_from_curve(self):
        samples = ramp_samples(range(40, 61))
        curve = voltage_curve(events_of(samples))["u1"]
        assert curve.levels() == list(range(40, 61))


class TestChargeTimeCurve:
    def test_uniform_36s_per_percent_is_flat(self):
        samples = ramp_samples(range(1, 101), dt=36.0)
        curve = charge_time_curve(events_of(samples))["u1"]
        for level in curve.levels():
            assert curve.points[level].value == 36.0

    def test_even_count_median_averages_middle_two(self):
        fast = ramp_samples(range(10, 21), dt=30.0)
        slow = ramp_samples(range(10, 21), dt=50.0, start=1_000_000.0)
        curve = charge_time_curve(events_of(fast) + events_of(slow))["u1"]
        for level in range(11, 21):
            assert curve.points[level].value == 40.0

    def test_coulomb_counter_trace_flat_over_cc_phase(self):
        samples, _ = generate_trace(TraceSpec(cc_rate=0.5))
        curve = charge_time_curve(events_of(samples))["u0000"]
        for level in range(11, 81):
            assert curve.points[level].value == pytest.approx(72.0)

    def test_multi_percent_step_attributed_to_span(self):
        a = make_sample(timestamp=0.0, soc=10)
        b = make_sample(timestamp=144.0, soc=14)
        curve = charge_time_curve(events_of([a, b]))["u1"]
        assert curve.levels() == [11, 12, 13, 14]
        for level in curve.levels():
            assert curve.points[level].value == 36.0

    def test_terminal_step_excluded_by_default(self):
        # Slow closing step would dominate its destination level.
        samples = ramp_samples(range(10, 15), dt=72.0)
        gap = make_sample(timestamp=samples[-1].timestamp + 7200.0, soc=15)
        tail = ramp_samples(range(16, 20), dt=72.0, start=gap.timestamp + 72.0)
        events = events_of(samples + [gap] + tail)
        curve = charge_time_curve(events)["u1"]
        assert 15 not in curve.points
        included = charge_time_curve(events, include_terminal=True)["u1"]
        assert included.points[15].value == 7200.0

    def test_values_strictly_positive(self):
        samples, _ = generate_trace(TraceSpec(sessions=((1, 100), (20, 90))))
        curve = charge_time_curve(events_of(samples))["u0000"]
        assert all(p.value > 0 for p in curve.points.values())


class TestTemperatureCurve:
    def test_constant_trace_is_flat(self):
        samples = ramp_samples(range(1, 50), temperature_of=lambda s: 29.0)
        curve = temperature_curve(events_of(samples))["u1"]
        assert set(p.value for p in curve.points.values()) == {29.0}

    def test_fast_charging_sits_8_to_10_degrees_above(self):
        dlc, _ = generate_trace(TraceSpec(technique=Technique.DLC, user_id="a"))
        quick, _ = generate_trace(TraceSpec(technique=Technique.QUICK, user_id="b"))
        dlc_curve = temperature_curve(events_of(dlc))["a"]
        quick_curve = temperature_curve(events_of(quick))["b"]
        for level in range(30, 71):
            delta = quick_curve.points[level].value - dlc_curve.points[level].value
            assert 8.0 <= delta <= 10.0

    def test_single_sample_per_level_equals_raw_series(self):
        samples = ramp_samples(range(1, 30), temperature_of=lambda s: 20.0 + s / 10.0)
        curve = temperature_curve(events_of(samples))["u1"]
        for sample in samples:
            assert curve.points[sample.soc].value == sample.temperature


class TestCurveProperties:
    def test_permutation_invariant_over_events(self):
        rng = random.Random(11)
        sessions = [
            ramp_samples(
                range(10, 90),
                voltage_of=lambda s, off=off: 3600 + 7 * s + off,
                start=i * 1e6,
            )
            for i, off in enumerate(rng.sample(range(0, 50, 5), 5))
        ]
        events = [e for chunk in sessions for e in events_of(chunk)]
        base = voltage_curve(events)["u1"]
        rng.shuffle(events)
        shuffled = voltage_curve(events)["u1"]
        assert base == shuffled

    def test_pooled_union_equals_pooling_of_subsets(self):
        first = ramp_samples(range(1, 60), voltage_of=lambda s: 3600 + 6 * s)
        second = ramp_samples(
            range(30, 90), voltage_of=lambda s: 3650 + 6 * s, start=1e6
        )
        third = ramp_samples(
            range(10, 40), voltage_of=lambda s: 3700 + 6 * s, start=2e6
        )
        all_events = events_of(first) + events_of(second) + events_of(third)
        union = pooled_curve(all_events, CurveKind.VOLTAGE)
        # Medians must come from pooled raw values, never medians of medians.
        by_level: dict[int, list[float]] = {}
        for chunk in (first, second, third):
            for s in chunk:
                by_level.setdefault(s.soc, []).append(float(s.voltage))
        import statistics

        for level, values in by_level.items():
            assert union.points[level].value == statistics.median(values)
            assert union.points[level].count == len(values)


class TestCurveExport:
    def test_rows_flag_low_confidence_levels(self):
        samples = ramp_samples(range(1, 6), voltage_of=lambda s: 4000)
        curve = voltage_curve(events_of(samples))["u1"]
        rows = list(curve_rows("u1", curve))
        assert all(row[5] == 1 for row in rows)  # single support everywhere
        assert [row[2] for row in rows] == list(range(1, 6))
        assert rows[0][1] == "voltage"

    def test_model_grouping_pools_devices(self):
        a = ramp_samples(range(1, 40), voltage_of=lambda s: 4000, user_id="a")
        b = ramp_samples(
            range(1, 40), voltage_of=lambda s: 4020, user_id="b", start=1e6
        )
        curves = voltage_curve(events_of(a) + events_of(b), group_key="model")
        assert list(curves) == ["model-a"]
        assert curves["model-a"].points[10].value == 4010
