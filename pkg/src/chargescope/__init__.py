"""Battery telemetry analytics toolkit.

Segments SOC-update sample logs into charging events, classifies charging
techniques and fuel-gauge types, estimates capacity loss from full-charge
voltages, detects inefficient charging behavior, and generates synthetic
traces with ground truth for verification.
"""

from .behavior import (
    detect_fluctuation,
    detect_full_plugged,
    estimate_wasted_energy,
)
from .classification import (
    ClassifierConfig,
    TechniqueBands,
    build_profile,
    capacity_loss,
    classify_technique,
    detect_pulse,
    detect_variants,
    health_summary,
    infer_fuel_gauge,
)
from .curves import charge_time_curve, pooled_curve, temperature_curve, voltage_curve
from .domain import (
    BatterySample,
    BehaviorReport,
    Charger,
    ChargeStep,
    ChargingEvent,
    CurveKind,
    DeviceProfile,
    FuelGauge,
    Health,
    Screen,
    SocCurve,
    Technique,
    Variant,
)
from .ingestion import (
    FilterCriteria,
    LogFormat,
    filter_samples,
    group_by_user,
    parse_samples,
)
from .segmentation import (
    c_rate,
    event_endpoints,
    pair_consecutive,
    segment_events,
)
from .synthgen import FluctuationPattern, FullPluggedPattern, TraceSpec, generate_trace

__version__ = "0.1.0"

__all__ = [
    "BatterySample",
    "BehaviorReport",
    "Charger",
    "ChargeStep",
    "ChargingEvent",
    "ClassifierConfig",
    "CurveKind",
    "DeviceProfile",
    "FilterCriteria",
    "FluctuationPattern",
    "FuelGauge",
    "FullPluggedPattern",
    "Health",
    "LogFormat",
    "Screen",
    "SocCurve",
    "Technique",
    "TechniqueBands",
    "TraceSpec",
    "Variant",
    "build_profile",
    "c_rate",
    "capacity_loss",
    "charge_time_curve",
    "classify_technique",
    "detect_fluctuation",
    "detect_full_plugged",
    "detect_pulse",
    "detect_variants",
    "estimate_wasted_energy",
    "event_endpoints",
    "filter_samples",
    "generate_trace",
    "group_by_user",
    "health_summary",
    "infer_fuel_gauge",
    "pair_consecutive",
    "parse_samples",
    "pooled_curve",
    "segment_events",
    "temperature_curve",
    "voltage_curve",
    "__version__",
]
