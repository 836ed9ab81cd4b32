"""Parse, validate, filter, and partition raw battery sample logs.

The canonical interchange format is JSON Lines, one SOC-update record per
line; CSV with a fixed header is accepted as an alternative.  Malformed
lines are never silently dropped: every rejected line is reported with its
line number and a reason.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, IO, Iterable, Iterator, Optional, Union

from .domain import (
    BatterySample,
    Charger,
    Health,
    Screen,
    plausibility_error,
)

# JSONL record keys; CSV uses the same fields in this column order.
FIELDS = (
    "time",
    "user",
    "model",
    "soc",
    "voltage_mv",
    "temp_c",
    "health",
    "charger",
    "charging",
    "screen",
)

_HEALTH_ALIASES = {
    "good": Health.GOOD,
    "overheat": Health.OVERHEAT,
    "over_voltage": Health.OVER_VOLTAGE,
}

_CHARGERS = {c.value: c for c in Charger}
_SCREENS = {s.value: s for s in Screen}


class LogFormat(Enum):
    JSONL = "jsonl"
    CSV = "csv"


@dataclass(frozen=True, slots=True)
class ParseIssue:
    """A rejected input line: its 1-based line number and the reason."""

    line_no: int
    reason: str


@dataclass(frozen=True)
class FilterCriteria:
    """Sample predicates; unset criteria pass everything through."""

    charger: Optional[Charger] = None
    screen: Optional[Screen] = None
    health: Optional[frozenset[Health]] = None
    model: Optional[str] = None

    def matches(self, sample: BatterySample) -> bool:
        if self.charger is not None and sample.charger is not self.charger:
            return False
        if self.screen is not None and sample.screen is not self.screen:
            return False
        if self.health is not None and sample.health not in self.health:
            return False
        if self.model is not None and sample.model != self.model:
            return False
        return True


def _normalize_health(raw: str) -> Health:
    # Crowdsourced logs are dirty; unknown strings map to OTHER, never error.
    key = raw.strip().lower().replace(" ", "_").replace("-", "_")
    return _HEALTH_ALIASES.get(key, Health.OTHER)


def _normalize_soc(raw) -> Optional[int]:
    """Battery level to integer percent.

    Integers are taken as percent.  Fractional values in [0, 1] are
    fractions of full charge and scale by 100 (0.99 -> 99); other floats
    round to the nearest percent.
    """
    if isinstance(raw, bool):
        return None
    if isinstance(raw, int):
        return raw
    if isinstance(raw, float):
        if 0.0 <= raw <= 1.0:
            return round(raw * 100.0)
        return round(raw)
    return None


def _parse_number(raw: str):
    text = raw.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)  # may raise ValueError; caller reports


def _coerce_bool(raw) -> Optional[bool]:
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, str):
        text = raw.strip().lower()
        if text in ("true", "1"):
            return True
        if text in ("false", "0"):
            return False
    return None


def record_to_sample(record: dict, time_scale: float = 1.0) -> BatterySample:
    """Build a validated sample from a decoded record.

    Raises ValueError with a human-readable reason on any schema violation.
    """
    for field in FIELDS:
        if field not in record:
            raise ValueError(f"missing field '{field}'")

    time_raw = record["time"]
    if isinstance(time_raw, bool) or not isinstance(time_raw, (int, float)):
        raise ValueError("invalid time")
    timestamp = float(time_raw) * time_scale

    user_id = record["user"]
    model = record["model"]
    if not isinstance(user_id, str) or not user_id:
        raise ValueError("invalid user")
    if not isinstance(model, str):
        raise ValueError("invalid model")

    soc = _normalize_soc(record["soc"])
    if soc is None:
        raise ValueError("invalid soc")

    voltage_raw = record["voltage_mv"]
    if isinstance(voltage_raw, bool) or not isinstance(voltage_raw, int):
        raise ValueError("invalid voltage_mv")

    temp_raw = record["temp_c"]
    if isinstance(temp_raw, bool) or not isinstance(temp_raw, (int, float)):
        raise ValueError("invalid temp_c")
    temperature = float(temp_raw)

    reason = plausibility_error(soc, voltage_raw, temperature)
    if reason is not None:
        raise ValueError(reason)

    health_raw = record["health"]
    if not isinstance(health_raw, str):
        raise ValueError("invalid health")

    charger_raw = record["charger"]
    if not isinstance(charger_raw, str) or charger_raw.strip().lower() not in _CHARGERS:
        raise ValueError(f"invalid charger {record['charger']!r}")

    screen_raw = record["screen"]
    if not isinstance(screen_raw, str) or screen_raw.strip().lower() not in _SCREENS:
        raise ValueError(f"invalid screen {record['screen']!r}")

    charging = _coerce_bool(record["charging"])
    if charging is None:
        raise ValueError("invalid charging flag")

    return BatterySample(
        timestamp=timestamp,
        user_id=user_id,
        model=model,
        soc=soc,
        voltage=voltage_raw,
        temperature=temperature,
        health=_normalize_health(health_raw),
        charger=_CHARGERS[charger_raw.strip().lower()],
        charging=charging,
        screen=_SCREENS[screen_raw.strip().lower()],
    )


def sample_to_record(sample: BatterySample) -> dict:
    """Inverse of record_to_sample for valid samples."""
    return {
        "time": sample.timestamp,
        "user": sample.user_id,
        "model": sample.model,
        "soc": sample.soc,
        "voltage_mv": sample.voltage,
        "temp_c": sample.temperature,
        "health": sample.health.value,
        "charger": sample.charger.value,
        "charging": sample.charging,
        "screen": sample.screen.value,
    }


def sample_to_json_line(sample: BatterySample) -> str:
    return json.dumps(sample_to_record(sample), separators=(",", ":"))


def sample_to_csv_row(sample: BatterySample) -> list[str]:
    record = sample_to_record(sample)
    row = []
    for field in FIELDS:
        value = record[field]
        if isinstance(value, bool):
            row.append("true" if value else "false")
        else:
            row.append(str(value))
    return row


def _csv_row_to_record(row: list[str]) -> dict:
    if len(row) != len(FIELDS):
        raise ValueError(f"expected {len(FIELDS)} columns, got {len(row)}")
    record = dict(zip(FIELDS, (cell.strip() for cell in row)))
    record["time"] = _parse_number(record["time"])
    record["soc"] = _parse_number(record["soc"])
    record["voltage_mv"] = _parse_number(record["voltage_mv"])
    record["temp_c"] = _parse_number(record["temp_c"])
    return record


def _iter_text_lines(stream) -> Iterator[str]:
    for line in stream:
        if isinstance(line, bytes):
            yield line.decode("utf-8")
        else:
            yield line


def iter_parse(
    stream: Union[IO[str], IO[bytes], Iterable[str]],
    fmt: LogFormat = LogFormat.JSONL,
    time_unit: str = "s",
    on_issue: Optional[Callable[[ParseIssue], None]] = None,
) -> Iterator[BatterySample]:
    """Stream samples out of a line-delimited log.

    Args:
        stream: file object or iterable of lines (text or bytes).
        fmt: input format; CSV requires the exact header row.
        time_unit: "s" for epoch seconds, "ms" to rescale milliseconds.
        on_issue: callback invoked for each rejected line.

    Yields validated samples in input order.  An unreadable stream raises;
    per-line schema violations are reported through ``on_issue`` and the
    line is skipped.
    """
    if time_unit not in ("s", "ms"):
        raise ValueError(f"unsupported time unit {time_unit!r}")
    time_scale = 1.0 if time_unit == "s" else 1e-3

    report = on_issue or (lambda issue: None)
    lines = _iter_text_lines(stream)

    if fmt is LogFormat.CSV:
        import csv as _csv

        reader = _csv.reader(lines)
        header = next(reader, None)
        if header is None or tuple(cell.strip() for cell in header) != FIELDS:
            raise ValueError("missing or invalid CSV header")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                record = _csv_row_to_record(row)
                yield record_to_sample(record, time_scale)
            except ValueError as exc:
                report(ParseIssue(line_no, str(exc)))
        return

    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            report(ParseIssue(line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            report(ParseIssue(line_no, "record is not an object"))
            continue
        try:
            yield record_to_sample(record, time_scale)
        except ValueError as exc:
            report(ParseIssue(line_no, str(exc)))


def parse_samples(
    stream: Union[IO[str], IO[bytes], Iterable[str]],
    fmt: LogFormat = LogFormat.JSONL,
    time_unit: str = "s",
) -> tuple[list[BatterySample], list[ParseIssue]]:
    """Parse a whole log into samples plus per-line rejection diagnostics."""
    issues: list[ParseIssue] = []
    samples = list(iter_parse(stream, fmt, time_unit, issues.append))
    return samples, issues


def filter_samples(
    samples: Iterable[BatterySample], criteria: FilterCriteria
) -> list[BatterySample]:
    """Keep samples matching all set criteria, preserving input order."""
    return [s for s in samples if criteria.matches(s)]


def group_by_user(samples: Iterable[BatterySample]) -> dict[str, list[BatterySample]]:
    """Partition samples per user, time-sorted, with exact duplicates removed.

    Sorting is stable, so equal timestamps keep input order.  Duplicate
    (user, timestamp, soc) triples collapse to the first occurrence;
    Android re-broadcasts produce such duplicates.
    """
    groups: dict[str, list[BatterySample]] = {}
    for sample in samples:
        groups.setdefault(sample.user_id, []).append(sample)
    for user_samples in groups.values():
        user_samples.sort(key=lambda s: s.timestamp)
        _dedup_sorted(user_samples)
    return groups


def _dedup_sorted(samples: list[BatterySample]) -> None:
    """Drop repeated (timestamp, soc) pairs from a time-sorted list, in place."""
    out = []
    run_start = 0.0
    run_socs: set[int] = set()
    for sample in samples:
        if not out or sample.timestamp != run_start:
            run_start = sample.timestamp
            run_socs = {sample.soc}
            out.append(sample)
        elif sample.soc not in run_socs:
            run_socs.add(sample.soc)
            out.append(sample)
    samples[:] = out
