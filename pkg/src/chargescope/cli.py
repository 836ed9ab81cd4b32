"""Command-line pipeline: segment, profile, behavior, synth, report.

Exit codes: 0 success (possibly with warnings), 1 no analyzable input,
2 I/O or schema failure.  Configuration precedence is flags over config
file over defaults; the effective configuration rides along in every
output artifact (embedded in JSONL records, sidecar .meta.json for CSVs).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import behavior as behavior_mod
from . import report as report_mod
from .classification import (
    ClassifierConfig,
    TechniqueBands,
    build_profile,
    health_summary,
    merge_health_summaries,
    profile_to_record,
)
from .curves import (
    CURVE_COLUMNS,
    GROUP_DEVICE,
    GROUP_MODEL,
    LOW_CONFIDENCE_COUNT,
    curve_rows,
    pooled_curve,
)
from .domain import BatterySample, Charger, CurveKind, FuelGauge, Health, Screen, Technique, Variant
from .ingestion import (
    FilterCriteria,
    LogFormat,
    filter_samples,
    group_by_user,
    iter_parse,
    sample_to_json_line,
)
from .segmentation import (
    LABELED_STEP_COLUMNS,
    TERMINATION_C_DEFAULT,
    event_mean_rate_rows,
    labeled_step_rows,
    pair_consecutive,
    segment_events,
)
from .synthgen import (
    FluctuationPattern,
    FullPluggedPattern,
    TraceSpec,
    generate_trace,
)

EXIT_OK = 0
EXIT_EMPTY = 1
EXIT_FATAL = 2


class CliError(Exception):
    """Fatal I/O or schema problem; maps to exit code 2."""


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# input handling

def _read_samples(args) -> list[BatterySample]:
    """Parse all input files; per-line issues go to stderr."""
    fmt = LogFormat(args.format)
    samples: list[BatterySample] = []
    issue_count = 0

    for path in args.inputs:
        issues_here: list = []
        try:
            with open(path, "r", encoding="utf-8") as stream:
                samples.extend(
                    iter_parse(stream, fmt, args.time_unit, issues_here.append)
                )
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise CliError(f"{path}: {exc}") from exc
        for issue in issues_here[:20]:
            _warn(f"{path}:{issue.line_no}: {issue.reason}")
        if len(issues_here) > 20:
            _warn(f"{path}: {len(issues_here) - 20} further lines rejected")
        issue_count += len(issues_here)

    if issue_count:
        _info(f"rejected {issue_count} malformed line(s)")
    return samples


def _criteria_from_args(args) -> FilterCriteria:
    health = None
    if args.health:
        values = []
        for name in args.health.split(","):
            name = name.strip().lower()
            try:
                values.append(Health(name))
            except ValueError:
                raise CliError(f"unknown health value {name!r}")
        health = frozenset(values)
    return FilterCriteria(
        charger=Charger(args.charger) if args.charger else None,
        screen=Screen(args.screen) if args.screen else None,
        health=health,
        model=args.model,
    )


def _load_filtered_groups(args) -> tuple[dict[str, list[BatterySample]], bool]:
    """Returns (per-user samples, whether any valid input sample existed)."""
    samples = _read_samples(args)
    if not samples:
        return {}, False
    filtered = filter_samples(samples, _criteria_from_args(args))
    if not filtered:
        _warn("all samples removed by filters")
    return group_by_user(filtered), True


def _chunked(items: Sequence, size: int) -> list[Sequence]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def _chunk_size(n_items: int, jobs: int) -> int:
    # A few chunks per worker keeps the pool busy without tiny payloads.
    return max(1, -(-n_items // max(jobs * 4, 1)))


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_meta(path: str, payload: dict) -> None:
    if path == "-":
        return
    Path(path + ".meta.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# segment

def _segment_chunk(payload) -> list[tuple]:
    users, termination_c, per_event_mean = payload
    rows: list[tuple] = []
    row_source = event_mean_rate_rows if per_event_mean else labeled_step_rows
    for _, samples in users:
        events = segment_events(pair_consecutive(samples), termination_c)
        rows.extend(row_source(events))
    return rows


def cmd_segment(args) -> int:
    groups, had_input = _load_filtered_groups(args)
    users = sorted(groups.items())
    out = _open_out(args.output)
    writer = csv.writer(out)
    writer.writerow(LABELED_STEP_COLUMNS)
    row_count = 0
    event_count = 0
    chunks = [
        (chunk, args.termination_c, args.per_event_mean)
        for chunk in _chunked(users, _chunk_size(len(users), args.jobs))
    ]
    for rows in _map_jobs(_segment_chunk, chunks, args.jobs):
        for row in rows:
            writer.writerow(row)
            row_count += 1
        event_count += len({(r[0], r[1]) for r in rows})
    if out is not sys.stdout:
        out.close()
    _write_meta(
        args.output,
        {
            "command": "segment",
            "termination_c": args.termination_c,
            "per_event_mean": args.per_event_mean,
            "time_unit": args.time_unit,
            "rows": row_count,
            "events": event_count,
            "users": len(users),
        },
    )
    _info(f"{row_count} labeled steps, {event_count} events, {len(users)} users")
    if not had_input:
        _warn("no valid input samples")
        return EXIT_EMPTY
    return EXIT_OK


def _map_jobs(func, payloads, jobs: int):
    if jobs <= 1 or len(payloads) <= 1:
        for payload in payloads:
            yield func(payload)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(func, payloads)


# ---------------------------------------------------------------------------
# profile

def _config_from(args) -> ClassifierConfig:
    """Merge defaults <- config file <- flags."""
    values: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read {args.config}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON: {exc.msg}")
        if not isinstance(loaded, dict):
            raise CliError(f"{args.config}: config must be a JSON object")
        values.update(loaded)
    if args.include_terminal:
        values["include_terminal"] = True
    band_values = values.pop("bands", None)
    known = {f.name for f in dataclasses.fields(ClassifierConfig)}
    unknown = set(values) - known
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("pulse_window", "fuel_gauge_window", "cv_first_window",
                "mid_rate_window", "cc_tail_window"):
        if key in values:
            values[key] = tuple(values[key])
    if band_values:
        values["bands"] = TechniqueBands(**band_values)
    return ClassifierConfig(**values)


def _profile_chunk(payload):
    groups, config, termination_c = payload
    profiles = []
    all_curve_rows = []
    health_parts = []
    for group_id, model, members in groups:
        events = []
        group_samples: list[BatterySample] = []
        for _, samples in members:
            events.extend(segment_events(pair_consecutive(samples), termination_c))
            group_samples.extend(samples)
        profile = build_profile(group_id, model, events, config)
        profiles.append(profile_to_record(profile, config))
        for kind in (CurveKind.VOLTAGE, CurveKind.CHARGE_TIME, CurveKind.TEMPERATURE):
            curve = pooled_curve(events, kind, config.include_terminal)
            all_curve_rows.extend(curve_rows(group_id, curve, LOW_CONFIDENCE_COUNT))
        health_parts.append(health_summary(group_samples))
    return profiles, all_curve_rows, merge_health_summaries(health_parts)


def _grouped_members(groups: dict[str, list[BatterySample]], group_key: str):
    """(group_id, model, [(user, samples)]) triples, sorted for determinism."""
    if group_key == GROUP_DEVICE:
        return [
            (user, samples[0].model if samples else "", [(user, samples)])
            for user, samples in sorted(groups.items())
        ]
    by_model: dict[str, list] = {}
    for user, samples in sorted(groups.items()):
        if not samples:
            continue
        by_model.setdefault(samples[0].model, []).append((user, samples))
    return [(model, model, members) for model, members in sorted(by_model.items())]


def cmd_profile(args) -> int:
    config = _config_from(args)
    groups, had_input = _load_filtered_groups(args)
    members = _grouped_members(groups, args.group)

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc.strerror or exc}")

    payloads = [
        (chunk, config, args.termination_c)
        for chunk in _chunked(members, _chunk_size(len(members), args.jobs))
    ]

    profile_path = out_dir / "profiles.jsonl"
    curves_path = out_dir / "curves.csv"
    profile_count = 0
    curve_row_count = 0
    health_parts = []
    with open(profile_path, "w", encoding="utf-8") as profile_out, open(
        curves_path, "w", encoding="utf-8", newline=""
    ) as curves_out:
        curves_writer = csv.writer(curves_out)
        curves_writer.writerow(CURVE_COLUMNS)
        for profiles, rows, health_part in _map_jobs(_profile_chunk, payloads, args.jobs):
            for record in profiles:
                profile_out.write(json.dumps(record, separators=(",", ":")) + "\n")
                profile_count += 1
            for row in rows:
                curves_writer.writerow(row)
                curve_row_count += 1
            health_parts.append(health_part)

    health = merge_health_summaries(health_parts)
    health_path = out_dir / "health.csv"
    with open(health_path, "w", encoding="utf-8", newline="") as health_out:
        writer = csv.writer(health_out)
        writer.writerow(
            ("health", "voltage_min", "voltage_max", "temp_min", "temp_max", "count")
        )
        for key in sorted(health, key=lambda h: h.value):
            stats = health[key]
            writer.writerow(
                (
                    key.value,
                    stats.voltage_min,
                    stats.voltage_max,
                    stats.temp_min,
                    stats.temp_max,
                    stats.count,
                )
            )

    meta = {
        "command": "profile",
        "group": args.group,
        "termination_c": args.termination_c,
        "time_unit": args.time_unit,
        "config": config.to_dict(),
        "profiles": profile_count,
        "curve_rows": curve_row_count,
    }
    _write_meta(str(curves_path), meta)
    _write_meta(str(health_path), meta)
    _info(f"{profile_count} profiles, {curve_row_count} curve rows -> {out_dir}")
    if not had_input:
        _warn("no valid input samples")
        return EXIT_EMPTY
    if profile_count == 0:
        _warn("no devices profiled")
    return EXIT_OK


# ---------------------------------------------------------------------------
# behavior

def cmd_behavior(args) -> int:
    samples = _read_samples(args)
    groups = group_by_user(samples)   # raw, unfiltered: screen state matters
    out = _open_out(args.output)
    count = 0
    for user in sorted(groups):
        user_samples = groups[user]
        events = segment_events(pair_consecutive(user_samples), args.termination_c)
        report = behavior_mod.build_report(
            user,
            user_samples,
            events,
            nominal_capacity_mah=args.capacity_mah,
            maintenance_pct_per_cycle=args.pct_per_cycle,
        )
        record = behavior_mod.report_to_record(report)
        record["config"] = {
            "capacity_mah": args.capacity_mah,
            "pct_per_cycle": args.pct_per_cycle,
            "termination_c": args.termination_c,
        }
        out.write(json.dumps(record, separators=(",", ":")) + "\n")
        count += 1
    if out is not sys.stdout:
        out.close()
    _info(f"{count} behavior reports")
    if count == 0:
        _warn("no users found")
        return EXIT_EMPTY
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth

def _parse_loss(raw) -> tuple[float, float]:
    if isinstance(raw, (int, float)):
        return float(raw), float(raw)
    text = str(raw)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return float(lo), float(hi)
    return float(text), float(text)


def _spec_from_stratum(stratum: dict, user_id: str, seed: int, rng: random.Random) -> TraceSpec:
    technique = Technique(stratum.get("technique", "cccv"))
    gauge_raw = stratum.get("fuel_gauge", "coulomb_counter")
    aliases = {"coulomb": "coulomb_counter", "voltage": "voltage_based"}
    fuel_gauge = FuelGauge(aliases.get(gauge_raw, gauge_raw))
    variants = frozenset(Variant(v) for v in stratum.get("variants", ()))

    loss = stratum.get("loss", 0.0)
    lo, hi = _parse_loss(loss)
    loss_pct = float(rng.randint(round(lo), round(hi))) if hi > lo else lo

    sessions_n = int(stratum.get("sessions", 1))
    sessions = tuple((1, 100) for _ in range(sessions_n))

    fluctuation = None
    if "fluctuation" in stratum and stratum["fluctuation"]:
        f = stratum["fluctuation"]
        fluctuation = FluctuationPattern(level=int(f["level"]), reversals=int(f["reversals"]))
    full_plugged = None
    if stratum.get("full_plugged_hours"):
        full_plugged = FullPluggedPattern(hours=float(stratum["full_plugged_hours"]))

    return TraceSpec(
        technique=technique,
        variants=variants,
        fuel_gauge=fuel_gauge,
        cc_rate=float(stratum.get("cc_rate", 0.5)),
        fast_rate=float(stratum.get("fast_rate", 1.1)),
        capacity_loss_pct=loss_pct,
        voltage_noise_mv=float(stratum.get("noise_mv", 0.0)),
        time_jitter_rel=float(stratum.get("jitter", 0.4)),
        sessions=sessions,
        fluctuation=fluctuation,
        full_plugged=full_plugged,
        user_id=user_id,
        model=stratum.get("model"),
        seed=seed,
    )


def cmd_synth(args) -> int:
    if args.manifest:
        try:
            strata = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read {args.manifest}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.manifest}: invalid JSON: {exc.msg}")
        if not isinstance(strata, list):
            raise CliError("manifest must be a JSON array of strata")
    else:
        stratum = {
            "technique": args.technique,
            "fuel_gauge": args.fuel_gauge,
            "loss": args.loss,
            "noise_mv": args.noise_mv,
            "jitter": args.jitter,
            "sessions": args.sessions,
        }
        if args.variants:
            stratum["variants"] = [v.strip() for v in args.variants.split(",")]
        if args.fluctuation:
            level, reversals = args.fluctuation.split(":", 1)
            stratum["fluctuation"] = {"level": int(level), "reversals": int(reversals)}
        if args.full_plugged_hours:
            stratum["full_plugged_hours"] = args.full_plugged_hours
        strata = [{**stratum, "count": args.count}]

    rng = random.Random(args.seed)
    out = _open_out(args.output)
    truth: dict[str, dict] = {}
    index = 0
    sample_count = 0
    try:
        for stratum in strata:
            for _ in range(int(stratum.get("count", 1))):
                user_id = f"u{index:05d}"
                index += 1
                spec = _spec_from_stratum(stratum, user_id, args.seed, rng)
                samples, user_truth = generate_trace(spec)
                for sample in samples:
                    out.write(sample_to_json_line(sample) + "\n")
                sample_count += len(samples)
                truth[user_id] = user_truth
    except ValueError as exc:
        raise CliError(f"invalid trace spec: {exc}")
    finally:
        if out is not sys.stdout:
            out.close()

    truth_path = args.truth or (args.output + ".truth.json" if args.output != "-" else None)
    if truth_path:
        Path(truth_path).write_text(
            json.dumps(truth, indent=None, separators=(",", ":"), sort_keys=True) + "\n",
            encoding="utf-8",
        )
    _info(f"{index} users, {sample_count} samples")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def _read_jsonl(path: str) -> list[dict]:
    records = []
    try:
        with open(path, "r", encoding="utf-8") as stream:
            for line in stream:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc.msg}")
    return records


def _read_health_csv(path: str) -> list[dict]:
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as stream:
            for row in csv.DictReader(stream):
                rows.append(
                    {
                        "health": row["health"],
                        "voltage_min": int(row["voltage_min"]),
                        "voltage_max": int(row["voltage_max"]),
                        "temp_min": float(row["temp_min"]),
                        "temp_max": float(row["temp_max"]),
                        "count": int(row["count"]),
                    }
                )
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}")
    except (KeyError, ValueError) as exc:
        raise CliError(f"{path}: malformed health table: {exc}")
    return rows


def cmd_report(args) -> int:
    profiles = _read_jsonl(args.profiles)
    behavior_records = _read_jsonl(args.behavior) if args.behavior else []
    health_rows = _read_health_csv(args.health) if args.health else []
    lo, hi = (float(x) for x in args.loss_band.split(":", 1))
    summary = report_mod.build_report(
        profiles,
        behavior_records,
        health_rows,
        loss_band=(lo, hi),
        tail_quantile=args.tail_quantile,
    )
    out = _open_out(args.output)
    if args.format == "markdown":
        out.write(report_mod.render_markdown(summary))
    else:
        out.write(report_mod.render_json(summary) + "\n")
    if out is not sys.stdout:
        out.close()
    if not profiles:
        _warn("no profiles to report on")
        return EXIT_EMPTY
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring

def _add_input_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("inputs", nargs="+", metavar="INPUT", help="sample log file(s)")
    parser.add_argument("-f", "--format", choices=("jsonl", "csv"), default="jsonl")
    parser.add_argument("--time-unit", choices=("s", "ms"), default="s",
                        help="timestamp unit in the input")


def _add_filter_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--charger", choices=("ac", "usb", "unplugged"))
    parser.add_argument("--screen", choices=("on", "off"))
    parser.add_argument("--health", help="comma-separated health values to keep")
    parser.add_argument("--model", help="keep only this device model")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chargescope",
        description="Battery telemetry analytics over SOC-update sample logs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="label samples with charging events")
    _add_input_args(p)
    _add_filter_args(p)
    p.add_argument("--termination-c", type=float, default=TERMINATION_C_DEFAULT,
                   help="rate at or below which an event ends")
    p.add_argument("--per-event-mean", action="store_true",
                   help="one row per event carrying its mean charging rate")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", default="-", help="labeled-step CSV ('-' = stdout)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("profile", help="classify devices and export curves")
    _add_input_args(p)
    _add_filter_args(p)
    p.add_argument("--group", choices=(GROUP_DEVICE, GROUP_MODEL), default=GROUP_DEVICE)
    p.add_argument("--config", help="JSON file with classifier settings")
    p.add_argument("--termination-c", type=float, default=TERMINATION_C_DEFAULT)
    p.add_argument("--include-terminal", action="store_true",
                   help="keep event-closing steps in rate statistics")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True,
                   help="directory for profiles.jsonl, curves.csv, health.csv")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("behavior", help="detect inefficient charging behavior")
    _add_input_args(p)
    p.add_argument("--capacity-mah", type=float, default=None,
                   help="nominal battery capacity for wasted-energy estimates")
    p.add_argument("--pct-per-cycle", type=float,
                   default=behavior_mod.MAINTENANCE_PCT_PER_CYCLE_DEFAULT,
                   help="percent recharged per maintenance cycle")
    p.add_argument("--termination-c", type=float, default=TERMINATION_C_DEFAULT)
    p.add_argument("-o", "--output", default="-", help="behavior JSONL ('-' = stdout)")
    p.set_defaults(func=cmd_behavior)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--technique", choices=[t.value for t in Technique if t is not Technique.UNKNOWN],
                   default="cccv")
    p.add_argument("--fuel-gauge", choices=("coulomb_counter", "voltage_based", "coulomb", "voltage"),
                   default="coulomb_counter")
    p.add_argument("--variants", help="comma-separated: cv_first,cc_tail")
    p.add_argument("--loss", default="0", help="capacity loss percent, X or LO:HI")
    p.add_argument("--noise-mv", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.4)
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--fluctuation", metavar="LEVEL:REVERSALS")
    p.add_argument("--full-plugged-hours", type=float, default=None)
    p.add_argument("--manifest", help="JSON array of strata (overrides flags)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-", help="corpus JSONL ('-' = stdout)")
    p.add_argument("--truth", help="ground-truth sidecar path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="summarize profile/behavior artifacts")
    p.add_argument("--profiles", required=True, help="profiles.jsonl from 'profile'")
    p.add_argument("--behavior", help="behavior JSONL from 'behavior'")
    p.add_argument("--health", help="health.csv from 'profile'")
    p.add_argument("--loss-band", default="1:10", metavar="LO:HI")
    p.add_argument("--tail-quantile", type=float, default=0.98)
    p.add_argument("--format", choices=("json", "markdown"), default="json")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
