"""End-to-end command-line pipeline tests."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from chargescope.cli import main
from chargescope.ingestion import sample_to_json_line
from chargescope.synthgen import TraceSpec, generate_trace
from chargescope.domain import Technique


def write_trace(path: Path, spec: TraceSpec) -> None:
    samples, _ = generate_trace(spec)
    path.write_text(
        "".join(sample_to_json_line(s) + "\n" for s in samples), encoding="utf-8"
    )


def read_csv(path: Path):
    with open(path, newline="") as stream:
        return list(csv.reader(stream))


class TestSegmentCommand:
    def test_happy_path_writes_labeled_steps(self, tmp_path):
        src = tmp_path / "in.jsonl"
        out = tmp_path / "steps.csv"
        write_trace(src, TraceSpec())
        assert main(["segment", str(src), "-o", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == [
            "user", "event_id", "t1", "t2", "soc1", "soc2", "delta_t", "c_rate",
        ]
        assert len(rows) == 100  # header + 99 steps
        assert (tmp_path / "steps.csv.meta.json").exists()

    def test_lower_termination_rate_makes_more_events(self, tmp_path):
        src = tmp_path / "in.jsonl"
        # A 0.05C stretch mid-charge splits events at 0.07C but not at 0.03C.
        from conftest import make_sample

        samples = []
        t = 0.0
        for soc in range(1, 101):
            t += 720.0 if 51 <= soc <= 55 else 72.0
            samples.append(make_sample(timestamp=t, soc=soc))
        src.write_text(
            "".join(sample_to_json_line(s) + "\n" for s in samples), encoding="utf-8"
        )

        def event_count(termination):
            out = tmp_path / f"steps-{termination}.csv"
            assert main([
                "segment", str(src), "-o", str(out), "--termination-c", str(termination),
            ]) == 0
            rows = read_csv(out)[1:]
            return len({row[1] for row in rows})

        assert event_count(0.03) == 1
        assert event_count(0.07) == 6

    def test_per_event_mean_rows(self, tmp_path):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec(sessions=((1, 100), (10, 90))))
        out = tmp_path / "events.csv"
        assert main(["segment", str(src), "--per-event-mean", "-o", str(out)]) == 0
        rows = read_csv(out)[1:]
        assert len(rows) == 2  # one row per event
        assert {row[1] for row in rows} == {"1", "2"}
        assert all(float(row[7]) > 0.03 for row in rows)

    def test_missing_file_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.jsonl"
        code = main(["segment", str(missing), "-o", "-"])
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_unfiltered_empty_input_exits_1(self, tmp_path):
        src = tmp_path / "empty.jsonl"
        src.write_text("", encoding="utf-8")
        assert main(["segment", str(src), "-o", str(tmp_path / "out.csv")]) == 1

    def test_empty_after_filtering_still_exits_0(self, tmp_path, capsys):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec())  # all samples are AC
        out = tmp_path / "steps.csv"
        code = main(["segment", str(src), "--charger", "usb", "-o", str(out)])
        assert code == 0
        assert "removed by filters" in capsys.readouterr().err

    def test_csv_input_format(self, tmp_path):
        from chargescope.ingestion import FIELDS, sample_to_csv_row

        samples, _ = generate_trace(TraceSpec())
        src = tmp_path / "in.csv"
        lines = [",".join(FIELDS)]
        lines += [",".join(sample_to_csv_row(s)) for s in samples]
        src.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "steps.csv"
        assert main(["segment", str(src), "-f", "csv", "-o", str(out)]) == 0
        assert len(read_csv(out)) == 100

    def test_millisecond_inputs_rescaled(self, tmp_path):
        import json as json_mod

        samples, _ = generate_trace(TraceSpec())
        src = tmp_path / "in.jsonl"
        lines = []
        for s in samples:
            record = json_mod.loads(sample_to_json_line(s))
            record["time"] = record["time"] * 1000.0
            lines.append(json_mod.dumps(record))
        src.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "steps.csv"
        assert main(["segment", str(src), "--time-unit", "ms", "-o", str(out)]) == 0
        rows = read_csv(out)[1:]
        # Rates come out in seconds again: the CC phase runs at 0.5C.
        assert float(rows[0][7]) == pytest.approx(0.5)


class TestProfileCommand:
    def test_dlc_corpus_profiles_all_dlc(self, tmp_path):
        src = tmp_path / "in.jsonl"
        lines = []
        for i in range(5):
            samples, _ = generate_trace(
                TraceSpec(technique=Technique.DLC, user_id=f"u{i:03d}")
            )
            lines.extend(sample_to_json_line(s) for s in samples)
        src.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out_dir = tmp_path / "out"
        assert main(["profile", str(src), "--out-dir", str(out_dir)]) == 0
        records = [
            json.loads(line)
            for line in (out_dir / "profiles.jsonl").read_text().splitlines()
        ]
        assert len(records) == 5
        assert all(r["technique"] == "dlc" for r in records)
        assert all(r["config"]["qualify_min_soc"] == 95 for r in records)
        health_rows = read_csv(out_dir / "health.csv")
        assert health_rows[0][0] == "health"
        assert health_rows[1][0] == "good"
        curves = read_csv(out_dir / "curves.csv")
        assert curves[0] == ["group", "kind", "soc", "value", "count", "low_confidence"]

    def test_group_by_model_pools_devices(self, tmp_path):
        src = tmp_path / "in.jsonl"
        lines = []
        for i in range(4):
            samples, _ = generate_trace(TraceSpec(user_id=f"u{i:03d}"))
            lines.extend(sample_to_json_line(s) for s in samples)
        src.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out_dir = tmp_path / "out"
        assert main(
            ["profile", str(src), "--group", "model", "--out-dir", str(out_dir)]
        ) == 0
        records = [
            json.loads(line)
            for line in (out_dir / "profiles.jsonl").read_text().splitlines()
        ]
        assert len(records) == 1
        assert records[0]["user"] == "synth-cccv"
        assert records[0]["event_count"] == 4

    def test_no_full_charge_leaves_loss_absent_with_reason(self, tmp_path):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec(sessions=((1, 97),)))
        out_dir = tmp_path / "out"
        assert main(["profile", str(src), "--out-dir", str(out_dir)]) == 0
        record = json.loads((out_dir / "profiles.jsonl").read_text().splitlines()[0])
        assert record["capacity_loss_pct"] is None
        assert any("soc 100" in note for note in record["notes"])

    def test_config_file_overridden_by_flags(self, tmp_path):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec())
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"qualify_min_soc": 90}), encoding="utf-8")
        out_dir = tmp_path / "out"
        assert main(
            ["profile", str(src), "--config", str(cfg), "--out-dir", str(out_dir)]
        ) == 0
        record = json.loads((out_dir / "profiles.jsonl").read_text().splitlines()[0])
        assert record["config"]["qualify_min_soc"] == 90

    def test_unknown_config_key_is_fatal(self, tmp_path):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec())
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"no_such_key": 1}), encoding="utf-8")
        assert main(
            ["profile", str(src), "--config", str(cfg), "--out-dir", str(tmp_path / "o")]
        ) == 2


class TestBehaviorCommand:
    def test_embedded_fluctuation_reported(self, tmp_path):
        src = tmp_path / "in.jsonl"
        from chargescope.synthgen import FluctuationPattern

        write_trace(src, TraceSpec(fluctuation=FluctuationPattern(level=5, reversals=4)))
        out = tmp_path / "behavior.jsonl"
        assert main(["behavior", str(src), "-o", str(out)]) == 0
        record = json.loads(out.read_text().splitlines()[0])
        assert len(record["fluctuation_episodes"]) == 1
        episode = record["fluctuation_episodes"][0]
        assert episode["repetitions"] == 4
        assert episode["active_use"] is True

    def test_ten_hour_full_plugged_energy_envelope(self, tmp_path):
        src = tmp_path / "in.jsonl"
        from chargescope.synthgen import FullPluggedPattern

        write_trace(src, TraceSpec(full_plugged=FullPluggedPattern(hours=10.0)))
        out = tmp_path / "behavior.jsonl"
        assert main(
            ["behavior", str(src), "--capacity-mah", "1810", "-o", str(out)]
        ) == 0
        record = json.loads(out.read_text().splitlines()[0])
        # One-to-two-percent top-ups over ten hours bracket a full 1810 mAh charge.
        assert 1357.0 <= record["wasted_energy_mah"] <= 2172.0

    def test_clean_trace_reports_nothing(self, tmp_path):
        src = tmp_path / "in.jsonl"
        write_trace(src, TraceSpec())
        out = tmp_path / "behavior.jsonl"
        assert main(["behavior", str(src), "-o", str(out)]) == 0
        record = json.loads(out.read_text().splitlines()[0])
        assert record["fluctuation_episodes"] == []
        assert record["full_plugged_episodes"] == []


class TestSynthCommand:
    def test_corpus_and_truth_sidecar(self, tmp_path):
        out = tmp_path / "corpus.jsonl"
        assert main(
            ["synth", "--count", "10", "--technique", "dlc", "-o", str(out)]
        ) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1000
        truth = json.loads((tmp_path / "corpus.jsonl.truth.json").read_text())
        assert len(truth) == 10
        assert all(t["technique"] == "dlc" for t in truth.values())

    def test_same_seed_is_byte_identical(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        args = ["synth", "--count", "5", "--noise-mv", "8", "--seed", "11"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_manifest_counts_are_exact(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                [
                    {"technique": "cccv", "count": 3},
                    {"technique": "quick", "count": 2},
                ]
            ),
            encoding="utf-8",
        )
        out = tmp_path / "corpus.jsonl"
        assert main(["synth", "--manifest", str(manifest), "-o", str(out)]) == 0
        truth = json.loads((tmp_path / "corpus.jsonl.truth.json").read_text())
        techniques = [t["technique"] for t in truth.values()]
        assert techniques.count("cccv") == 3
        assert techniques.count("quick") == 2

    def test_contradictory_spec_is_fatal(self, tmp_path):
        out = tmp_path / "corpus.jsonl"
        code = main(
            [
                "synth", "--technique", "quick", "--variants", "cv_first",
                "-o", str(out),
            ]
        )
        assert code == 2


class TestReportCommand:
    def test_report_over_synthetic_corpus(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        assert main(["synth", "--count", "4", "--technique", "dlc", "-o", str(corpus)]) == 0
        out_dir = tmp_path / "out"
        assert main(["profile", str(corpus), "--out-dir", str(out_dir)]) == 0
        report_path = tmp_path / "report.json"
        assert main(
            [
                "report", "--profiles", str(out_dir / "profiles.jsonl"),
                "--health", str(out_dir / "health.csv"),
                "-o", str(report_path),
            ]
        ) == 0
        report = json.loads(report_path.read_text())
        assert report["profiles"]["technique_counts"]["dlc"] == 4
        assert report["health"][0]["health"] == "good"

    def test_markdown_format(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        assert main(["synth", "--count", "2", "-o", str(corpus)]) == 0
        out_dir = tmp_path / "out"
        assert main(["profile", str(corpus), "--out-dir", str(out_dir)]) == 0
        assert main(
            [
                "report", "--profiles", str(out_dir / "profiles.jsonl"),
                "--format", "markdown", "-o", "-",
            ]
        ) == 0
        assert "# Battery corpus report" in capsys.readouterr().out


class TestJobsEquivalence:
    def test_model_grouping_identical_across_jobs(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                [
                    {"technique": "cccv", "count": 6},
                    {"technique": "dlc", "count": 6},
                ]
            ),
            encoding="utf-8",
        )
        assert main(["synth", "--manifest", str(manifest), "-o", str(corpus)]) == 0
        outputs = {}
        for jobs in (1, 3):
            out_dir = tmp_path / f"model-{jobs}"
            assert main(
                ["profile", str(corpus), "--group", "model", "--jobs", str(jobs),
                 "--out-dir", str(out_dir)]
            ) == 0
            outputs[jobs] = (out_dir / "profiles.jsonl").read_bytes()
        assert outputs[1] == outputs[3]
        records = [json.loads(l) for l in outputs[1].decode().splitlines()]
        assert sorted(r["user"] for r in records) == ["synth-cccv", "synth-dlc"]

    def test_segment_and_profile_identical_across_jobs(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        assert main(
            ["synth", "--count", "12", "--technique", "dlc", "--noise-mv", "5",
             "--seed", "3", "-o", str(corpus)]
        ) == 0

        outputs = {}
        for jobs in (1, 4):
            steps = tmp_path / f"steps-{jobs}.csv"
            out_dir = tmp_path / f"out-{jobs}"
            assert main(
                ["segment", str(corpus), "--jobs", str(jobs), "-o", str(steps)]
            ) == 0
            assert main(
                ["profile", str(corpus), "--jobs", str(jobs), "--out-dir", str(out_dir)]
            ) == 0
            outputs[jobs] = (
                steps.read_bytes(),
                (out_dir / "profiles.jsonl").read_bytes(),
                (out_dir / "curves.csv").read_bytes(),
                (out_dir / "health.csv").read_bytes(),
            )
        assert outputs[1] == outputs[4]
