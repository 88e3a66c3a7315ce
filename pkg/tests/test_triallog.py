import json
import math

import pytest

from wrsopt.triallog import (
    SCHEMA_VERSION,
    LogError,
    RunHeader,
    TrialRecord,
    read_log,
    record_fingerprint,
    write_log,
)


def make_header(budget=3, strategy="rs", **kw):
    return RunHeader(
        strategy=strategy,
        budget=budget,
        init=0,
        seed=42,
        objective="builtin:sphere",
        space={"dimensions": [{"name": "x", "kind": "real", "low": 0.0, "high": 1.0}]},
        space_digest="0" * 64,
        **kw,
    )


def make_records(n):
    return [
        TrialRecord(iteration=i, values=(0.25 * i,), score=float(i), phase="rs", status="evaluated", wall_time=0.001 * i)
        for i in range(1, n + 1)
    ]


class TestRoundTrip:
    def test_write_then_read(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        header = make_header()
        records = make_records(3)
        write_log(path, header, records)
        got_header, got_records = read_log(path)
        assert got_header == header
        assert got_records == records

    def test_header_is_first_line_with_schema(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        write_log(path, make_header(), make_records(3))
        first = json.loads(open(path).readline())
        assert first["kind"] == "header"
        assert first["schema"] == SCHEMA_VERSION

    def test_failed_trial_score_serializes_as_minus_infinity(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        rec = TrialRecord(iteration=1, values=(0.5,), score=float("-inf"), phase="rs", status="failed", wall_time=0.0, error="exit 3")
        write_log(path, make_header(budget=1), [rec])
        raw = open(path).read().splitlines()[1]
        assert "-Infinity" in raw
        _, records = read_log(path)
        assert records[0].score == float("-inf")
        assert records[0].error == "exit 3"

    def test_error_field_absent_unless_set(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        write_log(path, make_header(budget=1), make_records(1))
        raw = open(path).read().splitlines()[1]
        assert "error" not in json.loads(raw)

    def test_profile_round_trips(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        profile = {"weights": [40.0, 10.0], "probs": [1.0, 0.25], "k_mins": [5, 5]}
        write_log(path, make_header(strategy="wrs", profile=profile), make_records(3))
        header, _ = read_log(path)
        assert header.profile == profile

    def test_atomic_replace_leaves_no_tmp(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        write_log(path, make_header(), make_records(3))
        assert not (tmp_path / "run.jsonl.tmp").exists()


class TestValidation:
    def test_missing_file(self, tmp_path):
        with pytest.raises(LogError, match="cannot read"):
            read_log(str(tmp_path / "nope.jsonl"))

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("")
        with pytest.raises(LogError, match="empty"):
            read_log(str(p))

    def test_invalid_json_line(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"kind": "header"\n')
        with pytest.raises(LogError, match="invalid JSON"):
            read_log(str(p))

    def test_first_line_must_be_header(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"iteration": 1}\n')
        with pytest.raises(LogError, match="not a header"):
            read_log(str(p))

    def test_unsupported_schema(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        d = make_header(budget=0).to_dict()
        d["schema"] = 99
        p.write_text(json.dumps(d) + "\n")
        with pytest.raises(LogError, match="schema"):
            read_log(str(p))

    def test_unknown_status_rejected(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        write_log(path, make_header(budget=1), make_records(1))
        lines = open(path).read().splitlines()
        rec = json.loads(lines[1])
        rec["status"] = "maybe"
        open(path, "w").write(lines[0] + "\n" + json.dumps(rec) + "\n")
        with pytest.raises(LogError, match="unknown status"):
            read_log(path)

    def test_gap_in_iterations_rejected(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        records = make_records(3)
        records[2].iteration = 5
        write_log(path, make_header(), records)
        with pytest.raises(LogError, match="consecutive"):
            read_log(path)

    def test_count_must_match_declared_budget(self, tmp_path):
        path = str(tmp_path / "run.jsonl")
        write_log(path, make_header(budget=5), make_records(3))
        with pytest.raises(LogError, match="budget"):
            read_log(path)


class TestFingerprint:
    def test_wall_time_excluded(self):
        a = TrialRecord(iteration=1, values=(1,), score=2.0, phase="rs", status="evaluated", wall_time=0.123)
        b = TrialRecord(iteration=1, values=(1,), score=2.0, phase="rs", status="evaluated", wall_time=9.876)
        assert record_fingerprint(a) == record_fingerprint(b)

    def test_phase_optionally_excluded(self):
        a = TrialRecord(iteration=1, values=(1,), score=2.0, phase="rs", status="evaluated", wall_time=0.0)
        b = TrialRecord(iteration=1, values=(1,), score=2.0, phase="wrs", status="evaluated", wall_time=0.0)
        assert record_fingerprint(a) != record_fingerprint(b)
        assert record_fingerprint(a, with_phase=False) == record_fingerprint(b, with_phase=False)

    def test_score_and_values_still_matter(self):
        a = TrialRecord(iteration=1, values=(1,), score=2.0, phase="rs", status="evaluated", wall_time=0.0)
        b = TrialRecord(iteration=1, values=(2,), score=2.0, phase="rs", status="evaluated", wall_time=0.0)
        assert record_fingerprint(a) != record_fingerprint(b)


def test_float_values_round_trip_exactly(tmp_path):
    path = str(tmp_path / "run.jsonl")
    tricky = 0.1 + 0.2
    rec = TrialRecord(iteration=1, values=(tricky,), score=math.pi, phase="rs", status="evaluated", wall_time=0.0)
    write_log(path, make_header(budget=1), [rec])
    _, records = read_log(path)
    assert records[0].values[0] == tricky
    assert records[0].score == math.pi
