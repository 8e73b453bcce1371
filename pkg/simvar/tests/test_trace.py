"""Trace model, text codec and cross-run alignment."""
import math

import pytest

from simvar.app.errors import AlignmentError, TraceFormatError
from simvar.app.trace.align import align
from simvar.app.trace.codec import fingerprint, parse_trace, read_trace_file, write_trace, write_trace_file
from simvar.app.trace.model import Event, RunSet
from simvar.tests.factories import make_run_set, make_trace

HEAD = "#simvar-trace v1\n#meta run_id=r0;scenario_id=s;seed=0;dt_physics=0.1;log_interval=0.1\n"


class TestCodec:
    def test_single_sample_layout(self):
        data = write_trace(make_trace("r0", [(0.1, "v1", 0.0, 0.0)]))
        lines = data.decode("utf-8").split("\n")
        assert lines[0] == "#simvar-trace v1"
        assert lines[1] == "#meta run_id=r0;scenario_id=synthetic;seed=0;dt_physics=0.1;log_interval=0.1"
        assert lines[2] == "0.1,v1,0,0,0,none"
        assert data.endswith(b"\n") and b"\r" not in data

    def test_empty_trace_is_header_only(self):
        data = write_trace(make_trace("r0", []))
        assert data.count(b"\n") == 2
        assert parse_trace(data).samples == ()

    def test_shortest_round_trip_floats(self):
        x = 0.1 + 0.2
        data = write_trace(make_trace("r0", [(0.1, "v1", x, -0.0)]))
        assert b"0.30000000000000004,-0,0" in data
        parsed = parse_trace(data).samples[0].position
        assert parsed.x == x
        assert math.copysign(1.0, parsed.y) == -1.0

    def test_metadata_and_events_survive(self):
        trace = make_trace(
            "r0",
            [(0.0, "ped", 1.0, 2.0, Event.destroyed()), (0.0, "v1", 3.0, 4.0, "ped")],
            metadata={"util_target": "75", "note": "a;b=c%d"},
        )
        data = write_trace(trace)
        assert b"note=a%3Bb%3Dc%25d;util_target=75" in data
        assert parse_trace(data) == trace

    def test_non_monotone_time_reports_row(self):
        text = HEAD + "0.2,a,0,0,0,none\n0.1,a,0,0,0,none\n"
        with pytest.raises(TraceFormatError, match="non-monotone time at row 4") as info:
            parse_trace(text)
        assert info.value.row == 4

    def test_duplicate_sample(self):
        text = HEAD + "0.1,a,0,0,0,none\n0.1,a,1,0,0,none\n"
        with pytest.raises(TraceFormatError, match=r"duplicate sample \(0.1, a\) at row 4"):
            parse_trace(text)

    def test_actor_order_within_time(self):
        text = HEAD + "0.1,b,0,0,0,none\n0.1,a,0,0,0,none\n"
        with pytest.raises(TraceFormatError, match="actor_id out of order at row 4"):
            parse_trace(text)

    @pytest.mark.parametrize(
        "row, message",
        [
            ("0.1,a,0,0,none", "expected 6 fields, found 5 at row 3"),
            ("0.1,a,0,zero,0,none", "malformed y 'zero' at row 3"),
            ("0.1,a,0,0,0,exploded", "unknown event 'exploded' at row 3"),
            ("0.1,,0,0,0,none", "empty actor_id at row 3"),
        ],
    )
    def test_malformed_rows(self, row, message):
        with pytest.raises(TraceFormatError, match=message):
            parse_trace(HEAD + row + "\n")

    def test_missing_header(self):
        with pytest.raises(TraceFormatError, match="header at row 1"):
            parse_trace("t,actor_id,x,y,z,event\n")

    def test_missing_reserved_meta_key(self):
        with pytest.raises(TraceFormatError, match="missing meta key seed at row 2"):
            parse_trace("#simvar-trace v1\n#meta run_id=r0;scenario_id=s;dt_physics=0.1;log_interval=0.1\n")

    def test_file_errors_name_the_file(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text(HEAD + "0.2,a,0,0,0,none\n0.1,a,0,0,0,none\n", encoding="utf-8")
        with pytest.raises(TraceFormatError, match="bad.trace: non-monotone time at row 4"):
            read_trace_file(path)

    def test_file_round_trip(self, tmp_path):
        trace = make_trace("r0", [(0.0, "a", 1.5, 2.5), (0.1, "a", 1.75, 2.5)])
        path = write_trace_file(trace, tmp_path / "runs" / "0.trace")
        assert read_trace_file(path) == trace


class TestValidation:
    def test_sample_after_destruction(self):
        trace = make_trace("r0", [(0.0, "ped", 0, 0, Event.destroyed()), (0.1, "ped", 0, 0)])
        with pytest.raises(TraceFormatError, match="after its destruction"):
            trace.validate()

    def test_gap_in_actor_samples(self):
        trace = make_trace("r0", [(0.0, "a", 0, 0), (0.2, "a", 0, 0)])
        with pytest.raises(TraceFormatError, match="gap in samples of a"):
            trace.validate()

    def test_time_off_logging_grid(self):
        with pytest.raises(TraceFormatError, match="not a multiple of log_interval"):
            make_trace("r0", [(0.15, "a", 0, 0)]).validate()

    def test_reserved_metadata_key(self):
        with pytest.raises(TraceFormatError, match="reserved"):
            make_trace("r0", [], metadata={"seed": "1"}).validate()

    def test_invalid_ids(self):
        with pytest.raises(TraceFormatError, match="invalid actor_id"):
            make_trace("r0", [(0.0, "a b", 0, 0)]).validate()

    def test_collision_partner_required(self):
        with pytest.raises(TraceFormatError, match="collision partner"):
            Event.collision("")


class TestFingerprint:
    def test_ignores_metadata(self):
        rows = [(0.0, "a", 1.0, 2.0)]
        a = make_trace("r0", rows, metadata={"started_at": "2024-01-01"})
        b = make_trace("r1", rows, metadata={"started_at": "2025-06-30"})
        assert fingerprint(a) == fingerprint(b)

    def test_one_ulp_changes_fingerprint(self):
        a = make_trace("r0", [(0.0, "a", 1.0, 2.0)])
        b = make_trace("r0", [(0.0, "a", math.nextafter(1.0, 2.0), 2.0)])
        assert fingerprint(a) != fingerprint(b)


class TestAlign:
    def test_full_presence(self):
        rows = [(0.0, "a", 0, 0), (0.1, "a", 1, 0), (0.2, "a", 2, 0)]
        aligned = align(make_run_set(rows, rows, rows), "a")
        assert aligned.times == (0.0, 0.1, 0.2)
        assert aligned.presence_count == (3, 3, 3)
        assert not aligned.partial

    def test_destroyed_actor_stops_contributing(self):
        full = [(0.0, "p", 0, 0), (0.1, "p", 1, 0), (0.2, "p", 2, 0)]
        cut = [(0.0, "p", 0, 0), (0.1, "p", 1, 0, Event.destroyed())]
        aligned = align(make_run_set(full, cut, full), "p")
        assert aligned.presence_count == (3, 3, 2)
        assert aligned.partial
        assert sum(aligned.presence_count) == 3 + 2 + 3

    def test_actor_in_one_run_has_no_usable_time(self):
        rs = make_run_set([(0.0, "a", 0, 0), (0.0, "b", 0, 0)], [(0.0, "a", 0, 0)])
        aligned = align(rs, "b")
        assert aligned.presence_count == (1,)
        assert aligned.usable_times == []

    def test_absent_actor(self):
        rows = [(0.0, "a", 0, 0)]
        with pytest.raises(AlignmentError, match="absent"):
            align(make_run_set(rows, rows), "ghost")

    def test_needs_two_runs(self):
        with pytest.raises(AlignmentError, match="at least 2 runs"):
            align(make_run_set([(0.0, "a", 0, 0)]), "a")

    def test_run_set_rejects_mixed_scenarios(self):
        a = make_trace("r0", [(0.0, "a", 0, 0)], scenario_id="s1")
        b = make_trace("r1", [(0.0, "a", 0, 0)], scenario_id="s2")
        with pytest.raises(AlignmentError, match="belongs to s2"):
            RunSet.from_traces([a, b])

    def test_run_set_rejects_mixed_timing(self):
        a = make_trace("r0", [(0.0, "a", 0, 0)])
        b = make_trace("r1", [(0.0, "a", 0, 0)], log_interval=0.2)
        with pytest.raises(AlignmentError, match="different timing"):
            RunSet.from_traces([a, b])
