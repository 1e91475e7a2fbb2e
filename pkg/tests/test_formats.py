import json
from fractions import Fraction as F
from pathlib import Path

import pytest

from cdpta.concrete import Schedule
from cdpta.formats import (
    SWEEP_HEADER,
    SchemaError,
    SweepRow,
    export_explicit,
    format_rational,
    model_to_dict,
    parse_model,
    parse_rational,
    parse_schedule,
    parse_tra,
    serialize_model,
    serialize_schedule,
    write_sweep_csv,
)
from cdpta.generators import compile_2cm, gen_oneclock, gen_robot, parse_2cm
from cdpta.graph import build

GOLDEN = Path(__file__).parent / "golden"

TWO_COUNTER = "L1: INC C1 GOTO L2\nL2: JZ C1 L4 L3\nL3: DEC C1 GOTO L2\nL4: HALT\n"


def bundled():
    return {
        "oneclock": gen_oneclock(),
        "robot10": gen_robot(10),
        "2cm": compile_2cm(parse_2cm(TWO_COUNTER)),
    }


class TestRationals:
    @pytest.mark.parametrize("q,text", [(F(1, 2), "1/2"), (F(-3, 4), "-3/4"), (F(2), 2), (F(0), 0)])
    def test_format(self, q, text):
        assert format_rational(q) == text
        assert parse_rational(text) == q

    @pytest.mark.parametrize("bad", [True, 0.5, "0.5", "1/0", "a/b", None, [1]])
    def test_rejects(self, bad):
        with pytest.raises(SchemaError):
            parse_rational(bad)


class TestModelJson:
    @pytest.mark.parametrize("name", ["oneclock", "robot10", "2cm"])
    def test_round_trip(self, name):
        m = bundled()[name]
        text = serialize_model(m)
        back = parse_model(text)
        assert back == m
        assert serialize_model(back) == text

    def test_half_is_a_string(self):
        doc = model_to_dict(gen_oneclock())
        c_edge = next(e for e in doc["edges"] if e["source"] == "C")
        assert c_edge["outcomes"][0]["weights"][0]["pieces"][0]["d"] == "-1/2"
        assert "0.5" not in serialize_model(gen_oneclock())

    def test_canonical_key_order(self):
        text = serialize_model(gen_oneclock())
        assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"

    def test_unknown_key(self):
        doc = model_to_dict(gen_oneclock())
        doc["edges"][0]["guards"] = []
        with pytest.raises(SchemaError) as info:
            parse_model(json.dumps(doc))
        assert info.value.pointer.endswith("/guards")

    def test_negative_piece_bound(self):
        doc = model_to_dict(gen_oneclock())
        doc["edges"][2]["outcomes"][0]["weights"][0]["pieces"][0]["lo"] = -1
        with pytest.raises(SchemaError):
            parse_model(json.dumps(doc))

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("initial"),
        lambda d: d.update(initial="nowhere"),
        lambda d: d["locations"][0]["invariant"].append({"clock": "y", "op": "<", "bound": 1}),
        lambda d: d["locations"][0]["invariant"].append({"clock": "x", "op": "!=", "bound": 1}),
        lambda d: d.update(clocks="x"),
    ])
    def test_schema_violations(self, mutate):
        doc = model_to_dict(gen_oneclock())
        mutate(doc)
        with pytest.raises(SchemaError):
            parse_model(json.dumps(doc))

    def test_not_json(self):
        with pytest.raises(SchemaError):
            parse_model("{")


class TestSchedules:
    def test_round_trip(self):
        s = Schedule(F(2, 5), 2, {0: Schedule(F(0), 3, {0: Schedule(F(1, 3), 4)})})
        assert parse_schedule(serialize_schedule(s)) == s

    def test_empty(self):
        assert parse_schedule(serialize_schedule(None)) is None

    @pytest.mark.parametrize("text", [
        '{"delay": "-1/2", "edge": 0}',
        '{"delay": "1/2", "edge": "A"}',
        '{"delay": "1/2", "edge": 0, "children": {"x": {"delay": 0, "edge": 0}}}',
        '{"delay": "1/2", "edge": 0, "extra": 1}',
        "[1]",
    ])
    def test_rejects(self, text):
        with pytest.raises(SchemaError):
            parse_schedule(text)


class TestExport:
    def test_golden(self, tmp_path):
        m = gen_oneclock()
        paths = export_explicit(build(m, 1, [m.location_id("D")]), tmp_path, "oneclock_k1")
        assert [p.name for p in paths] == ["oneclock_k1.sta", "oneclock_k1.tra", "oneclock_k1.lab"]
        for p in paths:
            assert p.read_text() == (GOLDEN / p.name).read_text()
        assert paths[0].read_text().splitlines()[0] == "0 A k=1;h=x:0;classes=[{x}]"

    @pytest.mark.parametrize("name,k,target", [("oneclock", 4, "D"), ("robot10", 1, "OK"), ("2cm", 1, "L4")])
    def test_structure(self, tmp_path, name, k, target):
        m = bundled()[name]
        mdp = build(m, k, [m.location_id(target)])
        sta, tra, lab = export_explicit(mdp, tmp_path)
        for p in (sta, tra, lab):
            assert p.read_text().endswith("\n")
        labels = lab.read_text().splitlines()
        assert sum(line.split()[1] == "init" for line in labels) == 1
        rows = parse_tra(tra.read_text())
        assert all(sum(p for _, p in dist) == 1 for dist in rows.values())
        assert len(sta.read_text().splitlines()) == len(mdp.states)
        assert len(rows) == sum(len(mdp.actions(s)) for s in range(len(mdp.states)))


class TestSweepCsv:
    def test_header_only(self):
        assert write_sweep_csv([]) == ",".join(SWEEP_HEADER) + "\n"
        assert write_sweep_csv([]).startswith("model,k,objective,value,states,actions,build_ms,solve_ms")

    def test_one_row(self):
        text = write_sweep_csv([SweepRow("oneclock", 4, "max", 0.328125, 30, 60, 1.23, 0.5)])
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[1].split(",")[3] == "0.328125000"

    def test_value_must_be_probability(self):
        with pytest.raises(ValueError):
            SweepRow("m", 1, "max", 1.5, 1, 1, 0, 0)
