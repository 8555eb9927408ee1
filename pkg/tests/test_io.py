import json

import numpy as np
import pytest

from superforms import sff
from superforms.calculus import FormField, Grid
from superforms.report import Check, Report, load
from superforms.sampling import make_rng, random_field


def sample_field():
    g = Grid((-1.0, 0.0), (1.0, 2.5), (8, 6), "periodic")
    return random_field(make_rng(0), g, 1, 2, center=(0.0, 1.0))


def test_sff_round_trip(tmp_path):
    F = sample_field()
    path = tmp_path / "f.sff"
    sff.write(path, F)
    G = sff.read(path)
    assert G.grid == F.grid and (G.p, G.q) == (F.p, F.q)
    assert np.array_equal(G.values, F.values)


def test_sff_layout():
    F = sample_field()
    data = sff.dumps(F)
    header, rest = data.split(b"\n", 1)
    assert header == b"SFF1 2 1 2 8 6 -1.0 1.0 0.0 2.5 periodic"
    key_line, rest = rest.split(b"\n", 1)
    I, J = (int(t) for t in key_line.split())
    assert (I, J) == min(F.keys)
    first = np.frombuffer(rest[:8 * 48], dtype="<f8").reshape(8, 6)
    assert np.array_equal(first, F.component((I, J)))


@pytest.mark.parametrize("mutate,match", [
    (lambda b: b"SFF2" + b[4:], "not an SFF1"),
    (lambda b: b[:-5], "truncated"),
    (lambda b: b + b"x", "trailing"),
    (lambda b: b.replace(b"SFF1 2 1 2", b"SFF1 2 1 x", 1), "malformed header"),
])
def test_sff_errors(mutate, match):
    with pytest.raises(sff.SFFError, match=match):
        sff.loads(mutate(sff.dumps(sample_field())))


def test_sff_rejects_unordered_keys():
    F = sample_field()
    data = sff.dumps(F)
    header, body = data.split(b"\n", 1)
    chunk = len(body) // len(F.keys)
    blocks = [body[i * chunk:(i + 1) * chunk] for i in range(len(F.keys))]
    with pytest.raises(sff.SFFError, match="ascending"):
        sff.loads(header + b"\n" + b"".join([blocks[1], blocks[0]] + blocks[2:]))


def test_check_helpers():
    assert Check.at_most("a", 1e-13, 1e-12).passed
    assert not Check.at_most("a", float("nan"), 1e-12).passed
    assert Check.skipped("b", "why").status == "skipped"


def test_report_schema_and_determinism(tmp_path):
    def build(wall):
        r = Report("demo", {"n": 2, "tol": 1e-10})
        r.add(Check.at_most("x", 1e-14, 1e-12), Check.skipped("y", "not applicable"),
              Check("z", float("inf"), None, None, "fail", data={"arr": np.arange(2)}))
        r.wall_time = wall
        return r
    a, b = build(0.1), build(5.0)
    assert a.body_lines() == b.body_lines()
    assert a.lines()[-1] != b.lines()[-1]
    assert not a.passed and a.counts == {"pass": 1, "fail": 1, "skipped": 1}
    path = tmp_path / "r.jsonl"
    a.write(path)
    recs = load(path)
    assert [r["record"] for r in recs] == ["header", "check", "check", "check", "summary", "stamp"]
    assert recs[0]["schema"] == 1
    assert recs[3]["measured"] == "inf" and recs[3]["data"]["arr"] == [0, 1]
    assert recs[4]["pass"] is False
    for line in path.read_text().splitlines():
        json.loads(line)


def test_report_passes_with_only_skips():
    r = Report("demo", {})
    r.add(Check.skipped("y", "n/a"))
    assert r.passed
