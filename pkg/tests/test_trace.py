import json

import pytest

from asyncba.params import derive_params
from asyncba.simnet import run_trial
from asyncba.simnet.adversaries import ADVERSARIES
from asyncba.simnet.trace import TRACE_VERSION, TraceWriter, read_trace, replay


def traced(tmp_path, protocol, params, adversary, seed, inputs=None, name="t.jsonl"):
    path = tmp_path / name
    rep = run_trial(protocol, params, adversary, seed, inputs, engine="event", trace=TraceWriter(path))
    return path, rep


def test_trace_records_have_required_fields(tmp_path):
    p = derive_params(8, 0.2, full_participation=True)
    path, rep = traced(tmp_path, "shared_coin", p, "uniform_random", 5)
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    header, end = lines[0], lines[-1]
    assert header["type"] == "header" and header["version"] == TRACE_VERSION
    assert header["params"] == p.as_dict() and header["seed"] == 5
    assert end == {"type": "end", "events": end["events"], "digest": rep.digest}
    sends = [r for r in lines[1:-1] if r["a"] == "send"]
    delivers = [r for r in lines[1:-1] if r["a"] == "deliver"]
    assert len(sends) == len(delivers) == rep.messages
    assert {"e", "id", "s", "r", "tag", "w", "clock"} <= set(delivers[0])
    assert [r["e"] for r in delivers] == sorted(r["e"] for r in delivers)


def test_trace_is_bit_exact_across_runs(tmp_path):
    p = derive_params(8, 0.2, full_participation=True)
    a, _ = traced(tmp_path, "agreement", p, "uniform_random", 2, [0, 1] * 4, "a.jsonl")
    b, _ = traced(tmp_path, "agreement", p, "uniform_random", 2, [0, 1] * 4, "b.jsonl")
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("adversary", ADVERSARIES)
def test_replay_reproduces_digest(tmp_path, adversary):
    p = derive_params(100, 0.2, 0.05)
    path, rep = traced(tmp_path, "approver", p, adversary, 7, [1 if i % 3 else 2 for i in range(100)])
    replayed, recorded = replay(path)
    assert recorded == rep.digest == replayed.digest


def test_replay_agreement_with_corruptions(tmp_path):
    p = derive_params(10, 0.0, full_participation=True)
    path, rep = traced(tmp_path, "agreement", p, "min_value_suppressor", 1, [i % 2 for i in range(10)])
    header, actions, end = read_trace(path)
    assert header["adversary"]["name"] == "min_value_suppressor"
    replayed, recorded = replay(path)
    assert replayed.digest == recorded


def test_truncated_trace_has_no_end(tmp_path):
    p = derive_params(8, 0.2, full_participation=True)
    path, _ = traced(tmp_path, "shared_coin", p, "fifo", 0)
    lines = path.read_text().splitlines()
    (tmp_path / "cut.jsonl").write_text("\n".join(lines[:-1]) + "\n")
    report, recorded = replay(tmp_path / "cut.jsonl")
    assert recorded is None and report.digest == json.loads(lines[-1])["digest"]
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(ValueError, match="no header"):
        read_trace(tmp_path / "empty.jsonl")
