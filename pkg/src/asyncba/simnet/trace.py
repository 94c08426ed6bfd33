"""Line-delimited JSON traces and deterministic replay.

A trace starts with a header (protocol, parameters, adversary, seed,
inputs), then one record per send, delivery and corruption, and ends with
the report digest.  Replaying feeds the recorded deliver/corrupt actions
back into a fresh network; the run must reproduce the same digest.
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

from ..crypto_sim import Registry
from ..messages import InstanceId
from ..params import derive_params
from .adversaries import AdversaryError, AdversarySpec, Corrupt, Deliver, TimedAdversary, make_plan
from .network import clock_digest

TRACE_VERSION = 1


def _inst(inst) -> list | None:
    return None if inst is None else [inst.ba, inst.round, inst.stage]


class TraceWriter:
    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", encoding="utf-8")

    def _write(self, rec: dict) -> None:
        self._fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    def header(self, protocol, params, seed, adv, inputs, event_budget) -> None:
        self._write({
            "type": "header", "version": TRACE_VERSION, "protocol": protocol, "params": params.as_dict(),
            "seed": int(seed), "adversary": adv.plan.spec.as_dict(),
            "inputs": None if inputs is None else [int(v) for v in inputs],
            "event_budget": int(event_budget),
        })

    def send(self, event, meta, clock) -> None:
        self._write({"e": event, "a": "send", "id": meta.msg_id, "s": meta.sender, "r": meta.receiver,
                     "tag": meta.tag, "inst": _inst(meta.instance), "w": meta.word_cost,
                     "clock": clock_digest(clock)})

    def deliver(self, event, meta, clock) -> None:
        self._write({"e": event, "a": "deliver", "id": meta.msg_id, "s": meta.sender, "r": meta.receiver,
                     "tag": meta.tag, "w": meta.word_cost, "clock": clock_digest(clock)})

    def corrupt(self, event, pid, cause) -> None:
        self._write({"e": event, "a": "corrupt", "pid": pid, "cause": _inst(cause)})

    def end(self, events, digest) -> None:
        self._write({"type": "end", "events": events, "digest": digest})
        self._fh.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_trace(path) -> tuple[dict, list, dict | None]:
    """``(header, action records, end record)`` of a trace file."""
    header, actions, end = None, [], None
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("type") == "header":
                header = rec
            elif rec.get("type") == "end":
                end = rec
            elif rec["a"] in ("deliver", "corrupt"):
                actions.append(rec)
    if header is None:
        raise ValueError(f"{path}: no header record")
    return header, actions, end


class ReplayAdversary:
    """Re-issues the recorded actions; Byzantine behaviour comes from the
    recorded adversary so corrupted processes act as they did."""

    def __init__(self, plan, actions: list):
        self.plan = plan
        self._timed = TimedAdversary(plan)
        self._setup = [a for a in actions if a["e"] == 0]
        self._actions = deque(a for a in actions if a["e"] > 0)

    @staticmethod
    def _action(rec):
        if rec["a"] == "deliver":
            return Deliver(rec["id"])
        cause = rec["cause"]
        return Corrupt(rec["pid"], None if cause is None else InstanceId(*cause))

    def setup(self, view) -> list:
        return [self._action(r) for r in self._setup]

    def next_action(self, view):
        view.drain_new()
        view.take_last_delivered()
        if not self._actions:
            return None
        return self._action(self._actions.popleft())

    def behavior(self, pid, node, keys, cause):
        return self._timed.behavior(pid, node, keys, cause)


def replay(path):
    """Re-run a traced trial; returns ``(report, recorded digest)``."""
    from .trial import run_event

    header, actions, end = read_trace(path)
    p = header["params"]
    params = derive_params(p["n"], p["epsilon"], p["d"], p["full_participation"])
    if params.as_dict() != p:
        raise AdversaryError("trace parameters do not re-derive identically")
    spec = AdversarySpec(**header["adversary"])
    seed = header["seed"]
    adv = ReplayAdversary(make_plan(spec, params, seed), actions)
    report = run_event(header["protocol"], params, spec.name, seed, header["inputs"], Registry(params.n, seed),
                       adv, header["event_budget"])
    return report, None if end is None else end["digest"]
