import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from collections import deque

from asyncba.crypto_sim import Registry
from asyncba.shared_coin import NodeContext


def make_contexts(params, seed=0):
    reg = Registry(params.n, seed)
    return reg, [NodeContext(p, params, reg.handle(p), reg.public) for p in range(params.n)]


def fifo_drive(machines, initial):
    """Deliver every send in FIFO order until quiet; returns ``(sends, deliveries)``.

    ``initial`` is a list of ``(sender, [Send])``.
    """
    n = len(machines)
    queue = deque()
    sent = []

    def post(sender, sends):
        for s in sends:
            sent.append((sender, s))
            for q in (range(n) if s.dests is None else s.dests):
                queue.append((q, s.message))

    for sender, sends in initial:
        post(sender, sends)
    deliveries = 0
    while queue:
        q, msg = queue.popleft()
        deliveries += 1
        post(q, machines[q].handle(msg))
    return sent, deliveries


CRITERIA: dict = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    """Remember one acceptance outcome for the end-of-run summary."""
    CRITERIA[criterion] = (ok, detail)
    print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(CRITERIA, key=lambda c: int(c[1:])):
        ok, detail = CRITERIA[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
