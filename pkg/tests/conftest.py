"""Shared test harness: a message-capturing runtime stub and builders."""

from __future__ import annotations

import pytest

from durkit.core import TxnId, make_transaction


class StubRt:
    """Runtime double that records sends instead of dispatching them."""

    def __init__(self):
        self.sent = []

    def send(self, src, dst, msg):
        self.sent.append((src, dst, msg))

    def now(self):
        return 0.0

    def of_type(self, cls):
        return [m for _, _, m in self.sent if isinstance(m, cls)]

    def to(self, dst):
        return [m for _, d, m in self.sent if d == dst]


@pytest.fixture
def stub_rt():
    return StubRt()


def mk_txn(client, seq, st, rs=(), ws=None):
    return make_transaction(TxnId(client, seq), st, set(rs), dict(ws or {}))


def finish(gen, value=None):
    """Advance a client generator expecting it to return; give back its value."""
    try:
        if value is None:
            next(gen)
        else:
            gen.send(value)
    except StopIteration as stop:
        return stop.value
    raise AssertionError("generator did not finish")


def step(gen, value=None):
    """Advance a client generator to its next Call."""
    return gen.send(value) if value is not None else next(gen)
