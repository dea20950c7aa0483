"""Instrumented multiply-accumulate counter.

Forward kernels report their MAC cost here when a counter is active;
backward passes never report. Softmax, normalization, activations, plain
adds and constant scalings are excluded from MACs and tallied separately
by category (element counts). Scopes give per-layer attribution, e.g.
"dat0/eda/proj".
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

_state = threading.local()


class MacCounter:
    def __init__(self):
        self.macs: dict[str, int] = {}
        self.non_mac: dict[str, int] = {}
        self._scopes: list[str] = []

    @property
    def path(self) -> str:
        return "/".join(self._scopes)

    def total_macs(self) -> int:
        return sum(self.macs.values())

    def under(self, prefix: str) -> int:
        """Sum of MACs for the given path and everything below it."""
        return sum(v for k, v in self.macs.items()
                   if k == prefix or k.startswith(prefix + "/"))


def active() -> MacCounter | None:
    return getattr(_state, "counter", None)


@contextmanager
def count():
    prev = getattr(_state, "counter", None)
    counter = MacCounter()
    _state.counter = counter
    try:
        yield counter
    finally:
        _state.counter = prev


@contextmanager
def scope(name: str):
    counter = active()
    if counter is None:
        yield
        return
    counter._scopes.append(name)
    try:
        yield
    finally:
        counter._scopes.pop()


def add(macs: int) -> None:
    counter = active()
    if counter is not None:
        path = counter.path
        counter.macs[path] = counter.macs.get(path, 0) + int(macs)


def add_non_mac(category: str, n: int) -> None:
    counter = active()
    if counter is not None:
        counter.non_mac[category] = counter.non_mac.get(category, 0) + int(n)
