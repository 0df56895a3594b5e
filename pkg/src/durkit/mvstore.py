"""Per-partition multiversion key-value store.

A Store is owned by exactly one sequential executor. Version chains only
grow (no garbage collection), so any snapshot taken during a run stays
readable for its whole lifetime and replicas can be compared bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .core import Key, Value, Version


class KeyNotPopulated(LookupError):
    """Raised when a key was never populated nor written.

    Reads of such keys indicate a workload or partition-map bug, never a
    legal miss: population writes every key at version 0.
    """


@dataclass(slots=True)
class VersionChain:
    """Entries (value, version) in strictly ascending version order."""

    entries: list[tuple[Value, Version]] = field(default_factory=list)

    def append(self, value: Value, version: Version) -> None:
        if self.entries and version <= self.entries[-1][1]:
            raise ValueError(
                f"version {version} not above chain tail {self.entries[-1][1]}"
            )
        self.entries.append((value, version))

    def at(self, st: Version) -> tuple[Value, Version]:
        """Most recent entry with version <= st."""
        for value, version in reversed(self.entries):
            if version <= st:
                return value, version
        raise KeyNotPopulated("no version at or below requested snapshot")

    def latest_version(self) -> Version:
        return self.entries[-1][1]


class Store:
    """Multiversion store plus the partition's snapshot counter SC.

    SC advances only through `bump()`, called by the owning engine when a
    certification produces a local commit verdict; aborted certifications
    leave it untouched.
    """

    def __init__(self) -> None:
        self.chains: dict[Key, VersionChain] = {}
        self.sc: Version = 0

    def retrieve(self, key: Key, st: Version) -> tuple[Value, Version]:
        """Value of `key` visible at snapshot `st` plus its creation version."""
        chain = self.chains.get(key)
        if chain is None:
            raise KeyNotPopulated(f"key {key!r} never populated nor written")
        return chain.at(st)

    def latest_version(self, key: Key) -> Version:
        """Creation version of the newest entry for `key` (0 if populated only)."""
        chain = self.chains.get(key)
        if chain is None:
            raise KeyNotPopulated(f"key {key!r} never populated nor written")
        return chain.latest_version()

    def apply(self, ws: Iterable[tuple[Key, Value]], at: Version) -> None:
        """Append every write at version `at`; old entries are never mutated."""
        for key, value in ws:
            chain = self.chains.get(key)
            if chain is None:
                chain = self.chains[key] = VersionChain()
            chain.append(value, at)

    def populate(self, n: int, keygen: Callable[[int], tuple[Key, Value]]) -> None:
        """Load `n` generated entries at version 0 into an empty store."""
        if self.chains or self.sc != 0:
            raise ValueError("populate requires an empty store")
        for i in range(n):
            key, value = keygen(i)
            if key in self.chains:
                raise ValueError(f"duplicate populated key {key!r}")
            self.chains[key] = VersionChain([(value, 0)])

    def populate_items(self, items: Iterable[tuple[Key, Value]]) -> None:
        pairs = list(items)
        self.populate(len(pairs), lambda i: pairs[i])

    def snapshot_counter(self) -> Version:
        return self.sc

    def bump(self) -> Version:
        self.sc += 1
        return self.sc

    def dump(self) -> str:
        """One line per entry: key-hex<TAB>version<TAB>value-hex, sorted by (key, version)."""
        lines = []
        for key in sorted(self.chains):
            for value, version in self.chains[key].entries:
                lines.append(f"{key.hex()}\t{version}\t{value.hex()}")
        return "\n".join(lines) + ("\n" if lines else "")
