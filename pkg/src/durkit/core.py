"""Shared domain types: identifiers, the transaction tuple, partition maps.

Everything here is an immutable value object; instances are safe to copy
and hand between concurrent executors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

Key = bytes
Value = bytes
Version = int
PartitionId = int

COMMIT = "commit"
ABORT = "abort"


@dataclass(frozen=True, order=True, slots=True)
class TxnId:
    """Globally unique transaction identifier.

    Uniqueness comes from (client, per-client counter); the total order is
    lexicographic on that pair.
    """

    client: int
    seq: int

    def __str__(self) -> str:
        return f"{self.client}.{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "TxnId":
        client, _, seq = text.partition(".")
        return cls(int(client), int(seq))


@dataclass(frozen=True, slots=True)
class Transaction:
    """The transaction tuple flowing from execution to certification.

    `st` holds one optional snapshot version per partition (length 1 for the
    sequential engine); `rs` contains every key ever read, including reads
    satisfied from the transaction's own buffered writes; `ws` maps keys to
    the values written, stored as a key-sorted tuple so equal transactions
    serialize identically.
    """

    id: TxnId
    st: tuple[Optional[Version], ...]
    rs: frozenset[Key]
    ws: tuple[tuple[Key, Value], ...]

    @property
    def read_only(self) -> bool:
        return not self.ws

    def ws_keys(self) -> tuple[Key, ...]:
        return tuple(k for k, _ in self.ws)

    def ws_dict(self) -> dict[Key, Value]:
        return dict(self.ws)


def make_transaction(
    id: TxnId,
    st: Iterable[Optional[Version]],
    rs: Iterable[Key],
    ws: Mapping[Key, Value],
) -> Transaction:
    """Freeze mutable execution-phase state into a Transaction."""
    return Transaction(
        id=id,
        st=tuple(st),
        rs=frozenset(rs),
        ws=tuple(sorted(ws.items())),
    )


@dataclass(frozen=True, slots=True)
class Outcome:
    """Certification verdict for a terminated transaction."""

    verdict: str  # COMMIT or ABORT

    def __post_init__(self) -> None:
        if self.verdict not in (COMMIT, ABORT):
            raise ValueError(f"bad verdict {self.verdict!r}")


@dataclass(frozen=True, slots=True)
class PartitionMap:
    """Deterministic key-to-partition assignment, identical at clients and servers.

    Keys hash to a partition via blake2b mod P. When `prefix` is set, only
    the first `prefix` bytes participate in the hash, so keys sharing a
    prefix co-locate (the social benchmark keeps each user's records in one
    partition this way).
    """

    p: int
    prefix: Optional[int] = None

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("partition count must be >= 1")

    def partition_of(self, key: Key) -> PartitionId:
        if not key:
            raise ValueError("keys must be non-empty")
        if self.p == 1:
            return 0
        data = key if self.prefix is None else key[: self.prefix]
        digest = hashlib.blake2b(data, digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.p

    def partitions_of_keys(self, keys: Iterable[Key]) -> tuple[PartitionId, ...]:
        return tuple(sorted({self.partition_of(k) for k in keys}))


def partition_of(key: Key, pmap: PartitionMap) -> PartitionId:
    return pmap.partition_of(key)


def partitions_of(txn: Transaction, pmap: PartitionMap) -> tuple[PartitionId, ...]:
    """The sorted set of partitions holding keys read or written by `txn`."""
    return pmap.partitions_of_keys(set(txn.rs) | {k for k, _ in txn.ws})
