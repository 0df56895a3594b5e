"""Wire messages exchanged between clients, partition processes, and sequencers.

Each message is a frozen value; the runtime never inspects payloads, it only
moves them between named actors over reliable FIFO links.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .core import Key, PartitionId, Transaction, Value, Version


@dataclass(frozen=True, slots=True)
class Start:
    """Boot event that kicks a client driver into its first transaction."""


@dataclass(frozen=True, slots=True)
class ReadReq:
    client: str
    txn_seq: int
    key: Key
    st: Optional[Version]  # None until the client's first read in the key's partition


@dataclass(frozen=True, slots=True)
class ReadReply:
    txn_seq: int
    key: Key
    value: Value
    version: Version        # creation version of the entry read
    snap: Version           # snapshot the read was served at
    partition: PartitionId


@dataclass(frozen=True, slots=True)
class FwdReq:
    """Read relayed by a client's home process to the key's owner (same server)."""

    client: str
    txn_seq: int
    key: Key
    st: Optional[Version]
    home: str  # process to route the reply through


@dataclass(frozen=True, slots=True)
class FwdReply:
    client: str
    txn_seq: int
    key: Key
    value: Value
    version: Version
    snap: Version
    partition: PartitionId


@dataclass(frozen=True, slots=True)
class Submit:
    """Commit request handed to a sequencer for ordering."""

    client: str
    txn: Transaction
    instances: tuple[PartitionId, ...]  # involved partition instances


@dataclass(frozen=True, slots=True)
class Deliver:
    """Totally ordered delivery of a transaction to one partition instance."""

    instance: PartitionId
    seq: int
    client: str
    txn: Transaction


@dataclass(frozen=True, slots=True)
class VoteMsg:
    """One partition's local certification verdict for a cross-partition txn."""

    txn_id_text: str
    partition: PartitionId
    verdict: str


@dataclass(frozen=True, slots=True)
class OutcomeMsg:
    txn_seq: int
    txn_id_text: str
    verdict: str


@dataclass(frozen=True, slots=True)
class Call:
    """One client protocol step: messages to send, then what reply to await.

    Yielded by transaction handles to the client driver; `wait` is "read",
    "outcome", or None when the step needs no reply.
    """

    sends: tuple[tuple[str, Any], ...]
    wait: Optional[str]
