"""Seeded workload generators: a read/write microbenchmark and a social-network mix.

Generators are pure functions of (spec, seed): replaying a seed reproduces
the exact script stream. Scripts carry intent only (which keys or users to
touch); `execute` interprets a script against a transaction handle, which is
where state-dependent behavior (list appends, timeline fan-out) happens.
"""

from __future__ import annotations

import heapq
import random
import string
from dataclasses import dataclass
from functools import lru_cache
from itertools import islice
from typing import Iterator, Mapping, Sequence, Union

from .core import Key, PartitionMap, Value

# Read/write operation counts per microbenchmark transaction type.
MICRO_TYPES = {"I": (2, 2), "II": (32, 2), "III": (16, 16)}

POST_SEP = b"\x1f"


# ---------------------------------------------------------------------------
# microbenchmark


@dataclass(frozen=True, slots=True)
class MicroSpec:
    """Fixed-size key/value transactions over a uniformly populated table.

    `g` is the cross-partition fraction; a cross-partition script spreads its
    keys over exactly two distinct partitions. `zipf` skews key choice toward
    low key indices (0 = uniform, the default).
    """

    txn_type: str = "I"
    g: float = 0.0
    db_size: int = 10_000
    key_bytes: int = 4
    value_bytes: int = 4
    zipf: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.txn_type not in MICRO_TYPES:
            raise ValueError(f"unknown transaction type {self.txn_type!r}")
        if not 0.0 <= self.g <= 1.0:
            raise ValueError("g must lie in [0, 1]")
        if self.db_size < 1:
            raise ValueError("db_size must be >= 1")
        if self.zipf < 0:
            raise ValueError("zipf must be >= 0")

    @property
    def kind(self) -> str:
        return "micro"

    def pmap(self, partitions: int) -> PartitionMap:
        return PartitionMap(partitions)

    def populate_items(self) -> list[tuple[Key, Value]]:
        rng = random.Random(f"micro-pop:{self.seed}")
        return [
            (i.to_bytes(self.key_bytes, "big"), rng.randbytes(self.value_bytes))
            for i in range(self.db_size)
        ]

    def echo(self) -> str:
        return (
            f"kind=micro type={self.txn_type} g={self.g:g} db={self.db_size}"
            f" key_bytes={self.key_bytes} value_bytes={self.value_bytes}"
            f" zipf={self.zipf:g} seed={self.seed}"
        )


@dataclass(frozen=True, slots=True)
class MicroScript:
    # ops: ("r", key) or ("w", key, value)
    ops: tuple[tuple, ...]


@lru_cache(maxsize=8)
def _key_pools(db_size: int, key_bytes: int, pmap: PartitionMap) -> tuple[tuple[Key, ...], ...]:
    pools: list[list[Key]] = [[] for _ in range(pmap.p)]
    for i in range(db_size):
        key = i.to_bytes(key_bytes, "big")
        pools[pmap.partition_of(key)].append(key)
    for q, pool in enumerate(pools):
        if not pool:
            raise ValueError(f"partition {q} received no keys; grow db_size")
    return tuple(tuple(p) for p in pools)


@lru_cache(maxsize=32)
def _zipf_cum_weights(size: int, exponent: float) -> tuple[float, ...]:
    total = 0.0
    out = []
    for rank in range(1, size + 1):
        total += rank**-exponent
        out.append(total)
    return tuple(out)


def _pick_key(rng: random.Random, pool: tuple[Key, ...], zipf: float) -> Key:
    if zipf == 0.0:
        return rng.choice(pool)
    return rng.choices(pool, cum_weights=_zipf_cum_weights(len(pool), zipf))[0]


def gen_micro(
    spec: MicroSpec,
    pmap: PartitionMap,
    seed: Union[int, str],
    count: int,
    home_offset: int = 0,
) -> Iterator[MicroScript]:
    """Stream `count` scripts of the spec's type.

    Single-partition scripts take their home partition round-robin (starting
    at `home_offset`) so load spreads evenly; cross-partition scripts pick a
    uniform random pair of distinct partitions and alternate keys between the
    two, guaranteeing the key set spans exactly both.
    """
    rng = random.Random(f"micro:{seed}")
    pools = _key_pools(spec.db_size, spec.key_bytes, pmap)
    n_reads, n_writes = MICRO_TYPES[spec.txn_type]
    serial = home_offset
    for _ in range(count):
        cross = pmap.p > 1 and rng.random() < spec.g
        if cross:
            pair = sorted(rng.sample(range(pmap.p), 2))
            pick = [pools[pair[j % 2]] for j in range(n_reads + n_writes)]
        else:
            home = serial % pmap.p
            serial += 1
            pick = [pools[home]] * (n_reads + n_writes)
        ops: list[tuple] = []
        for j in range(n_reads):
            ops.append(("r", _pick_key(rng, pick[j], spec.zipf)))
        for j in range(n_reads, n_reads + n_writes):
            ops.append(("w", _pick_key(rng, pick[j], spec.zipf), rng.randbytes(spec.value_bytes)))
        yield MicroScript(tuple(ops))


# ---------------------------------------------------------------------------
# social network benchmark


@dataclass(frozen=True, slots=True)
class SocialSpec:
    """Timeline/post/follow mix over a database partitioned by user.

    Every record of a user (producer list, consumer list, post list) shares
    the user-id key prefix and therefore one partition. Timelines merge the
    last `reads_per_producer` posts of each producer and are read-only.
    """

    users: int = 1_000
    mix: tuple[float, float, float] = (0.5, 0.4, 0.1)  # timeline, post, follow
    follow_cross: float = 0.5
    post_len: tuple[int, int] = (10, 50)
    initial_follows: int = 10
    reads_per_producer: int = 10
    timeline_limit: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix fractions must sum to 1")
        if self.users < 2:
            raise ValueError("need at least 2 users")

    @property
    def kind(self) -> str:
        return "social"

    def pmap(self, partitions: int) -> PartitionMap:
        # Hash only the 8-byte user prefix: all of a user's records co-locate.
        return PartitionMap(partitions, prefix=8)

    def populate_items(self) -> list[tuple[Key, Value]]:
        rng = random.Random(f"social-pop:{self.seed}")
        producers: list[list[int]] = []
        consumers: list[list[int]] = [[] for _ in range(self.users)]
        k = min(self.initial_follows, self.users - 1)
        for u in range(self.users):
            others = [w for w in rng.sample(range(self.users), k + 1) if w != u][:k]
            producers.append(sorted(others))
            for w in others:
                consumers[w].append(u)
        items: list[tuple[Key, Value]] = []
        for u in range(self.users):
            items.append((producers_key(u), encode_ids(producers[u])))
            items.append((consumers_key(u), encode_ids(sorted(consumers[u]))))
            items.append((posts_key(u), b""))
        return items

    def echo(self) -> str:
        return (
            f"kind=social users={self.users}"
            f" timeline={self.mix[0]:g} post={self.mix[1]:g} follow={self.mix[2]:g}"
            f" follow_cross={self.follow_cross:g}"
            f" post_min={self.post_len[0]} post_max={self.post_len[1]}"
            f" follows={self.initial_follows} per_producer={self.reads_per_producer}"
            f" limit={self.timeline_limit} seed={self.seed}"
        )


def user_key(user: int) -> bytes:
    return user.to_bytes(8, "big")


def producers_key(user: int) -> Key:
    return user_key(user) + b"P"


def consumers_key(user: int) -> Key:
    return user_key(user) + b"C"


def posts_key(user: int) -> Key:
    return user_key(user) + b"O"


def encode_ids(ids: Sequence[int]) -> Value:
    return ",".join(str(i) for i in ids).encode()


def decode_ids(raw: Value) -> list[int]:
    return [int(tok) for tok in raw.decode().split(",")] if raw else []


def encode_posts(posts: Sequence[bytes]) -> Value:
    return POST_SEP.join(posts)


def decode_posts(raw: Value) -> list[bytes]:
    return raw.split(POST_SEP) if raw else []


@dataclass(frozen=True, slots=True)
class PostScript:
    user: int
    text: bytes


@dataclass(frozen=True, slots=True)
class FollowScript:
    follower: int
    followee: int


@dataclass(frozen=True, slots=True)
class TimelineScript:
    user: int


SocialScript = Union[PostScript, FollowScript, TimelineScript]


@lru_cache(maxsize=8)
def _users_by_partition(users: int, pmap: PartitionMap) -> tuple[tuple[int, ...], ...]:
    pools: list[list[int]] = [[] for _ in range(pmap.p)]
    for u in range(users):
        pools[pmap.partition_of(user_key(u))].append(u)
    for q, pool in enumerate(pools):
        if not pool:
            raise ValueError(f"partition {q} received no users; grow user count")
    return tuple(tuple(p) for p in pools)


def gen_social(
    spec: SocialSpec,
    pmap: PartitionMap,
    seed: Union[int, str],
    count: int,
) -> Iterator[SocialScript]:
    rng = random.Random(f"social:{seed}")
    pools = _users_by_partition(spec.users, pmap)
    t_frac, p_frac, _ = spec.mix
    for _ in range(count):
        roll = rng.random()
        if roll < t_frac:
            yield TimelineScript(rng.randrange(spec.users))
        elif roll < t_frac + p_frac:
            length = rng.randint(*spec.post_len)
            text = "".join(rng.choices(string.ascii_lowercase, k=length)).encode()
            yield PostScript(rng.randrange(spec.users), text)
        else:
            u = rng.randrange(spec.users)
            home = pmap.partition_of(user_key(u))
            cross = pmap.p > 1 and rng.random() < spec.follow_cross
            if cross:
                q = rng.choice([r for r in range(pmap.p) if r != home])
                w = rng.choice(pools[q])
            else:
                same = [x for x in pools[home] if x != u]
                w = rng.choice(same) if same else rng.choice([x for x in range(spec.users) if x != u])
            yield FollowScript(u, w)


def timeline_merge(
    per_producer: Mapping[int, Sequence[tuple[int, bytes]]],
    limit: int,
) -> list[tuple[int, int, bytes]]:
    """Merge (seq, post) runs into one timeline, newest first.

    Entries are ordered by (post sequence number, producer id) descending and
    truncated to `limit`. Each producer's input run must be seq-ascending.
    """
    runs = []
    for producer in per_producer:
        entries = per_producer[producer]
        runs.append([(-seq, -producer, text) for seq, text in reversed(entries)])
    merged = heapq.merge(*runs)
    return [(-ns, -np, text) for ns, np, text in islice(merged, limit)]


# ---------------------------------------------------------------------------
# script execution against a transaction handle


def execute(script, tx, spec):
    """Run one script against a transaction handle; returns the verdict.

    The handle exposes read(key) and commit() as generators (they may need a
    network round trip) and a plain write(key, value).
    """
    if isinstance(script, MicroScript):
        for op in script.ops:
            if op[0] == "r":
                yield from tx.read(op[1])
            else:
                tx.write(op[1], op[2])
        return (yield from tx.commit())

    if isinstance(script, PostScript):
        raw = yield from tx.read(posts_key(script.user))
        posts = decode_posts(raw)
        posts.append(script.text)
        tx.write(posts_key(script.user), encode_posts(posts))
        return (yield from tx.commit())

    if isinstance(script, FollowScript):
        prods = decode_ids((yield from tx.read(producers_key(script.follower))))
        cons = decode_ids((yield from tx.read(consumers_key(script.followee))))
        if script.followee not in prods:
            prods.append(script.followee)
            tx.write(producers_key(script.follower), encode_ids(prods))
        if script.follower not in cons:
            cons.append(script.follower)
            tx.write(consumers_key(script.followee), encode_ids(cons))
        return (yield from tx.commit())

    if isinstance(script, TimelineScript):
        prods = decode_ids((yield from tx.read(producers_key(script.user))))
        per: dict[int, list[tuple[int, bytes]]] = {}
        for p in sorted(prods):
            posts = decode_posts((yield from tx.read(posts_key(p))))
            run = list(enumerate(posts))[-spec.reads_per_producer :]
            per[p] = run
        timeline_merge(per, spec.timeline_limit)
        return (yield from tx.commit())

    raise TypeError(f"unknown script {type(script).__name__}")


# ---------------------------------------------------------------------------
# spec files


WorkloadSpecT = Union[MicroSpec, SocialSpec]


def parse_spec(text: str) -> WorkloadSpecT:
    """Parse a plain-text key=value workload spec."""
    kv: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for tok in line.split():
            key, eq, value = tok.partition("=")
            if not eq:
                raise ValueError(f"bad spec token {tok!r}")
            kv[key] = value
    kind = kv.pop("kind", "micro")
    if kind == "micro":
        return MicroSpec(
            txn_type=kv.pop("type", "I"),
            g=float(kv.pop("g", "0")),
            db_size=int(kv.pop("db", "10000")),
            key_bytes=int(kv.pop("key_bytes", "4")),
            value_bytes=int(kv.pop("value_bytes", "4")),
            zipf=float(kv.pop("zipf", "0")),
            seed=int(kv.pop("seed", "0")),
        )
    if kind == "social":
        mix = (
            float(kv.pop("timeline", "0.5")),
            float(kv.pop("post", "0.4")),
            float(kv.pop("follow", "0.1")),
        )
        return SocialSpec(
            users=int(kv.pop("users", "1000")),
            mix=mix,
            follow_cross=float(kv.pop("follow_cross", "0.5")),
            post_len=(int(kv.pop("post_min", "10")), int(kv.pop("post_max", "50"))),
            initial_follows=int(kv.pop("follows", "10")),
            reads_per_producer=int(kv.pop("per_producer", "10")),
            timeline_limit=int(kv.pop("limit", "20")),
            seed=int(kv.pop("seed", "0")),
        )
    raise ValueError(f"unknown workload kind {kind!r}")


def load_spec(path: str) -> WorkloadSpecT:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


def scripts_for_client(
    spec: WorkloadSpecT,
    pmap: PartitionMap,
    run_seed: int,
    client_index: int,
    count: int,
) -> list:
    """Materialize one client's script stream with its own sub-seed."""
    sub = f"{run_seed}:{client_index}"
    if isinstance(spec, MicroSpec):
        return list(gen_micro(spec, pmap, sub, count, home_offset=client_index))
    return list(gen_social(spec, pmap, sub, count))


def cross_fraction(spec: WorkloadSpecT) -> float:
    """The g knob echoed into result CSVs."""
    if isinstance(spec, MicroSpec):
        return spec.g
    return spec.follow_cross
