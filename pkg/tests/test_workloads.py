import random
from collections import Counter

import pytest

from durkit.core import PartitionMap
from durkit.workloads import (
    FollowScript,
    MicroSpec,
    PostScript,
    SocialSpec,
    TimelineScript,
    consumers_key,
    cross_fraction,
    decode_ids,
    gen_micro,
    gen_social,
    load_spec,
    parse_spec,
    posts_key,
    producers_key,
    timeline_merge,
    user_key,
)

# -- microbenchmark ----------------------------------------------------------


def test_type_one_script_shape():
    pmap = PartitionMap(1)
    spec = MicroSpec(txn_type="I")
    for script in gen_micro(spec, pmap, 0, 20):
        reads = [op for op in script.ops if op[0] == "r"]
        writes = [op for op in script.ops if op[0] == "w"]
        assert len(reads) == 2 and len(writes) == 2
        assert all(len(op[1]) == 4 for op in script.ops)
        assert all(len(op[2]) == 4 for op in writes)


@pytest.mark.parametrize("txn_type,n_reads,n_writes", [("II", 32, 2), ("III", 16, 16)])
def test_op_counts_per_type(txn_type, n_reads, n_writes):
    pmap = PartitionMap(2)
    spec = MicroSpec(txn_type=txn_type, g=0.5)
    for script in gen_micro(spec, pmap, 3, 30):
        ops = Counter(op[0] for op in script.ops)
        assert ops["r"] == n_reads and ops["w"] == n_writes


def test_g_zero_everything_single_partition():
    pmap = PartitionMap(8)
    spec = MicroSpec(txn_type="I", g=0.0, db_size=4000)
    for script in gen_micro(spec, pmap, 1, 200):
        assert len({pmap.partition_of(op[1]) for op in script.ops}) == 1


def test_g_one_exact_two_span_and_uniform_pairs():
    # 30k scripts: at 10k the expected max deviation over 28 multinomial
    # cells already exceeds 10%, so the tolerance would test noise.
    pmap = PartitionMap(8)
    spec = MicroSpec(txn_type="I", g=1.0, db_size=4000)
    pairs = Counter()
    for script in gen_micro(spec, pmap, 123, 30_000):
        parts = sorted({pmap.partition_of(op[1]) for op in script.ops})
        assert len(parts) == 2
        pairs[tuple(parts)] += 1
    assert len(pairs) == 28  # C(8,2)
    expected = 30_000 / 28
    for count in pairs.values():
        assert abs(count - expected) <= 0.10 * expected


def test_generator_is_pure_function_of_spec_and_seed():
    pmap = PartitionMap(4)
    spec = MicroSpec(txn_type="III", g=0.3)
    a = list(gen_micro(spec, pmap, 9, 50))
    b = list(gen_micro(spec, pmap, 9, 50))
    assert a == b
    c = list(gen_micro(spec, pmap, 10, 50))
    assert a != c


def test_zipf_skew_knob_defaults_off():
    pmap = PartitionMap(1)
    uniform = Counter()
    skewed = Counter()
    for script in gen_micro(MicroSpec(txn_type="I", db_size=1000), pmap, 4, 2000):
        for op in script.ops:
            uniform[op[1]] += 1
    for script in gen_micro(MicroSpec(txn_type="I", db_size=1000, zipf=1.2), pmap, 4, 2000):
        for op in script.ops:
            skewed[op[1]] += 1
    # skewed draws concentrate on few keys; uniform spreads them out
    assert skewed.most_common(1)[0][1] > 5 * uniform.most_common(1)[0][1]
    assert len(uniform) > len(skewed)


def test_round_robin_home_partitions_balance():
    pmap = PartitionMap(4)
    spec = MicroSpec(txn_type="I", g=0.0, db_size=4000)
    homes = Counter()
    for script in gen_micro(spec, pmap, 2, 400):
        homes[pmap.partition_of(script.ops[0][1])] += 1
    assert set(homes.values()) == {100}


# -- social benchmark ---------------------------------------------------------


def test_social_mix_within_two_percent():
    pmap = PartitionMap(4)
    spec = SocialSpec(users=500)
    kinds = Counter(type(s).__name__ for s in gen_social(spec, pmap, 5, 10_000))
    assert abs(kinds["TimelineScript"] / 10_000 - 0.5) <= 0.02
    assert abs(kinds["PostScript"] / 10_000 - 0.4) <= 0.02
    assert abs(kinds["FollowScript"] / 10_000 - 0.1) <= 0.02


def test_post_scripts_touch_one_partition():
    pmap = PartitionMap(8, prefix=8)
    # All of one user's keys co-locate, so a post touches exactly one partition.
    for u in range(50):
        parts = {pmap.partition_of(k) for k in (posts_key(u), producers_key(u), consumers_key(u))}
        assert len(parts) == 1


def test_follow_touches_two_users_cross_iff_partitions_differ():
    spec = SocialSpec(users=300)
    pmap = spec.pmap(4)
    rng_seen_cross = rng_seen_single = 0
    for s in gen_social(spec, pmap, 21, 2000):
        if not isinstance(s, FollowScript):
            continue
        assert s.follower != s.followee
        pu = pmap.partition_of(user_key(s.follower))
        pw = pmap.partition_of(user_key(s.followee))
        if pu == pw:
            rng_seen_single += 1
        else:
            rng_seen_cross += 1
    assert rng_seen_cross > 0 and rng_seen_single > 0
    total = rng_seen_cross + rng_seen_single
    assert abs(rng_seen_cross / total - 0.5) < 0.1


def test_population_graph_is_symmetric():
    spec = SocialSpec(users=100, initial_follows=5)
    items = dict(spec.populate_items())
    producers = {u: decode_ids(items[producers_key(u)]) for u in range(100)}
    consumers = {u: decode_ids(items[consumers_key(u)]) for u in range(100)}
    for u in range(100):
        assert len(producers[u]) == 5
        for w in producers[u]:
            assert u in consumers[w]
        for w in consumers[u]:
            assert u in producers[w]


# -- timeline merge -----------------------------------------------------------


def test_timeline_merge_empty():
    assert timeline_merge({}, 10) == []


def test_timeline_merge_single_producer_newest_first():
    per = {7: [(0, b"a"), (1, b"b"), (2, b"c")]}
    assert timeline_merge(per, 10) == [(2, 7, b"c"), (1, 7, b"b"), (0, 7, b"a")]


def test_timeline_merge_matches_sort_all_oracle():
    rng = random.Random(31)
    for _ in range(50):
        per = {}
        for p in rng.sample(range(20), rng.randint(0, 6)):
            n = rng.randint(0, 8)
            per[p] = [(i, f"p{p}-{i}".encode()) for i in range(n)]
        limit = rng.randint(0, 12)
        got = timeline_merge(per, limit)
        # Oracle: flatten, sort by (seq, producer) descending, truncate.
        flat = [(seq, p, text) for p, entries in per.items() for seq, text in entries]
        oracle = sorted(flat, key=lambda e: (e[0], e[1]), reverse=True)[:limit]
        assert got == oracle


# -- spec files ----------------------------------------------------------------


def test_parse_micro_spec():
    spec = parse_spec("kind=micro type=III g=0.25 db=5000 seed=7")
    assert spec == MicroSpec(txn_type="III", g=0.25, db_size=5000, seed=7)


def test_parse_social_spec_multiline():
    text = "kind=social users=42\ntimeline=0.6 post=0.3 follow=0.1\nfollow_cross=0.25"
    spec = parse_spec(text)
    assert isinstance(spec, SocialSpec)
    assert spec.users == 42 and spec.mix == (0.6, 0.3, 0.1) and spec.follow_cross == 0.25


def test_spec_echo_round_trips(tmp_path):
    spec = MicroSpec(txn_type="II", g=0.1, db_size=777, seed=3)
    path = tmp_path / "w.spec"
    path.write_text(spec.echo() + "\n")
    assert load_spec(str(path)) == spec
    social = SocialSpec(users=55, seed=2)
    path.write_text(social.echo() + "\n")
    assert load_spec(str(path)) == social


def test_cross_fraction_knob():
    assert cross_fraction(MicroSpec(g=0.3)) == 0.3
    assert cross_fraction(SocialSpec(users=10)) == 0.5


def test_bad_specs_rejected():
    with pytest.raises(ValueError):
        parse_spec("kind=micro type=IV")
    with pytest.raises(ValueError):
        parse_spec("kind=social users=10 timeline=0.9 post=0.9 follow=0.1")
    with pytest.raises(ValueError):
        parse_spec("kind=nope")
