import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_mentions
from workload import dump, random_body, run_workload
from mtkb import KB
from mtkb.kv import MAX_POSITION, OrderedKV, decode_mention, mention_key
from mtkb.store import LOG_NAME, SNAP_NAME, FactStore, MissingFact, frame, read_records
from mtkb.terms import Compound, Symbol, parse_term

seeds = st.integers(0, 2 ** 32)


@given(st.sets(st.binary(min_size=0, max_size=4), max_size=40), st.binary(max_size=4),
       st.binary(max_size=4))
def test_range_scan_is_exact(keys, lo, hi):
    kv = OrderedKV()
    for k in keys:
        kv.put(k)
    assert list(kv.keys(lo, hi)) == sorted(k for k in keys if lo <= k < hi)
    c = kv.cursor(lo, hi)
    got = []
    while not c.at_end:
        got.append(c.key)
        c.advance()
    assert got == sorted(k for k in keys if lo <= k < hi)


@given(st.lists(st.tuples(st.integers(0, 2 ** 64 - 1), st.integers(0, MAX_POSITION),
                          st.integers(0, 2 ** 64 - 1)), min_size=2, max_size=30))
def test_mention_keys_sort_like_tuples(triples):
    keys = sorted(mention_key(*t) for t in triples)
    assert [decode_mention(k) for k in keys] == sorted(triples)


def test_position_clamped_at_sentinel():
    assert decode_mention(mention_key(1, 70000, 2)) == (1, MAX_POSITION, 2)


@given(seeds)
def test_mentions_match_naive(seed):
    rng = random.Random(seed)
    s = FactStore()
    for _ in range(20):
        body = random_body(rng, var_p=0.2)
        got = {(s.interner.text(e), p) for e, p in s.compute_mentions(body)}
        assert got == naive_mentions(body)


def test_bucket_adjacency(kb):
    e = kb.begin_session("t")
    for i in range(50):
        kb.store_fact(f"(likes A{i % 5} (Fn B{i}))", "M", event=e)
    a0 = kb.lookup("A0")
    keys = [decode_mention(k) for k in kb.store.mentions.prefix(a0.to_bytes(8, "big"))]
    assert keys == sorted(keys) and all(k[0] == a0 for k in keys)
    assert list(kb.store.bucket(a0, 1)) == [kb.fact_id(f"(likes A0 (Fn B{i}))") for i in range(0, 50, 5)]


def test_dedup_and_multi_mt(kb):
    e = kb.begin_session("t")
    f1 = kb.store_fact("(foo Bar)", "MT1", event=e)
    f2 = kb.store_fact("(foo Bar)", "MT2", event=e)
    assert f1 == f2
    assert {kb.term(m).text for m in kb.fact(f1).mts} == {"MT1", "MT2"}
    assert kb.forget_fact_in_mt(f1, "MT1") is False
    assert kb.forget_fact_in_mt(f1, "MT2") is True
    assert kb.fact_id("(foo Bar)") is None
    assert list(kb.store.mentions.keys()) == []
    with pytest.raises(MissingFact):
        kb.forget_fact_in_mt(f1, "MT2")


@settings(max_examples=25)
@given(seeds)
def test_reopen_reproduces_state(tmp_path_factory, seed):
    path = tmp_path_factory.mktemp("s") / "store"
    rng = random.Random(seed)
    with KB(path, sync=False) as kb:
        run_workload(kb, rng, 60)
        before = dump(kb)
    with KB(path, sync=False) as kb:
        assert dump(kb) == before


@settings(max_examples=25)
@given(seeds)
def test_snapshot_plus_log_equals_log_only(tmp_path_factory, seed):
    root = tmp_path_factory.mktemp("s")
    a, b = KB(root / "a", sync=False), KB(root / "b", sync=False)
    rng_a, rng_b = random.Random(seed), random.Random(seed)
    # identical workloads; a takes a checkpoint halfway
    run_workload(a, rng_a, 40)
    run_workload(b, rng_b, 40)
    a.checkpoint()
    run_workload(a, rng_a, 40)
    run_workload(b, rng_b, 40)
    live = dump(a)
    a.close()
    b.close()
    with KB(root / "a", sync=False) as a2, KB(root / "b", sync=False) as b2:
        d_a, d_b = dump(a2), dump(b2)
    # event entity names carry random suffixes, so compare everything else
    for key in live:
        if key != "entities":
            assert d_a[key] == live[key] == d_b[key], key
    assert d_a["entities"] == live["entities"]


@settings(max_examples=20)
@given(seeds, st.floats(0, 1))
def test_torn_log_recovers_to_committed_prefix(tmp_path_factory, seed, cut):
    path = tmp_path_factory.mktemp("s") / "store"
    rng = random.Random(seed)
    states = []
    with KB(path, sync=False) as kb:
        log_path = path / LOG_NAME

        def mark():
            states.append((log_path.stat().st_size, dump(kb)))

        mark()
        run_workload(kb, rng, 40, mark)
    size = log_path.stat().st_size
    offset = int(cut * size)
    with open(log_path, "r+b") as fh:
        fh.truncate(offset)
    expected = [d for sz, d in states if sz <= offset]
    with KB(path, sync=False) as kb:
        got = dump(kb)
    if expected:
        assert got == expected[-1]
    assert (log_path.stat().st_size) <= offset or offset < states[0][0]


def test_corrupt_byte_truncates_tail(tmp_path):
    path = tmp_path / "s"
    with KB(path, sync=False) as kb:
        e = kb.begin_session("t")
        kb.store_fact("(foo A)", "M", event=e)
        mid = (path / LOG_NAME).stat().st_size
        kb.store_fact("(foo B)", "M", event=e)
    data = bytearray((path / LOG_NAME).read_bytes())
    data[mid + 6] ^= 0xFF
    (path / LOG_NAME).write_bytes(bytes(data))
    with KB(path, sync=False) as kb:
        assert kb.ask_bodies("(foo ?x)", "M") == [parse_term("(foo A)")]
    assert (path / LOG_NAME).stat().st_size == mid


def test_framing_round_trip():
    blob = frame(b"T", b"hello") + frame(b"G", b"(gen 3)")
    assert read_records(blob) == ([(b"T", b"hello"), (b"G", b"(gen 3)")], len(blob))
    assert read_records(blob[:-1]) == ([(b"T", b"hello")], len(frame(b"T", b"hello")))


def test_stale_log_is_ignored(tmp_path):
    path = tmp_path / "s"
    with KB(path, sync=False) as kb:
        e = kb.begin_session("t")
        kb.store_fact("(foo A)", "M", event=e)
        old_log = (path / LOG_NAME).read_bytes()
        kb.checkpoint()
    # a crash between snapshot rename and log reset leaves the old log behind
    (path / LOG_NAME).write_bytes(old_log)
    with KB(path, sync=False) as kb:
        assert kb.ask_bodies("(foo ?x)", "M") == [parse_term("(foo A)")]
        assert len(kb.store) == 1


def test_corrupt_snapshot_is_an_error(tmp_path):
    from mtkb.store import StorageError
    path = tmp_path / "s"
    with KB(path, sync=False) as kb:
        kb.store_fact("(foo A)", "M", event=kb.begin_session("t"))
        kb.checkpoint()
    snap = path / SNAP_NAME
    data = bytearray(snap.read_bytes())
    data[10] ^= 1
    snap.write_bytes(bytes(data))
    with pytest.raises(StorageError):
        KB(path, sync=False)


def test_failed_transaction_leaves_no_trace(tmp_path):
    path = tmp_path / "s"
    with KB(path, sync=False) as kb:
        e = kb.begin_session("t")
        kb.store_fact("(foo A)", "M", event=e)
        before, size = dump(kb), (path / LOG_NAME).stat().st_size
        with pytest.raises(RuntimeError):
            with kb.transaction():
                kb.store_fact("(foo B)", "M2", event=e)
                kb.add_genl_mt("M2", "M", event=e)
                kb.declare_index("foo", 1)
                raise RuntimeError("boom")
        assert dump(kb) == before
        assert (path / LOG_NAME).stat().st_size == size


@settings(max_examples=30)
@given(seeds)
def test_direct_index_is_complete(seed):
    rng = random.Random(seed)
    kb = KB()
    run_workload(kb, rng, 80)
    s = kb.store
    for pred, pos in s.indexes.items():
        name = s.interner.text(pred)
        expected: dict[str, list[int]] = {}
        for f in sorted(s.facts.values(), key=lambda f: f.id):
            b = f.body
            if not f.special and b[0].text == name and len(b) > pos:
                expected.setdefault(b[pos].text, []).append(f.id)
        got = {k: v for (p, k), v in s._direct.items() if p == pred}
        assert got == expected


def test_compound_mt_names(kb):
    mt = Compound((Symbol("UserModelMtFn"), Symbol("U1")))
    e = kb.begin_session("t")
    kb.store_fact("(age U1 30)", mt, event=e)
    assert kb.ask_bodies("(age U1 ?a)", mt) == [parse_term("(age U1 30)")]
