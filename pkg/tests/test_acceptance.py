"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary (see conftest.py). Running this file directly runs only these tests.
"""
from __future__ import annotations

import functools
import hashlib
import json
import os
import random
import socket
import statistics
import subprocess
import sys
import time
from pathlib import Path

import pytest

from workload import random_kb, random_pattern
from mtkb import KB, Variable
from mtkb.archivist import ArchivistClient
from mtkb.loader import load_file
from mtkb.terms import Compound, String, Symbol, parse_term, unify

RESULTS: dict[int, tuple[bool, str, str]] = {}


def criterion(n: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            try:
                detail = fn(*a, **kw) or ""
            except BaseException as e:
                RESULTS[n] = (False, title, f"{type(e).__name__}: {e}"[:300])
                raise
            RESULTS[n] = (True, title, detail)
        return run
    return wrap


def report_lines() -> list[str]:
    lines = []
    for n in range(1, 10):
        if n in RESULTS:
            ok, title, detail = RESULTS[n]
            lines.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}"
                         + (f"  [{detail}]" if detail else ""))
        else:
            lines.append(f"criterion {n}: NOT RUN")
    return lines


def write(path: Path, text: str, mtime: int) -> Path:
    path.write_text(text)
    os.utime(path, (mtime, mtime))
    return path


def bodies(kb, pattern, mt, **kw):
    return {b.text for b in kb.ask_bodies(pattern, mt, **kw)}


# -- 1 ------------------------------------------------------------------------

@criterion(1, "sample KB with microtheories, exact answers")
def test_figure1_sample_kb():
    start = time.perf_counter()
    kb = KB()
    e = kb.begin_session("acceptance")
    kb.store_fact("(foo Bar)", "MT1", event=e)
    kb.store_fact("(foo Baz)", "MT1", event=e)
    kb.store_fact("(genlMt MT1 MT2)", "MT1", event=e)
    kb.store_fact("(foo Quux)", "MT2", event=e)
    assert [b.text for b in kb.ask_bodies("(foo Bar)", "MT1")] == ["(foo Bar)"]
    assert bodies(kb, "(foo ?x)", "MT1") == {"(foo Bar)", "(foo Baz)", "(foo Quux)"}
    assert bodies(kb, "(foo ?x)", "MT2") == {"(foo Quux)"}
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    return f"{elapsed * 1000:.1f} ms"


# -- 2 ------------------------------------------------------------------------

@criterion(2, "file reload forgets unsupported facts, keeps overlap")
def test_figure2_reload(tmp_path):
    kb = KB()
    a = write(tmp_path / "FileA.krf",
              "(in-microtheory MT1)\n(foo Bar)\n(foo Baz)\n(foo Quux)\n", 1_000_000)
    b = write(tmp_path / "FileB.krf", "(in-microtheory MT1)\n(foo Quux)\n", 1_000_000)
    e1 = load_file(kb, a).event
    eb = load_file(kb, b).event
    assert [e.id for e in kb.events_for("(foo Quux)", "MT1")] == [e1, eb]
    write(a, "(in-microtheory MT1)\n(foo Bar)\n", 2_000_000)
    r = load_file(kb, a)
    e2 = r.event
    assert bodies(kb, "(foo ?x)", "MT1") == {"(foo Bar)", "(foo Quux)"}
    assert [p.text for p in r.forgotten] == ["(foo Baz)"]
    assert kb.fact_id("(foo Baz)") is None
    assert e1 not in kb.prov
    assert [e.id for e in kb.events_for("(foo Quux)", "MT1")] == [eb]
    assert [e.id for e in kb.events_for("(foo Bar)", "MT1")] == [e2]
    return "events_for checked"


# -- 3 ------------------------------------------------------------------------

@criterion(3, "coarse-coded mentions ignore nesting order")
def test_mentions_coarse_coding():
    kb = KB()
    a, b = parse_term("(foo (TheList A B))"), parse_term("(foo (TheList B A))")
    ma, mb = kb.store.compute_mentions(a), kb.store.compute_mentions(b)
    assert ma == mb and len(ma) == 4
    named = {(kb.term(e).text, p) for e, p in ma}
    assert named == {("foo", 0), ("TheList", 1), ("A", 1), ("B", 1)}
    assert unify(a, b) is None
    return "4 pairs, unify fails"


# -- 4 ------------------------------------------------------------------------

N_KBS, PATTERNS_PER_KB = 50, 20


@criterion(4, "ask equals scan-and-filter oracle on random KBs")
def test_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(20240401)
    trials = 0
    for _ in range(N_KBS):
        n_facts, n_mts = rng.randint(1, 5000), rng.randint(1, 50)
        kb, ref, mts = random_kb(rng, n_facts, n_mts, edge_p=rng.uniform(0, 0.2))
        for _ in range(PATTERNS_PER_KB):
            pattern = random_pattern(rng, ref)
            mt = rng.choice(mts)
            got = [b.text for b in kb.ask_bodies(pattern, mt, allow_scan=True)]
            assert len(got) == len(set(got))
            assert set(got) == ref.ask(pattern, mt), (pattern.text, mt)
            trials += 1
    elapsed = time.perf_counter() - start
    assert trials >= 1000 and elapsed < 120
    return f"{trials} trials in {elapsed:.1f} s"


# -- 5 ------------------------------------------------------------------------

VOCAB_PREDS = ["likes", "isa", "near"]
VOCAB_ENTS = [f"E{i}" for i in range(8)]
VOCAB_MTS = ["M1", "M2", "M3"]


def random_file(rng: random.Random) -> str:
    lines = []
    for _ in range(rng.randint(0, 20)):
        r = rng.random()
        if r < 0.15:
            lines.append(f"(in-microtheory {rng.choice(VOCAB_MTS)})")
        elif r < 0.25:
            lines.append(f"(ist-Information {rng.choice(VOCAB_MTS)} "
                         f"({rng.choice(VOCAB_PREDS)} {rng.choice(VOCAB_ENTS)} X))")
        elif r < 0.3:
            c, p = rng.sample(VOCAB_MTS, 2)
            if VOCAB_MTS.index(c) > VOCAB_MTS.index(p):
                lines.append(f"(genlMt {c} {p})")
        else:
            lines.append(f"({rng.choice(VOCAB_PREDS)} {rng.choice(VOCAB_ENTS)} "
                         f"{rng.choice(VOCAB_ENTS)})")
    return "\n".join(lines) + "\n"


def vocabulary_queries():
    qs = [Compound((Symbol(p), Variable("?a"), Variable("?b"))) for p in VOCAB_PREDS]
    qs += [Compound((Symbol(p), Symbol(e), Variable("?b"))) for p in VOCAB_PREDS
           for e in VOCAB_ENTS]
    qs += [Compound((Symbol(p), Symbol(a), Symbol(b))) for p in VOCAB_PREDS
           for a in VOCAB_ENTS for b in VOCAB_ENTS + ["X"]]
    qs += [parse_term(f"(genlMt {c} ?p)") for c in VOCAB_MTS]
    return qs


@criterion(5, "reloading v2 over v1 equals a fresh v2 load")
def test_supersession_property(tmp_path):
    rng = random.Random(55)
    queries = vocabulary_queries()
    for i in range(200):
        v1, v2 = random_file(rng), random_file(rng)
        d = tmp_path / str(i)
        d.mkdir()
        f = write(d / "kb.krf", v1, 1_000_000)
        reloaded = KB()
        load_file(reloaded, f)
        write(f, v2, 2_000_000)
        load_file(reloaded, f)
        fresh = KB()
        load_file(fresh, f)
        for q in queries:
            for mt in VOCAB_MTS + ["BaseKB"]:
                assert bodies(reloaded, q, mt) == bodies(fresh, q, mt), (i, q.text, mt)
    return f"200 pairs x {len(queries) * 4} queries"


# -- 6 ------------------------------------------------------------------------

N_LEXICON, N_LOOKUPS = 100_000, 10_000


def best_of(n, fn):
    return min(fn() for _ in range(n))


@criterion(6, "indexed lookup matches mentions path and is >= 5x faster")
def test_indexed_lookup_speed():
    rng = random.Random(6)
    kb = KB()
    e = kb.begin_session("lexicon")
    pred = Symbol("wordSense")
    pos = [Symbol("Noun"), Symbol("Verb"), Symbol("Adjective")]
    with kb.transaction():
        for i in range(N_LEXICON):
            kb.store_fact(Compound((pred, String(f"word{i // 2}"), Symbol(f"Sense{i % 5000}"),
                                    pos[i % 3])), "LexiconMt", event=e)
    kb.declare_index(pred, 1)
    queries = [Compound((pred, String(f"word{rng.randrange(N_LEXICON // 2)}"),
                         Variable("?sense"), Variable("?pos"))) for _ in range(N_LOOKUPS)]
    for q in queries[:500]:
        assert kb.ask(q, "LexiconMt") == kb.ask(q, "LexiconMt", use_index=False)
    assert all(len(kb.ask(q, "LexiconMt")) == 2 for q in queries[:100])

    def batch(use_index):
        def go():
            t = time.perf_counter()
            for q in queries:
                kb.ask(q, "LexiconMt", use_index=use_index)
            return time.perf_counter() - t
        return go

    mentions_t = best_of(3, batch(False))
    index_t = best_of(3, batch(True))
    ratio = mentions_t / index_t
    assert ratio >= 5.0, f"speedup {ratio:.2f}x"
    return f"mentions {mentions_t:.3f} s, index {index_t:.3f} s, {ratio:.1f}x"


# -- 7 ------------------------------------------------------------------------

@criterion(7, "100k facts / 1000 MTs: snapshot open < 5 s, median query < 10 ms")
def test_scale_smoke(tmp_path):
    rng = random.Random(7)
    path = tmp_path / "store"
    kb = KB(path, sync=False)
    e = kb.begin_session("scale")
    with kb.transaction():
        for m in range(1, 1000):
            kb.add_genl_mt(f"Mt{m}", f"Mt{rng.randrange(max(0, m - 50), m)}", event=e)
        for _ in range(100_000):
            kb.store_fact(Compound((Symbol(f"rel{rng.randrange(50)}"),
                                    Symbol(f"E{rng.randrange(20000)}"),
                                    Symbol(f"E{rng.randrange(20000)}"))),
                          f"Mt{rng.randrange(1000)}", event=e)
    kb.checkpoint()
    n = len(kb.store)
    kb.close()
    t = time.perf_counter()
    kb = KB(path, sync=False)
    open_s = time.perf_counter() - t
    assert len(kb.store) == n and open_s < 5.0
    times = []
    for _ in range(1000):
        q = Compound((Symbol(f"rel{rng.randrange(50)}"), Symbol(f"E{rng.randrange(20000)}"),
                      Variable("?x")))
        t = time.perf_counter()
        kb.ask(q, f"Mt{rng.randrange(1000)}")
        times.append(time.perf_counter() - t)
    med = statistics.median(times) * 1000
    kb.close()
    assert med < 10.0
    return f"{n} facts, open {open_s:.2f} s, median {med:.3f} ms"


# -- 8 ------------------------------------------------------------------------

def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def start_service(data_dir: Path, port: int) -> subprocess.Popen:
    proc = subprocess.Popen([sys.executable, "-m", "mtkb", "serve", "--port", str(port),
                             "--data-dir", str(data_dir)],
                            stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    client = ArchivistClient(f"127.0.0.1:{port}", timeout=1)
    deadline = time.time() + 15
    while True:
        try:
            client.call(op="ping")
            return proc
        except Exception:
            if proc.poll() is not None or time.time() > deadline:
                proc.kill()
                raise RuntimeError(f"service did not start: {proc.stderr.read()!r}")
            time.sleep(0.05)


def mtkb(store: Path, *args) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "mtkb", "--store", str(store), *args],
                          capture_output=True, text=True, timeout=60)


@criterion(8, "two agents share knowledge through a restarted Archivist")
def test_archivist_end_to_end(tmp_path):
    port = free_port()
    addr = f"127.0.0.1:{port}"
    svc_dir = tmp_path / "svc"
    c1, c2 = tmp_path / "agent1", tmp_path / "agent2"
    svc = start_service(svc_dir, port)
    try:
        r = mtkb(c1, "assert", "(likes User42 GreenTea)", "--mt", "UserModelMt",
                 "--agent", "agent1", "--session", "conv1")
        assert r.returncode == 0, r.stderr
        r = mtkb(c1, "--format", "jsonl", "sync", addr, "--agent", "agent1", "--session", "conv1")
        assert r.returncode == 0, r.stderr
        posted_seq = json.loads(r.stdout.splitlines()[-1])["posted"]
        export = mtkb(c1, "export", "Session-conv1", "-")
        posted_hash = hashlib.sha256(export.stdout.encode("utf-8")).hexdigest()

        # hard kill: acknowledged updates must survive without a clean shutdown
        svc.kill()
        svc.wait()
        svc = start_service(svc_dir, port)
        recs = ArchivistClient(addr).get_updates("check", 0)
        assert [r.seq for r in recs] == [posted_seq]
        assert recs[0].content_hash == posted_hash

        r = mtkb(c2, "sync", addr, "--agent", "agent2")
        assert r.returncode == 0, r.stderr
        r = mtkb(c2, "query", "(likes User42 ?drink)", "--mt", "UserModelMt")
        assert r.returncode == 0 and r.stdout.strip() == "(likes User42 GreenTea)", r

        out = tmp_path / "repo"
        r = mtkb(c2, "drain", str(out), "--endpoint", addr)
        assert r.returncode == 0, r.stderr
        manifest = [line.split("\t") for line in
                    (out / "MANIFEST.tsv").read_text().splitlines()]
        assert manifest == [["sessions/agent1/Session-conv1.krf", posted_hash,
                             str(posted_seq), str(posted_seq)]]
        on_disk = (out / manifest[0][0]).read_bytes()
        assert hashlib.sha256(on_disk).hexdigest() == posted_hash
    finally:
        svc.kill()
        svc.wait()
    return f"seq {posted_seq} survived restart; manifest hash matches"


# -- 9 ------------------------------------------------------------------------

@criterion(9, "conversation block removed from a file is forgotten on reload")
def test_meta_provenance_cascade(tmp_path):
    with_block = (
        "(in-microtheory SocialBotMt)\n"
        "(isa SocialBot Chatbot)\n"
        "(with-provenance\n"
        "  :source (MSTeamsUserFn \"<user_id>\")\n"
        "  :timestamp (UniversalTimeFn 3919440252)\n"
        "  :entity Discourse-3919440252-8397)\n"
        "(in-microtheory UserModelMt)\n"
        "(likes User42 GreenTea)\n"
        "(isa User42 Student)\n"
    )
    f = write(tmp_path / "usermodel.krf", with_block, 1_000_000)
    kb = KB()
    file_event = load_file(kb, f).event
    conv = kb.lookup("Discourse-3919440252-8397")
    assert kb.prov.event(conv).meta_event == file_event
    assert bodies(kb, "(likes User42 ?x)", "UserModelMt") == {"(likes User42 GreenTea)"}
    write(f, "(in-microtheory SocialBotMt)\n(isa SocialBot Chatbot)\n", 2_000_000)
    r = load_file(kb, f)
    assert {p.text for p in r.forgotten} == {"(likes User42 GreenTea)", "(isa User42 Student)"}
    assert bodies(kb, "(?p User42 ?x)", "UserModelMt", allow_scan=True) == set()
    assert bodies(kb, "(isa SocialBot ?x)", "SocialBotMt") == {"(isa SocialBot Chatbot)"}
    assert conv not in kb.prov
    return "2 conversation facts forgotten"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
