"""Compare indexed lookup against the mentions path on a synthetic lexicon.

    python scripts/bench_index.py --facts 100000 --queries 10000
"""
from __future__ import annotations

import argparse
import random
import time
from dataclasses import dataclass

from mtkb import KB, Variable
from mtkb.terms import Compound, String, Symbol


@dataclass
class BenchConfig:
    facts: int = 100_000
    queries: int = 10_000
    repeats: int = 3
    seed: int = 0


def build(cfg: BenchConfig) -> KB:
    kb = KB()
    e = kb.begin_session("lexicon")
    pred, pos = Symbol("wordSense"), [Symbol("Noun"), Symbol("Verb"), Symbol("Adjective")]
    with kb.transaction():
        for i in range(cfg.facts):
            kb.store_fact(Compound((pred, String(f"word{i // 2}"), Symbol(f"Sense{i % 5000}"),
                                    pos[i % 3])), "LexiconMt", event=e)
    kb.declare_index(pred, 1)
    return kb


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in vars(BenchConfig()).items():
        ap.add_argument(f"--{name}", type=type(default), default=default)
    cfg = BenchConfig(**vars(ap.parse_args()))
    t = time.perf_counter()
    kb = build(cfg)
    print(f"built {len(kb.store)} facts in {time.perf_counter() - t:.2f} s")
    rng = random.Random(cfg.seed)
    pred = Symbol("wordSense")
    queries = [Compound((pred, String(f"word{rng.randrange(max(1, cfg.facts // 2))}"),
                         Variable("?sense"), Variable("?pos"))) for _ in range(cfg.queries)]
    timings = {}
    for use_index in (False, True):
        best = float("inf")
        for _ in range(cfg.repeats):
            t = time.perf_counter()
            for q in queries:
                kb.ask(q, "LexiconMt", use_index=use_index)
            best = min(best, time.perf_counter() - t)
        timings[use_index] = best
    mismatches = sum(kb.ask(q, "LexiconMt") != kb.ask(q, "LexiconMt", use_index=False)
                     for q in queries[:1000])
    print(f"mentions path: {timings[False]:.3f} s")
    print(f"index path:    {timings[True]:.3f} s")
    print(f"speedup:       {timings[False] / timings[True]:.1f}x, {mismatches} mismatches")


if __name__ == "__main__":
    main()
