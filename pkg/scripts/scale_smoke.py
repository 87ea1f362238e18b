"""Build a large on-disk store, reopen it from the snapshot and time queries.

    python scripts/scale_smoke.py --store /tmp/scale --facts 100000 --mts 1000
"""
from __future__ import annotations

import argparse
import random
import shutil
import statistics
import time
from dataclasses import dataclass

from mtkb import KB, Variable
from mtkb.terms import Compound, Symbol


@dataclass
class ScaleConfig:
    store: str = "scale-store"
    facts: int = 100_000
    mts: int = 1000
    predicates: int = 50
    entities: int = 20_000
    fanin: int = 50  # each Mt specializes one of the previous `fanin` Mts
    queries: int = 1000
    seed: int = 7


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in vars(ScaleConfig()).items():
        ap.add_argument(f"--{name}", type=type(default), default=default)
    cfg = ScaleConfig(**vars(ap.parse_args()))
    rng = random.Random(cfg.seed)
    shutil.rmtree(cfg.store, ignore_errors=True)

    def atom(prefix, n):
        return Symbol(f"{prefix}{rng.randrange(n)}")

    t = time.perf_counter()
    kb = KB(cfg.store, sync=False)
    e = kb.begin_session("scale")
    with kb.transaction():
        for m in range(1, cfg.mts):
            kb.add_genl_mt(f"Mt{m}", f"Mt{rng.randrange(max(0, m - cfg.fanin), m)}", event=e)
        for _ in range(cfg.facts):
            kb.store_fact(Compound((atom("rel", cfg.predicates), atom("E", cfg.entities),
                                    atom("E", cfg.entities))), atom("Mt", cfg.mts), event=e)
    print(f"loaded {len(kb.store)} facts in {time.perf_counter() - t:.2f} s")
    t = time.perf_counter()
    kb.checkpoint()
    kb.close()
    print(f"checkpoint {time.perf_counter() - t:.2f} s")

    t = time.perf_counter()
    kb = KB(cfg.store, sync=False)
    print(f"snapshot open {time.perf_counter() - t:.2f} s")
    times, hits = [], 0
    for _ in range(cfg.queries):
        q = Compound((atom("rel", cfg.predicates), atom("E", cfg.entities), Variable("?x")))
        t = time.perf_counter()
        hits += len(kb.ask(q, atom("Mt", cfg.mts)))
        times.append(time.perf_counter() - t)
    kb.close()
    ms = sorted(x * 1000 for x in times)
    print(f"queries: median {statistics.median(ms):.3f} ms, "
          f"p99 {ms[int(len(ms) * 0.99) - 1]:.3f} ms, {hits} hits")


if __name__ == "__main__":
    main()
