"""Random KB workloads and a canonical state dump for comparing stores."""
from __future__ import annotations

import random

from mtkb import KB, CycleError
from mtkb.terms import Compound, Integer, Symbol, Variable

PREDS = ["likes", "isa", "color", "partOf", "near"]
ENTS = [f"E{i}" for i in range(30)]
MTS = [f"Mt{i}" for i in range(8)]


def random_body(rng: random.Random, var_p: float = 0.05) -> Compound:
    def arg():
        r = rng.random()
        if r < var_p:
            return Variable(f"?v{rng.randrange(3)}")
        if r < 0.15:
            return Integer(rng.randrange(-5, 50))
        if r < 0.25:
            return Compound((Symbol("Fn"), Symbol(rng.choice(ENTS))))
        return Symbol(rng.choice(ENTS))

    return Compound((Symbol(rng.choice(PREDS)), *[arg() for _ in range(rng.randint(1, 3))]))


def run_workload(kb: KB, rng: random.Random, steps: int, mark=None) -> None:
    """Apply ``steps`` random top-level operations; ``mark()`` is called after each."""
    events: list[int] = []
    clock = max((e.timestamp for e in kb.store.events.values()), default=3_900_000_000)
    for _ in range(steps):
        clock += rng.randint(1, 100)
        r = rng.random()
        if r < 0.15 or not events:
            src = Compound((Symbol("SrcFn"), Symbol(f"S{rng.randrange(6)}")))
            e = kb.prov.begin_event(src, clock, update=rng.random() < 0.3)
            events.append(e)
            if rng.random() < 0.5:
                kb.prov.close_event(e)
                events = [x for x in events if x in kb.prov]
        elif r < 0.75:
            kb.store_fact(random_body(rng), rng.choice(MTS), event=rng.choice(events))
        elif r < 0.82:
            a, b = rng.sample(MTS, 2)
            try:
                kb.add_genl_mt(a, b, event=rng.choice(events))
            except CycleError:
                pass
        elif r < 0.92:
            e = rng.choice(events)
            if e in kb.prov:
                kb.retract_event(e)
            events = [x for x in events if x in kb.prov]
        else:
            try:
                kb.declare_index(rng.choice(PREDS), rng.randint(1, 2))
            except ValueError:
                pass
        if mark is not None:
            mark()


def dump(kb: KB) -> dict:
    """Everything observable about a store, keyed by stable ids."""
    s = kb.store
    return {
        "entities": dict(s.interner.items()),
        "facts": {f.id: (f.text, tuple(sorted(f.mts)), f.ground, f.special)
                  for f in s.facts.values()},
        "events": {e.id: (e.source.text, e.timestamp, e.event_type.text, e.meta_event, e.update)
                   for e in s.events.values()},
        "edges": s.graph.edges(),
        "mentions": list(s.mentions.keys()),
        "supports": list(s.sup_by_fact.keys()),
        "by_event": list(s.sup_by_event.keys()),
        "by_meta": list(s.sup_by_meta.keys()),
        "indexes": dict(s.indexes),
        "direct": {k: list(v) for k, v in s._direct.items()},
        "nonground": list(s.nonground),
    }


def random_kb(rng: random.Random, n_facts: int, n_mts: int, edge_p: float = 0.1,
              n_ents: int = 200, kb: KB | None = None):
    """A KB of ground facts over a random MT DAG, plus the matching naive model."""
    from oracles import NaiveKB

    kb = kb or KB()
    ref = NaiveKB()
    mts = [f"Mt{i}" for i in range(n_mts)]
    ev = kb.prov.begin_event(Compound((Symbol("GenFn"), Integer(rng.randrange(10 ** 9)))), 1)
    ref.add_event("gen", "gen")
    with kb.transaction():
        for c in range(n_mts):
            for p in range(c):
                if rng.random() < edge_p:
                    body = Compound((Symbol("genlMt"), Symbol(mts[c]), Symbol(mts[p])))
                    kb.store_fact(body, "BaseKB", event=ev)
                    ref.store(body, "BaseKB", "gen")
        for _ in range(n_facts):
            body = _ground_body(rng, n_ents)
            mt = rng.choice(mts)
            kb.store_fact(body, mt, event=ev)
            ref.store(body, mt, "gen")
    return kb, ref, mts


def _ground_body(rng, n_ents):
    def arg():
        r = rng.random()
        if r < 0.1:
            return Integer(rng.randrange(100))
        if r < 0.25:
            return Compound((Symbol(f"Fn{rng.randrange(3)}"), Symbol(f"E{rng.randrange(n_ents)}")))
        return Symbol(f"E{rng.randrange(n_ents)}")

    return Compound((Symbol(f"p{rng.randrange(10)}"), *[arg() for _ in range(rng.randint(1, 3))]))


def random_pattern(rng: random.Random, ref, n_ents: int = 200) -> Compound:
    """Generalize a stored (or fresh) body by replacing 0-3 slots with variables."""
    bodies = [b for b in ref.bodies.values() if b[0].text != "genlMt"]
    base = rng.choice(bodies) if bodies and rng.random() < 0.8 else _ground_body(rng, n_ents)
    slots = [(i, None) for i in range(1, len(base))]
    slots += [(i, j) for i in range(1, len(base)) if isinstance(base[i], Compound)
              for j in range(len(base[i]))]
    rng.shuffle(slots)
    elems = [list(e) if isinstance(e, Compound) else e for e in base]
    names = ["?x", "?y", "?z"]
    for k, (i, j) in enumerate(slots[:rng.randint(0, 3)]):
        var = Variable(rng.choice(names[:k + 1]))
        if j is None:
            elems[i] = var
        elif isinstance(elems[i], list):
            elems[i][j] = var
    if rng.random() < 0.1:
        elems[0] = Variable("?p")
    return Compound(Compound(e) if isinstance(e, list) else e for e in elems)
