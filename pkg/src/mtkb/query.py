"""Contextualized unification queries over the mentions index."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Optional

from .mtgraph import CycleError
from .terms import (
    Compound, Symbol, Term, is_ground, match_ground, rename_apart, unify, variables_of,
)

if TYPE_CHECKING:
    from .kb import KB


class ScanRefused(RuntimeError):
    pass


class UnsupportedPattern(ValueError):
    pass


class ConflictingIndex(ValueError):
    pass


class DuplicateHandler(ValueError):
    pass


@dataclass(frozen=True)
class Query:
    pattern: Compound
    context: Term


@dataclass(frozen=True)
class IndexDecl:
    predicate: int
    key_position: int


class SpecialHandler:
    """Custom storage and retrieval for one predicate.

    Facts of a special predicate live in the fact table (so provenance can
    track them) but never enter the mentions index; queries go to
    ``retrieve``. ``required_ground`` lists argument positions a query must
    bind.
    """

    predicate: str = ""
    required_ground: tuple[int, ...] = ()

    def check_store(self, kb: "KB", body: Compound) -> None:
        pass

    def on_store(self, kb: "KB", fact_id: int, body: Compound) -> None:
        pass

    def on_forget(self, kb: "KB", fact_id: int, body: Compound) -> None:
        pass

    def retrieve(self, kb: "KB", pattern: Compound, context: int) -> Iterable[tuple[Term, dict]]:
        raise NotImplementedError


class GenlMtHandler(SpecialHandler):
    """``(genlMt child parent)`` facts become edges of the microtheory graph.

    Edges are global: the microtheory a genlMt fact is stored in does not
    limit where the edge applies.
    """

    predicate = "genlMt"

    def check_store(self, kb, body):
        if len(body) != 3 or not is_ground(body):
            raise UnsupportedPattern(f"genlMt takes two ground microtheories: {body}")
        child, parent = kb.store.lookup(body[1]), kb.store.lookup(body[2])
        if child is not None and parent is not None and not kb.store.graph.has_edge(child, parent):
            if kb.store.graph.would_cycle(child, parent):
                raise CycleError(child, parent, f"{body} would create a microtheory cycle")

    def on_store(self, kb, fact_id, body):
        kb.store.add_edge(kb.store.intern(body[1]), kb.store.intern(body[2]))

    def on_forget(self, kb, fact_id, body):
        child, parent = kb.store.lookup(body[1]), kb.store.lookup(body[2])
        if kb.store.graph.has_edge(child, parent):
            kb.store.remove_edge(child, parent)

    def retrieve(self, kb, pattern, context):
        store = kb.store
        if len(pattern) != 3:
            return []
        child = store.lookup(pattern[1]) if is_ground(pattern[1]) else None
        if is_ground(pattern[1]):
            edges = [(child, p) for p in store.graph.parents(child)] if child else []
        else:
            edges = store.graph.edges()
        out = []
        for c, p in edges:
            body = Compound((pattern[0], store.term_of(c), store.term_of(p)))
            b = unify(pattern, body)
            if b is not None:
                out.append((store.fact_id(body) or 0, body, b))
        out.sort(key=lambda r: r[0])
        return [(body, b) for _, body, b in out]


class ProvenanceHandler(SpecialHandler):
    """Read-only view of the provenance cache: ``(provenance <fact> ?event)``."""

    predicate = "provenance"
    required_ground = (1,)

    def check_store(self, kb, body):
        raise UnsupportedPattern("provenance facts are maintained by the provenance cache")

    def retrieve(self, kb, pattern, context):
        store = kb.store
        if len(pattern) != 3:
            return []
        fid = store.fact_id(pattern[1])
        if fid is None:
            return []
        visible = store.graph.visible_mts(context)
        seen: dict[int, tuple[Term, dict]] = {}
        for mt in sorted(store.facts[fid].mts & visible):
            for ev in kb.prov.events_for(fid, mt):
                if ev.id in seen:
                    continue
                body = Compound((pattern[0], pattern[1], store.term_of(ev.id)))
                b = unify(pattern, body)
                if b is not None:
                    seen[ev.id] = (body, b)
        return [seen[k] for k in sorted(seen)]


class _IterCursor:
    """Cursor over a plain ascending iterator; ``seek`` is linear."""

    __slots__ = ("_it", "value", "at_end")

    def __init__(self, iterable):
        self._it = iter(iterable)
        self.at_end = False
        self.value = None
        self.advance()

    def advance(self):
        try:
            self.value = next(self._it)
        except StopIteration:
            self.at_end = True

    def seek(self, target):
        while not self.at_end and self.value < target:
            self.advance()


def intersect_buckets(buckets) -> Iterator[int]:
    """Leapfrog intersection of strictly ascending id streams.

    Inputs may be bucket cursors (``seek``/``advance``/``value``/``at_end``),
    which seek by binary search, or plain iterables.
    """
    cursors = [b if hasattr(b, "seek") else _IterCursor(b) for b in buckets]
    if not cursors or any(c.at_end for c in cursors):
        return
    cursors.sort(key=lambda c: c.value)
    k = len(cursors)
    p = 0
    hi = cursors[-1].value
    while True:
        c = cursors[p]
        if c.value == hi:
            yield hi
            c.advance()
        else:
            c.seek(hi)
        if c.at_end:
            return
        hi = c.value
        p = (p + 1) % k


def _merge_unique(ground, nonground) -> Iterator[int]:
    if not nonground:
        return iter(ground)
    return _merge_gen(ground, nonground)


def _merge_gen(*streams) -> Iterator[int]:
    last = None
    for x in heapq.merge(*streams):
        if x != last:
            yield x
            last = x


class QueryEngine:
    def __init__(self, kb: "KB", allow_scan: bool = False):
        self.kb = kb
        self.store = kb.store
        self.allow_scan = allow_scan
        self.handlers: dict[str, SpecialHandler] = {}

    def register_special(self, handler: SpecialHandler) -> None:
        name = handler.predicate
        if name in self.handlers:
            raise DuplicateHandler(name)
        pred = self.store.lookup(Symbol(name))
        if pred is not None and pred in self.store.indexes:
            raise DuplicateHandler(f"{name} is an indexed predicate")
        self.handlers[name] = handler
        self.store.special_preds.add(name)

    def handler_for(self, body: Term) -> Optional[SpecialHandler]:
        if isinstance(body, Compound) and body[0].is_atom:
            return self.handlers.get(body[0].text)
        return None

    def declare_index(self, predicate: Term, key_position: int) -> None:
        if key_position < 1:
            raise ValueError("index key position must be >= 1")
        if predicate.text in self.handlers:
            raise ConflictingIndex(f"{predicate} is a special predicate")
        store = self.store
        with store.transaction():
            pred = store.intern(predicate)
            current = store.indexes.get(pred)
            if current == key_position:
                return
            if current is not None:
                raise ConflictingIndex(
                    f"{predicate} is already indexed on position {current}")
            store.declare_index(pred, key_position)

    def index_decls(self) -> list[IndexDecl]:
        return [IndexDecl(p, k) for p, k in sorted(self.store.indexes.items())]

    # -- retrieval ------------------------------------------------------------

    def candidates(self, pattern: Compound, allow_scan: Optional[bool] = None,
                   use_index: bool = True) -> Iterator[int]:
        """Fact ids that could unify with ``pattern`` (a superset of the answers)."""
        store = self.store
        if use_index and pattern[0].is_atom:
            pred = store.lookup(pattern[0])
            pos = store.indexes.get(pred) if pred is not None else None
            if pos is not None and pos < len(pattern) and is_ground(pattern[pos]):
                return _merge_unique(store.index_lookup(pred, pattern[pos].text),
                                     store.nonground)
        mentions = store.query_mentions(pattern)
        if mentions is None:
            ground: Iterable[int] = ()
        elif not mentions:
            if not (self.allow_scan if allow_scan is None else allow_scan):
                raise ScanRefused(
                    f"{pattern} mentions no entities; full scans need allow_scan")
            return iter(store.all_fact_ids())
        else:
            ground = intersect_buckets([store.bucket_cursor(e, p) for e, p in sorted(mentions)])
        return _merge_unique(ground, store.nonground)

    def ask(self, pattern, context=None, *, allow_scan: Optional[bool] = None,
            use_index: bool = True) -> list[tuple[Term, dict]]:
        if isinstance(pattern, Query):
            pattern, context = pattern.pattern, pattern.context
        if not isinstance(pattern, Compound):
            raise UnsupportedPattern(f"query pattern must be a compound: {pattern}")
        store = self.store
        ctx = store.lookup(context)
        handler = self.handler_for(pattern)
        if handler is not None:
            for pos in handler.required_ground:
                if pos >= len(pattern) or not is_ground(pattern[pos]):
                    raise UnsupportedPattern(
                        f"{handler.predicate} queries need argument {pos} bound: {pattern}")
            if ctx is None:
                ctx = -1
            return list(handler.retrieve(self.kb, pattern, ctx))
        with store.lock:
            ids = self.candidates(pattern, allow_scan, use_index)
            visible = store.graph.visible_mts(ctx) if ctx is not None else frozenset()
            wanted = None
            facts = store.facts
            out = []
            for fid in ids:
                fact = facts[fid]
                if fact.special or fact.mts.isdisjoint(visible):
                    continue
                body = fact.body
                if fact.ground:
                    b = match_ground(pattern, body)
                    if b is not None:
                        out.append((body, b))
                    continue
                b = unify(pattern, rename_apart(body, f"f{fid}"))
                if b is None:
                    continue
                if wanted is None:
                    wanted = variables_of(pattern)
                out.append((body, {k: v for k, v in b.items() if k in wanted}))
            return out
