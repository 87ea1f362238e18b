"""The knowledge base facade: store, provenance cache and query engine wired together."""
from __future__ import annotations

import functools
import io
import time
from typing import Iterable, Optional, Union

from .provenance import ProvenanceCache
from .query import GenlMtHandler, ProvenanceHandler, Query, QueryEngine, SpecialHandler
from .store import FactStore, Fact, MissingFact, StorageError
from .terms import Compound, String, Symbol, Term, parse_term

TermLike = Union[Term, str]

UNIX_TO_UNIVERSAL = 2208988800  # seconds from 1900-01-01 to 1970-01-01


def universal_now() -> int:
    return int(time.time()) + UNIX_TO_UNIVERSAL


def as_term(x: TermLike) -> Term:
    """Parse strings as term text, except bare names which become symbols."""
    if isinstance(x, Term):
        return x
    if isinstance(x, str):
        return _parse_cached(x)
    raise TypeError(f"expected a term or term text, got {x!r}")


@functools.lru_cache(maxsize=4096)
def _parse_cached(text: str) -> Term:
    return parse_term(text)


class NoActiveEvent(StorageError):
    pass


class KB:
    """A provenance-aware contextual fact store.

    Every stored fact is tagged with a provenance event: the one passed in,
    else the active event of the provenance cache.
    """

    def __init__(self, path=None, *, sync: bool = True, allow_scan: bool = False,
                 handlers: Iterable[SpecialHandler] = ()):
        handlers = [GenlMtHandler(), ProvenanceHandler(), *handlers]
        self.store = FactStore(path, sync=sync, special_preds={h.predicate for h in handlers})
        self.prov = ProvenanceCache(self.store)
        self.engine = QueryEngine(self, allow_scan=allow_scan)
        for h in handlers:
            self.engine.register_special(h)
        self.store.forget_hooks.append(self._on_forget)

    def close(self) -> None:
        self.store.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def checkpoint(self) -> None:
        self.store.checkpoint()

    def transaction(self):
        return self.store.transaction()

    # -- entities -----------------------------------------------------------

    def intern(self, t: TermLike) -> int:
        return self.store.intern(as_term(t))

    def lookup(self, t: TermLike) -> Optional[int]:
        return self.store.lookup(as_term(t))

    def term(self, entity: int) -> Term:
        return self.store.term_of(entity)

    # -- microtheories --------------------------------------------------------

    def visible_mts(self, context: TermLike) -> set[Term]:
        mt = self.intern(context)
        return {self.term(m) for m in self.store.graph.visible_mts(mt)}

    def add_genl_mt(self, child: TermLike, parent: TermLike, event: Optional[int] = None,
                    mt: TermLike = "BaseKB") -> int:
        return self.store_fact(Compound((Symbol("genlMt"), as_term(child), as_term(parent))),
                               mt, event=event)

    # -- storing ------------------------------------------------------------------

    def begin_session(self, agent: str, name: Optional[str] = None) -> int:
        """Open a session event for facts the agent stores programmatically."""
        now = universal_now()
        entity = Symbol(f"Session-{name}") if name else None
        return self.prov.begin_event(Compound((Symbol("CompanionSessionFn"), String(agent))),
                                     now, entity=entity)

    def store_fact(self, body: TermLike, mt: TermLike, event: Optional[int] = None,
                   meta_event: Optional[int] = None) -> int:
        body = as_term(body)
        if not isinstance(body, Compound):
            raise TypeError(f"facts must be compound terms, got {body}")
        if event is None:
            event = self.prov.active_event
            if meta_event is None:
                meta_event = self.prov.active_meta_event
        if event is None:
            raise NoActiveEvent("no active provenance event; begin one first")
        self.prov.event(event)
        handler = self.engine.handler_for(body)
        store = self.store
        with store.transaction():
            mt_id = store.intern(as_term(mt))
            if handler is not None:
                handler.check_store(self, body)
            fid, added = store.store_fact(body, mt_id)
            if handler is not None and added:
                handler.on_store(self, fid, body)
            self.prov.support(fid, mt_id, event, meta_event)
        return fid

    def _on_forget(self, fact: Fact) -> None:
        if fact.special:
            handler = self.engine.handlers.get(fact.body[0].text)
            if handler is not None:
                handler.on_forget(self, fact.id, fact.body)

    def forget_fact_in_mt(self, fact_id: int, mt: TermLike) -> bool:
        mt_id = self.lookup(mt)
        if mt_id is None:
            raise MissingFact((fact_id, mt))
        return self.store.forget_fact_in_mt(fact_id, mt_id)

    def retract_event(self, event: int) -> list[tuple[int, int]]:
        return self.prov.retract_event(event)

    # -- retrieval ------------------------------------------------------------------

    def ask(self, pattern: Union[TermLike, Query], context: TermLike = "BaseKB", *,
            allow_scan: Optional[bool] = None, use_index: bool = True):
        if isinstance(pattern, Query):
            pattern, context = pattern.pattern, pattern.context
        return self.engine.ask(as_term(pattern), as_term(context),
                               allow_scan=allow_scan, use_index=use_index)

    def ask_bodies(self, pattern, context: TermLike = "BaseKB", **kw) -> list[Term]:
        return [body for body, _ in self.ask(pattern, context, **kw)]

    def fact_id(self, body: TermLike) -> Optional[int]:
        return self.store.fact_id(as_term(body))

    def fact(self, fact_id: int) -> Fact:
        return self.store.fact(fact_id)

    def events_for(self, body: TermLike, mt: TermLike):
        fid, mt_id = self.fact_id(body), self.lookup(mt)
        if fid is None or mt_id is None:
            return []
        return self.prov.events_for(fid, mt_id)

    def declare_index(self, predicate: TermLike, key_position: int) -> None:
        self.engine.declare_index(as_term(predicate), key_position)

    def register_special(self, handler: SpecialHandler) -> None:
        self.engine.register_special(handler)

    def export_event(self, event: int, out=None) -> str:
        buf = io.StringIO() if out is None else out
        self.prov.export_event(event, buf)
        return buf.getvalue() if out is None else ""
