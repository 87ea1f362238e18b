"""The epistemic layer: provenance events and the fact <-> event support tables.

A contextualized fact ``(fact, mt)`` stays in the store exactly as long as at
least one support entry ``(fact, mt, event, meta)`` exists for it. Retracting
an event removes its entries, and the entries of any event reported through it
(``meta``), then forgets whatever is left unsupported.
"""
from __future__ import annotations

import logging
import uuid
import warnings
from typing import Optional, TextIO

from .krf import UNIVERSAL_TIME_FN, InMicrotheory, WithProvenance, print_document
from .store import FactStore, ProvenanceEvent
from .terms import Compound, Integer, Symbol, Term

log = logging.getLogger(__name__)

DEFAULT_EVENT_TYPE = Symbol("InformationTransferEvent")


class UnknownEvent(KeyError):
    pass


class UnknownFact(KeyError):
    pass


class MetaDepthError(ValueError):
    pass


class ClockSkewWarning(UserWarning):
    pass


class ForgottenPair(tuple):
    """``(fact id, mt id)`` that also remembers the forgotten fact's text."""

    def __new__(cls, fact: int, mt: int, text: str = ""):
        self = super().__new__(cls, (fact, mt))
        self.text = text
        return self


def universal_time_term(ts: int) -> Compound:
    return Compound((Symbol(UNIVERSAL_TIME_FN), Integer(ts)))


class ProvenanceCache:
    def __init__(self, store: FactStore):
        self.store = store
        self.active_event: Optional[int] = None
        self.active_meta_event: Optional[int] = None
        self._updates: set[int] = set()  # events whose supersession runs at close

    def event(self, event_id: int) -> ProvenanceEvent:
        try:
            return self.store.events[event_id]
        except KeyError:
            raise UnknownEvent(event_id) from None

    def __contains__(self, event_id: int) -> bool:
        return event_id in self.store.events

    def begin_event(self, source: Term, timestamp: int, entity: Optional[Term] = None,
                    event_type: Optional[Term] = None, meta: bool = False,
                    update: bool = False, meta_event: Optional[int] = None) -> int:
        """Create an event and make it the active (or active meta) event.

        With ``entity`` the event id is that term's entity id, and an existing
        event with the same entity is reused. Supersession for ``update``
        events happens in ``close_event``.
        """
        store = self.store
        if meta and meta_event is not None:
            raise MetaDepthError("a meta-provenance event cannot itself carry meta-provenance")
        if meta_event is not None:
            parent = self.event(meta_event)
            if parent.meta_event is not None:
                raise MetaDepthError(
                    f"event {meta_event} already has meta-provenance; at most two layers")
        if entity is None:
            entity = Symbol(f"ProvenanceEvent-{timestamp}-{uuid.uuid4().hex[:8]}")
        with store.transaction():
            eid = store.intern(entity)
            ev = ProvenanceEvent(eid, source, int(timestamp), event_type or DEFAULT_EVENT_TYPE,
                                 meta_event, bool(update))
            old = store.events.get(eid)
            if old != ev:
                if old is not None:
                    store.drop_event(eid)
                store.put_event(ev)
        if update:
            self._updates.add(eid)
        if meta:
            self.active_meta_event = eid
        else:
            self.active_event = eid
        return eid

    def close_event(self, event_id: int) -> list[tuple[int, int]]:
        """Finish an event; for update events, retract older events of the same source."""
        if self.active_event == event_id:
            self.active_event = None
        if self.active_meta_event == event_id:
            self.active_meta_event = None
        if event_id not in self._updates:
            return []
        self._updates.discard(event_id)
        ev = self.event(event_id)
        forgotten: list[tuple[int, int]] = []
        with self.store.transaction():
            for other in sorted(self.store.events_with_source(ev.source) - {event_id}):
                if other not in self.store.events:
                    continue  # already removed by an earlier cascade
                old = self.store.events[other]
                if old.timestamp > ev.timestamp:
                    warnings.warn(
                        f"event {event_id} for {ev.source} (t={ev.timestamp}) supersedes "
                        f"newer event {other} (t={old.timestamp})", ClockSkewWarning, stacklevel=2)
                forgotten += self.retract_event(other)
        return forgotten

    def discard_pending(self, events) -> None:
        """Forget deferred supersessions for events that were rolled back."""
        self._updates.difference_update(events)

    def support(self, fact_id: int, mt: int, event_id: int, meta_event: Optional[int] = None) -> None:
        if fact_id not in self.store.facts or mt not in self.store.facts[fact_id].mts:
            raise UnknownFact((fact_id, mt))
        ev = self.event(event_id)
        if meta_event is None:
            meta_event = ev.meta_event
        if meta_event is not None:
            if self.event(meta_event).meta_event is not None:
                raise MetaDepthError(f"meta event {meta_event} is itself meta-tagged")
        self.store.add_support(fact_id, mt, event_id, meta_event or 0)

    def retract_event(self, event_id: int) -> list[tuple[int, int]]:
        """Remove an event and every support it provides; returns forgotten ``(fact, mt)`` pairs."""
        store = self.store
        self.event(event_id)
        affected: set[tuple[int, int]] = set()
        reported: set[int] = set()
        forgotten: list[tuple[int, int]] = []
        with store.transaction():
            for f, mt, e, m in store.supports_by_meta(event_id):
                store.remove_support(f, mt, e, m)
                affected.add((f, mt))
                reported.add(e)
            for f, mt, e, m in store.supports_by_event(event_id):
                store.remove_support(f, mt, e, m)
                affected.add((f, mt))
            for f, mt in sorted(affected):
                fact = store.facts.get(f)
                if fact is not None and mt in fact.mts and not store.is_supported(f, mt):
                    store.forget_fact_in_mt(f, mt)
                    forgotten.append(ForgottenPair(f, mt, fact.text))
            store.drop_event(event_id)
            self._updates.discard(event_id)
            reported |= {e.id for e in store.events.values() if e.meta_event == event_id}
            for e in sorted(reported):
                ev = store.events.get(e)
                if ev is None:
                    continue
                if store.supports_by_event(e):
                    if ev.meta_event == event_id:
                        store.drop_event(e)
                        store.put_event(ProvenanceEvent(ev.id, ev.source, ev.timestamp,
                                                        ev.event_type, None, ev.update))
                else:
                    store.drop_event(e)
                    self._updates.discard(e)
        if self.active_event == event_id:
            self.active_event = None
        if self.active_meta_event == event_id:
            self.active_meta_event = None
        log.debug("retracted event %d: %d pairs forgotten", event_id, len(forgotten))
        return forgotten

    def events_for(self, fact_id: int, mt: int) -> list[ProvenanceEvent]:
        ids = sorted({e for _, _, e, _ in self.store.supports_of(fact_id, mt)})
        return [self.store.events[e] for e in ids if e in self.store.events]

    def pairs_for_event(self, event_id: int) -> list[tuple[int, int]]:
        """Distinct ``(fact, mt)`` pairs the event supports directly."""
        return sorted({(f, mt) for f, mt, _, _ in self.store.supports_by_event(event_id)})

    def export_event(self, event_id: int, out: TextIO) -> None:
        """Write the event's facts as a KRF file that reloads to the same pairs."""
        ev = self.event(event_id)
        store = self.store
        header = WithProvenance(
            source=ev.source,
            timestamp=universal_time_term(ev.timestamp),
            entity=store.term_of(ev.id),
            type=None if ev.event_type == DEFAULT_EVENT_TYPE else ev.event_type,
            update=ev.update,
        )
        out.write(print_document([header]))
        by_mt: dict[int, list[int]] = {}
        for f, mt in self.pairs_for_event(event_id):
            by_mt.setdefault(mt, []).append(f)
        for mt in sorted(by_mt):
            out.write(print_document([InMicrotheory(store.term_of(mt))]))
            for f in sorted(by_mt[mt]):
                out.write(store.facts[f].text + "\n")
