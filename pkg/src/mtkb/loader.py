"""KRF ingestion: apply a parsed document to a KB under file provenance."""
from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from .kb import KB, UNIX_TO_UNIVERSAL
from .krf import (
    DEFAULT_MACROS, Assertion, InMicrotheory, IstInformation, KrfDocument, MacroForm, WithProvenance,
    parse_document, universal_time_of,
)
from .mtgraph import CycleError
from .query import UnsupportedPattern
from .terms import Compound, Integer, String, Symbol, Term

log = logging.getLogger(__name__)

DEFAULT_MT = "BaseKB"
URL_FN = Symbol("URLFn")

# head symbol -> function returning the assertions a macro form expands to
MacroExpander = Callable[[Compound], Iterable[Term]]


class LoadError(RuntimeError):
    """A load aborted after parsing; nothing it did was kept."""

    def __init__(self, path: str, line: int, column: int, cause: Exception):
        super().__init__(f"{path}:{line}:{column}: {type(cause).__name__}: {cause}")
        self.path = path
        self.line = line
        self.column = column
        self.cause = cause


@dataclass
class LoadReport:
    path: str
    event: Optional[int] = None
    asserted: int = 0
    skipped_macros: int = 0
    items: int = 0
    warnings: list[str] = field(default_factory=list)
    forgotten: list[tuple[int, int]] = field(default_factory=list)
    events: list[int] = field(default_factory=list)

    def to_json(self, kb: Optional[KB] = None) -> dict:
        forgotten = [
            {"fact": f, "mt": m,
             "text": getattr(p, "text", ""),
             "mt_text": kb.store.interner.text(m) if kb else ""}
            for p in self.forgotten for f, m in [p]
        ]
        return {"path": self.path, "event": self.event, "asserted": self.asserted,
                "skipped_macros": self.skipped_macros, "items": self.items,
                "warnings": self.warnings, "events": self.events, "forgotten": forgotten}


def file_url(path) -> Compound:
    return Compound((URL_FN, String(Path(path).resolve().as_uri())))


def file_universal_mtime(path) -> int:
    return int(os.stat(path).st_mtime) + UNIX_TO_UNIVERSAL


def load_file(kb: KB, path, *, update: bool = True, default_mt: str = DEFAULT_MT,
              dry_run: bool = False, macros: Optional[dict[str, MacroExpander]] = None,
              mtime: Optional[int] = None) -> LoadReport:
    """Load one KRF file; a previous load of the same file is superseded."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    ts = file_universal_mtime(path) if mtime is None else mtime
    doc = parse_document(text, str(path), ts, macros=_macro_heads(macros))
    if dry_run:
        return _dry_report(doc)
    return load_document(kb, doc, source=file_url(path), timestamp=ts, update=update,
                         default_mt=default_mt, macros=macros)


def load_text(kb: KB, text: str, source: Term, timestamp: int, *, path: str = "<text>",
              update: bool = True, default_mt: str = DEFAULT_MT,
              macros: Optional[dict[str, MacroExpander]] = None) -> LoadReport:
    doc = parse_document(text, path, timestamp, macros=_macro_heads(macros))
    return load_document(kb, doc, source=source, timestamp=timestamp, update=update,
                         default_mt=default_mt, macros=macros)


def load_weekly_block(kb: KB, path, **kw) -> LoadReport:
    """Load a file whose facts sit under an ``:update t`` with-provenance block.

    The block's source (e.g. a week term) is what gets superseded, so a newer
    scrape for the same week replaces the older one even though the older
    file is still around.
    """
    path = Path(path)
    doc = parse_document(path.read_text(encoding="utf-8"), str(path))
    blocks = [it for it in doc if isinstance(it, WithProvenance)]
    if not blocks or not all(b.update for b in blocks):
        raise ValueError(f"{path}: weekly blocks need with-provenance directives with :update t")
    return load_file(kb, path, **kw)


def load_directory(kb: KB, root, **kw) -> list[LoadReport]:
    return [load_file(kb, p, **kw) for p in sorted(Path(root).rglob("*.krf"))]


def _macro_heads(macros):
    return DEFAULT_MACROS | set(macros or ())


def _dry_report(doc: KrfDocument) -> LoadReport:
    report = LoadReport(doc.source_path, items=len(doc))
    for item in doc:
        if isinstance(item, (Assertion, IstInformation)):
            report.asserted += 1
        elif isinstance(item, MacroForm):
            report.skipped_macros += 1
    return report


def _arity_table(kb: KB) -> dict[str, int]:
    store = kb.store
    pred = store.lookup(Symbol("arity"))
    out = {}
    if pred is None:
        return out
    for fid in store.bucket(pred, 0):
        body = store.facts[fid].body
        if len(body) == 3 and body[0].text == "arity" and isinstance(body[2], Integer):
            out[body[1].text] = body[2].value
    return out


def load_document(kb: KB, doc: KrfDocument, *, source: Term, timestamp: int,
                  update: bool = True, default_mt: str = DEFAULT_MT,
                  macros: Optional[dict[str, MacroExpander]] = None) -> LoadReport:
    """Apply ``doc`` under an implicit file event; all-or-nothing."""
    prov = kb.prov
    report = LoadReport(doc.source_path, items=len(doc))
    saved = (prov.active_event, prov.active_meta_event)
    macros = macros or {}
    arities = _arity_table(kb)
    item = None
    try:
        with warnings.catch_warnings(record=True) as caught, kb.transaction():
            warnings.simplefilter("always")
            file_event = prov.begin_event(source, timestamp, update=update)
            report.event = file_event
            report.events.append(file_event)
            event, meta, meta_layer = file_event, None, file_event
            nested: Optional[int] = None
            current_mt: Optional[Term] = None
            warned_default = False

            def put(body: Term, mt: Term) -> None:
                name = body[0].text if isinstance(body, Compound) else None
                if name == "arity" and len(body) == 3 and isinstance(body[2], Integer):
                    arities[body[1].text] = body[2].value
                elif name in arities and len(body) - 1 != arities[name]:
                    report.warnings.append(
                        f"{doc.source_path}:{item.loc[0]}: {name} expects {arities[name]} "
                        f"arguments, got {len(body) - 1}")
                kb.store_fact(body, mt, event=event, meta_event=meta)
                report.asserted += 1

            for item in doc:
                if isinstance(item, InMicrotheory):
                    current_mt = item.mt
                elif isinstance(item, WithProvenance):
                    if nested is not None:
                        report.forgotten += prov.close_event(nested)
                    ts = universal_time_of(item.timestamp)
                    if item.meta:
                        nested = prov.begin_event(item.source, ts, entity=item.entity,
                                                  event_type=item.type, meta=True,
                                                  update=item.update)
                        event, meta, meta_layer = nested, None, nested
                    else:
                        nested = prov.begin_event(item.source, ts, entity=item.entity,
                                                  event_type=item.type, update=item.update,
                                                  meta_event=meta_layer)
                        event, meta = nested, meta_layer
                    report.events.append(nested)
                elif isinstance(item, IstInformation):
                    put(item.body, item.mt)
                elif isinstance(item, MacroForm):
                    expander = macros.get(item.head)
                    if expander is None:
                        report.skipped_macros += 1
                        report.warnings.append(
                            f"{doc.source_path}:{item.loc[0]}: no expander for macro "
                            f"{item.head}; skipped")
                        continue
                    mt = current_mt if current_mt is not None else Symbol(default_mt)
                    for body in expander(item.body):
                        put(body, mt)
                else:
                    if current_mt is None:
                        current_mt = Symbol(default_mt)
                        if not warned_default:
                            warned_default = True
                            report.warnings.append(
                                f"{doc.source_path}:{item.loc[0]}: no in-microtheory "
                                f"before first assertion; using {default_mt}")
                    put(item.body, current_mt)
            item = None
            if nested is not None:
                report.forgotten += prov.close_event(nested)
            report.forgotten += prov.close_event(file_event)
        for w in caught:
            report.warnings.append(str(w.message))
    except (CycleError, UnsupportedPattern, ValueError, KeyError) as e:
        prov.active_event, prov.active_meta_event = saved
        prov.discard_pending(report.events)
        loc = item.loc if item is not None else (0, 0)
        raise LoadError(doc.source_path, loc[0], loc[1], e) from e
    except BaseException:
        prov.active_event, prov.active_meta_event = saved
        prov.discard_pending(report.events)
        raise
    prov.active_event, prov.active_meta_event = saved
    for w in report.warnings:
        log.warning(w)
    return report
