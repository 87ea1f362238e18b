"""KRF file parsing.

A KRF document is a sequence of top-level s-expressions: directives
(``in-microtheory``, ``with-provenance``), ``ist-Information`` wrappers,
registered macro forms, and plain assertions. Parsing never touches a KB.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .terms import (
    Compound, Integer, Symbol, Term, TermSyntaxError, iter_toplevel,
)

IN_MICROTHEORY = "in-microtheory"
WITH_PROVENANCE = "with-provenance"
IST_INFORMATION = "ist-Information"
DEFAULT_MACROS = frozenset({"defPlan"})

_PROVENANCE_KEYS = (":source", ":timestamp", ":entity", ":type", ":meta", ":update")
_TRUE = {"t", "true"}
_FALSE = {"nil", "false"}

Location = tuple[int, int]


class KrfSyntaxError(ValueError):
    def __init__(self, line: int, column: int, message: str, path: str = ""):
        where = f"{path}:" if path else ""
        super().__init__(f"{where}{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.path = path


class MalformedDirective(ValueError):
    pass


@dataclass(frozen=True)
class InMicrotheory:
    mt: Term
    loc: Location = field(default=(0, 0), compare=False)

    def to_term(self) -> Compound:
        return Compound((Symbol(IN_MICROTHEORY), self.mt))


@dataclass(frozen=True)
class WithProvenance:
    source: Term
    timestamp: Term
    entity: Optional[Term] = None
    type: Optional[Term] = None
    meta: bool = False
    update: bool = False
    loc: Location = field(default=(0, 0), compare=False)

    def to_term(self) -> Compound:
        parts: list[Term] = [
            Symbol(WITH_PROVENANCE),
            Symbol(":source"), self.source,
            Symbol(":timestamp"), self.timestamp,
        ]
        if self.entity is not None:
            parts += [Symbol(":entity"), self.entity]
        if self.type is not None:
            parts += [Symbol(":type"), self.type]
        if self.meta:
            parts += [Symbol(":meta"), Symbol("t")]
        if self.update:
            parts += [Symbol(":update"), Symbol("t")]
        return Compound(parts)


@dataclass(frozen=True)
class Assertion:
    body: Term
    loc: Location = field(default=(0, 0), compare=False)

    def to_term(self) -> Term:
        return self.body


@dataclass(frozen=True)
class IstInformation:
    mt: Term
    body: Term
    loc: Location = field(default=(0, 0), compare=False)

    def to_term(self) -> Compound:
        return Compound((Symbol(IST_INFORMATION), self.mt, self.body))


@dataclass(frozen=True)
class MacroForm:
    head: str
    body: Term
    loc: Location = field(default=(0, 0), compare=False)

    def to_term(self) -> Term:
        return self.body


KrfItem = Union[InMicrotheory, WithProvenance, Assertion, IstInformation, MacroForm]


@dataclass(frozen=True)
class KrfDocument:
    items: tuple
    source_path: str = ""
    file_mtime: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def _flag(value: Term, key: str) -> bool:
    if isinstance(value, Symbol):
        if value.name in _TRUE:
            return True
        if value.name in _FALSE:
            return False
    raise MalformedDirective(f"{key} expects t/nil or true/false, got {value}")


def _with_provenance(args: tuple) -> dict:
    if len(args) % 2:
        raise MalformedDirective("with-provenance takes keyword/value pairs")
    seen: dict[str, Term] = {}
    for key, value in zip(args[::2], args[1::2]):
        name = key.name if isinstance(key, Symbol) else str(key)
        if name not in _PROVENANCE_KEYS:
            raise MalformedDirective(f"unknown with-provenance keyword {name}")
        if name in seen:
            raise MalformedDirective(f"duplicate with-provenance keyword {name}")
        seen[name] = value
    for required in (":source", ":timestamp"):
        if required not in seen:
            raise MalformedDirective(f"with-provenance requires {required}")
    universal_time_of(seen[":timestamp"])
    return dict(
        source=seen[":source"],
        timestamp=seen[":timestamp"],
        entity=seen.get(":entity"),
        type=seen.get(":type"),
        meta=_flag(seen[":meta"], ":meta") if ":meta" in seen else False,
        update=_flag(seen[":update"], ":update") if ":update" in seen else False,
    )


def classify_assertion(t: Term, macros: Iterable[str] = DEFAULT_MACROS,
                       loc: Location = (0, 0)) -> KrfItem:
    """Classify one top-level form by its head symbol."""
    if not isinstance(t, Compound):
        raise MalformedDirective(f"top-level form must be a compound, got {t}")
    head = t.functor
    name = head.name if isinstance(head, Symbol) else None
    if name == IN_MICROTHEORY:
        if len(t.args) != 1:
            raise MalformedDirective("in-microtheory takes exactly one microtheory")
        return InMicrotheory(t.args[0], loc)
    if name == WITH_PROVENANCE:
        return WithProvenance(**_with_provenance(t.args), loc=loc)
    if name == IST_INFORMATION and len(t.args) == 2:
        return IstInformation(t.args[0], t.args[1], loc)
    if name is not None and name in macros:
        return MacroForm(name, t, loc)
    return Assertion(t, loc)


def parse_document(text: str, source_path: str = "", file_mtime: int = 0,
                   macros: Iterable[str] = DEFAULT_MACROS) -> KrfDocument:
    macros = frozenset(macros)
    items = []
    try:
        for term, line, col in iter_toplevel(text):
            try:
                items.append(classify_assertion(term, macros, (line, col)))
            except MalformedDirective as e:
                raise KrfSyntaxError(line, col, str(e), source_path) from None
    except TermSyntaxError as e:
        raise KrfSyntaxError(e.line, e.column, e.message, source_path) from None
    return KrfDocument(tuple(items), source_path, file_mtime)


def print_document(doc: KrfDocument | Iterable[KrfItem]) -> str:
    """Canonical text of a document; one item per line. Comments are not kept."""
    items = doc.items if isinstance(doc, KrfDocument) else doc
    return "".join(item.to_term().text + "\n" for item in items)


UNIVERSAL_TIME_FN = "UniversalTimeFn"


def universal_time_of(t: Term) -> int:
    """Read a timestamp term: a bare integer or ``(UniversalTimeFn n)``."""
    if isinstance(t, Integer):
        return t.value
    if (isinstance(t, Compound) and len(t) == 2 and isinstance(t[0], Symbol)
            and t[0].name == UNIVERSAL_TIME_FN and isinstance(t[1], Integer)):
        return t[1].value
    raise MalformedDirective(f"timestamp must be an integer or (UniversalTimeFn n), got {t}")
