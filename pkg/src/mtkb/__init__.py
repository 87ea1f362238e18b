"""mtkb: a provenance-aware microtheory knowledge base."""
from .kb import KB, as_term, universal_now
from .krf import KrfDocument, KrfSyntaxError, parse_document
from .mtgraph import CycleError, MtGraph
from .provenance import ClockSkewWarning, MetaDepthError, UnknownEvent, UnknownFact
from .query import (
    ConflictingIndex, DuplicateHandler, Query, ScanRefused, SpecialHandler,
    UnsupportedPattern, intersect_buckets,
)
from .store import FactStore, MissingFact, StorageError
from .terms import (
    Compound, Integer, String, Symbol, Term, Variable, canonical_print, parse_term,
    unify, variables_of,
)

__version__ = "0.1.0"

__all__ = [
    "KB", "as_term", "universal_now",
    "KrfDocument", "KrfSyntaxError", "parse_document",
    "CycleError", "MtGraph",
    "ClockSkewWarning", "MetaDepthError", "UnknownEvent", "UnknownFact",
    "ConflictingIndex", "DuplicateHandler", "Query", "ScanRefused", "SpecialHandler",
    "UnsupportedPattern", "intersect_buckets",
    "FactStore", "MissingFact", "StorageError",
    "Compound", "Integer", "String", "Symbol", "Term", "Variable", "canonical_print",
    "parse_term", "unify", "variables_of",
]
