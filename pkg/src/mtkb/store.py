"""Persistent fact store.

All state lives in memory and is changed only through a small vocabulary of
physical operations (``_apply``). Every operation has an inverse, which gives
transaction rollback for free, and every committed transaction is appended to
``store.log`` as one checksummed record. ``checkpoint`` folds the log into
``store.snap``.

Record framing (shared with the Archivist log)::

    u32 length | u8 tag | payload (length - 1 bytes, UTF-8) | u32 crc32(tag + payload)

Integers are big-endian. The ``T`` (transaction) payload is one canonical
s-expression per operation, separated by newlines. The ``G`` payload is
``(gen N)`` and always opens a log.
"""
from __future__ import annotations

import logging
import os
import struct
import threading
import zlib
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from sortedcontainers import SortedSet

from .kv import (
    OrderedKV, decode_mention, decode_quad, mention_key, prefix_end, quad_key, u64,
)
from .mtgraph import CycleError, MtGraph
from .terms import (
    Compound, Interner, Term, Variable, is_ground, iter_toplevel,
    parse_term,
)

log = logging.getLogger(__name__)

LOG_NAME = "store.log"
SNAP_NAME = "store.snap"
SNAP_MAGIC = b"MTKB1"


class StorageError(RuntimeError):
    pass


class MissingFact(KeyError):
    pass


# -- record framing ---------------------------------------------------------

_HEAD = struct.Struct(">IB")
_CRC = struct.Struct(">I")
MAX_RECORD = 1 << 30


def frame(tag: bytes, payload: bytes) -> bytes:
    body = tag + payload
    return _HEAD.pack(len(body), tag[0]) + payload + _CRC.pack(zlib.crc32(body))


def read_records(data: bytes) -> tuple[list[tuple[bytes, bytes]], int]:
    """Decode framed records; returns ``(records, valid_length)``.

    Decoding stops at the first truncated or corrupt record.
    """
    out = []
    pos, n = 0, len(data)
    while pos + _HEAD.size <= n:
        length, tag = _HEAD.unpack_from(data, pos)
        end = pos + _HEAD.size + length - 1 + _CRC.size
        if length < 1 or length > MAX_RECORD or end > n:
            break
        payload = data[pos + _HEAD.size: end - _CRC.size]
        (crc,) = _CRC.unpack_from(data, end - _CRC.size)
        tag_b = bytes((tag,))
        if zlib.crc32(tag_b + payload) != crc:
            break
        out.append((tag_b, payload))
        pos = end
    return out, pos


class RecordLog:
    """Append-only file of framed records."""

    def __init__(self, path: Path, sync: bool = True):
        self.path = Path(path)
        self.sync = sync
        self._fh = None

    def read_all(self) -> list[tuple[bytes, bytes]]:
        """Read every valid record, truncating a corrupt or partial tail."""
        if not self.path.exists():
            return []
        data = self.path.read_bytes()
        records, valid = read_records(data)
        if valid != len(data):
            log.warning("%s: dropping %d bytes after the last valid record",
                        self.path, len(data) - valid)
            with open(self.path, "r+b") as fh:
                fh.truncate(valid)
                fh.flush()
                os.fsync(fh.fileno())
        return records

    def _handle(self):
        if self._fh is None:
            self._fh = open(self.path, "ab")
        return self._fh

    def append(self, records: Iterable[tuple[bytes, bytes]]) -> None:
        blob = b"".join(frame(tag, payload) for tag, payload in records)
        fh = self._handle()
        start = fh.tell()
        try:
            fh.write(blob)
            fh.flush()
            if self.sync:
                os.fsync(fh.fileno())
        except OSError as e:
            try:
                fh.truncate(start)
            except OSError:
                pass
            raise StorageError(f"log append failed: {e}") from e

    def reset(self, records: Iterable[tuple[bytes, bytes]]) -> None:
        """Atomically replace the log contents."""
        self.close()
        tmp = self.path.with_name(self.path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(b"".join(frame(t, p) for t, p in records))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# -- domain records ------------------------------------------------------------

class Fact:
    __slots__ = ("id", "text", "mts", "ground", "special", "_body")

    def __init__(self, id: int, text: str, ground: bool, special: bool, body=None):
        self.id = id
        self.text = text
        self.mts: set[int] = set()
        self.ground = ground
        self.special = special
        self._body = body

    @property
    def body(self) -> Term:
        if self._body is None:
            self._body = parse_term(self.text)
        return self._body

    def __repr__(self) -> str:
        return f"Fact({self.id}, {self.text}, mts={sorted(self.mts)})"


@dataclass(frozen=True)
class ProvenanceEvent:
    id: int
    source: Term
    timestamp: int
    event_type: Term
    meta_event: Optional[int] = None
    update: bool = False

    @property
    def source_text(self) -> str:
        return self.source.text


# -- op encoding -----------------------------------------------------------------

def _op_to_text(op: tuple) -> str:
    tag = op[0]
    if tag == "ent":
        return f"(ent {op[1]} {op[2]})"
    if tag == "fact":
        return f"(fact {op[1]} {op[2]})"
    if tag == "event":
        _, i, src, ts, typ, meta, upd = op[:7]
        return f"(event {i} {src} {ts} {typ} {meta or 0} {1 if upd else 0})"
    return "(" + " ".join(str(x) for x in op[:_ARITY[tag] + 1]) + ")"


_ARITY = {"mt+": 2, "mt-": 2, "unfact": 1, "unevent": 1, "sup+": 4, "sup-": 4,
          "edge+": 2, "edge-": 2, "index": 2, "unindex": 1}


def _op_from_term(t: Compound) -> tuple:
    tag = t[0].name
    if tag in ("ent", "fact"):
        return (tag, t[1].value, t[2].text)
    if tag == "event":
        return ("event", t[1].value, t[2].text, t[3].value, t[4].text,
                t[5].value or None, bool(t[6].value))
    return (tag,) + tuple(x.value for x in t.elements[1:])


# -- the store ---------------------------------------------------------------------

class FactStore:
    """Facts, mentions, microtheory edges and provenance tables.

    ``path=None`` gives a purely in-memory store.
    """

    def __init__(self, path=None, *, sync: bool = True, special_preds: Iterable[str] = ()):
        self.path = Path(path) if path is not None else None
        self.interner = Interner()
        self.facts: dict[int, Fact] = {}
        self._by_text: dict[str, int] = {}
        self._next_fact = 1
        self.mentions = OrderedKV()
        self.nonground = SortedSet()
        self.special_preds: set[str] = set(special_preds)
        self.indexes: dict[int, int] = {}
        self._direct: dict[tuple[int, str], list[int]] = {}
        self.graph = MtGraph()
        self.events: dict[int, ProvenanceEvent] = {}
        self._events_by_source: dict[str, set[int]] = {}
        self.sup_by_fact = OrderedKV()   # (fact, mt, event, meta)
        self.sup_by_event = OrderedKV()  # (event, fact, mt, meta)
        self.sup_by_meta = OrderedKV()   # (meta, event, fact, mt), meta != 0
        self.forget_hooks: list = []
        self.lock = threading.RLock()
        self._txn: Optional[list] = None
        self._pending: list[tuple] = []
        self._gen = 1
        self._log: Optional[RecordLog] = None
        if self.path is not None:
            self._open(sync)

    # -- persistence ---------------------------------------------------------

    def _open(self, sync: bool) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        snap_gen = 0
        snap = self.path / SNAP_NAME
        if snap.exists():
            snap_gen = self._load_snapshot(snap)
        self._log = RecordLog(self.path / LOG_NAME, sync=sync)
        records = self._log.read_all()
        log_gen = 0
        if records and records[0][0] == b"G":
            log_gen = parse_term(records[0][1].decode())[1].value
        if not records or log_gen <= snap_gen:
            if records:
                log.info("log generation %d already folded into snapshot", log_gen)
            self._gen = snap_gen + 1
            self._log.reset([(b"G", f"(gen {self._gen})".encode())])
            return
        self._gen = log_gen
        for tag, payload in records[1:]:
            if tag != b"T":
                raise StorageError(f"unknown log record tag {tag!r}")
            for term, _, _ in iter_toplevel(payload.decode("utf-8"), comments=False):
                self._apply(_op_from_term(term))

    def close(self) -> None:
        if self._log is not None:
            self._log.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @contextmanager
    def transaction(self):
        """Group mutations; all of them commit or none do."""
        with self.lock:
            if self._txn is not None:
                yield
                return
            self._txn = []
            self._pending = []
            try:
                yield
                if self._pending and self._log is not None:
                    payload = "\n".join(_op_to_text(op) for op in self._pending)
                    self._log.append([(b"T", payload.encode("utf-8"))])
            except BaseException:
                undo, self._txn = self._txn, None
                for inverse in reversed(undo):
                    self._apply(inverse)
                raise
            finally:
                self._txn = None
                self._pending = []

    def _emit(self, op: tuple) -> None:
        if self._txn is None:
            with self.transaction():
                self._emit(op)
            return
        self._txn.append(self._apply(op))
        self._pending.append(op)

    def checkpoint(self) -> None:
        """Write a snapshot of the whole store and start a fresh log."""
        if self.path is None:
            return
        with self.lock:
            if self._txn is not None:
                raise StorageError("cannot checkpoint inside a transaction")
            tmp = self.path / (SNAP_NAME + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(self._snapshot_bytes())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path / SNAP_NAME)
            self._gen += 1
            self._log.reset([(b"G", f"(gen {self._gen})".encode())])

    def _snapshot_bytes(self) -> bytes:
        def lines(rows: Iterable[str]) -> bytes:
            return "".join(r + "\n" for r in rows).encode("utf-8")

        sections = [
            (b"entities", lines(f"{i}\t{t}" for i, t in self.interner.items())),
            (b"facts", lines(
                f"{f.id}\t{'s' if f.special else ('g' if f.ground else 'v')}\t"
                f"{','.join(map(str, sorted(f.mts)))}\t{f.text}"
                for f in self.facts.values())),
            (b"events", lines(
                f"{e.id}\t{e.meta_event or 0}\t{int(e.update)}\t{e.timestamp}\t"
                f"{e.source.text}\t{e.event_type.text}"
                for e in self.events.values())),
            (b"edges", lines(f"{c}\t{p}" for c, p in self.graph.edges())),
            (b"indexes", lines(f"{p}\t{k}" for p, k in self.indexes.items())),
            (b"direct", lines(
                f"{p}\t{','.join(map(str, ids))}\t{k}"
                for (p, k), ids in self._direct.items())),
            (b"mentions", b"".join(self.mentions.keys())),
            (b"supports", b"".join(self.sup_by_fact.keys())),
            (b"counters", lines([f"{self._next_fact}\t{self.interner.next_id}"])),
        ]
        body = bytearray()
        for name, data in sections:
            body += name + b" " + str(len(data)).encode() + b"\n" + data
        header = SNAP_MAGIC + f" {self._gen}\n".encode()
        blob = header + bytes(body)
        return blob + _CRC.pack(zlib.crc32(blob))

    def _load_snapshot(self, path: Path) -> int:
        data = path.read_bytes()
        if not data.startswith(SNAP_MAGIC) or len(data) < 4:
            raise StorageError(f"{path}: not an MTKB1 snapshot")
        blob, (crc,) = data[:-4], _CRC.unpack(data[-4:])
        if zlib.crc32(blob) != crc:
            raise StorageError(f"{path}: snapshot checksum mismatch")
        nl = blob.index(b"\n")
        gen = int(blob[len(SNAP_MAGIC):nl])
        pos = nl + 1
        sections = {}
        while pos < len(blob):
            nl = blob.index(b"\n", pos)
            name, size = blob[pos:nl].split(b" ")
            start = nl + 1
            sections[name.decode()] = blob[start:start + int(size)]
            pos = start + int(size)

        def rows(name):
            text = sections[name].decode("utf-8")
            return [r.split("\t") for r in text.split("\n") if r]

        for i, t in rows("entities"):
            self.interner.restore(int(i), t)
        for i, flag, mts, text in (r if len(r) == 4 else r[:3] + ["\t".join(r[3:])]
                                   for r in rows("facts")):
            fid = int(i)
            fact = Fact(fid, text, flag != "v", flag == "s")
            if mts:
                fact.mts.update(map(int, mts.split(",")))
            self.facts[fid] = fact
            self._by_text[text] = fid
            if flag == "v":
                self.nonground.add(fid)
        for i, meta, upd, ts, src, typ in rows("events"):
            ev = ProvenanceEvent(int(i), parse_term(src), int(ts), parse_term(typ),
                                 int(meta) or None, upd == "1")
            self.events[ev.id] = ev
            self._events_by_source.setdefault(src, set()).add(ev.id)
        for c, p in rows("edges"):
            self.graph.add_genl_mt(int(c), int(p))
        for p, k in rows("indexes"):
            self.indexes[int(p)] = int(k)
        for row in rows("direct"):
            p, ids, key = row[0], row[1], "\t".join(row[2:])
            self._direct[(int(p), key)] = [int(x) for x in ids.split(",")]
        m = sections["mentions"]
        self.mentions = OrderedKV(dict.fromkeys(m[i:i + 18] for i in range(0, len(m), 18)))
        s = sections["supports"]
        for off in range(0, len(s), 32):
            self._index_support(decode_quad(s[off:off + 32]))
        (counters,) = rows("counters")
        self._next_fact = int(counters[0])
        self.interner.reserve(int(counters[1]))
        for f in self.facts.values():
            for mt in f.mts:
                self.graph.add_node(mt)
        return gen

    # -- physical operations ----------------------------------------------------

    def _apply(self, op: tuple) -> tuple:
        tag = op[0]
        if tag == "ent":
            self.interner.restore(op[1], op[2])
            return ("unent", op[1])
        if tag == "unent":
            text = self.interner.text(op[1])
            self.interner.forget(op[1])
            return ("ent", op[1], text)
        if tag == "fact":
            body = op[3] if len(op) > 3 else None
            self._create_fact(op[1], op[2], body)
            return ("unfact", op[1])
        if tag == "unfact":
            fact = self._destroy_fact(op[1])
            return ("fact", fact.id, fact.text, fact._body)
        if tag == "mt+":
            self.facts[op[1]].mts.add(op[2])
            self.graph.add_node(op[2])
            return ("mt-", op[1], op[2])
        if tag == "mt-":
            self.facts[op[1]].mts.discard(op[2])
            return ("mt+", op[1], op[2])
        if tag == "event":
            _, i, src, ts, typ, meta, upd = op[:7]
            src_t = op[7] if len(op) > 7 else parse_term(src)
            typ_t = op[8] if len(op) > 8 else parse_term(typ)
            self.events[i] = ProvenanceEvent(i, src_t, ts, typ_t, meta, upd)
            self._events_by_source.setdefault(src, set()).add(i)
            return ("unevent", i)
        if tag == "unevent":
            ev = self.events.pop(op[1])
            ids = self._events_by_source[ev.source.text]
            ids.discard(ev.id)
            if not ids:
                del self._events_by_source[ev.source.text]
            return ("event", ev.id, ev.source.text, ev.timestamp, ev.event_type.text,
                    ev.meta_event, ev.update, ev.source, ev.event_type)
        if tag == "sup+":
            self._index_support(op[1:5])
            return ("sup-",) + tuple(op[1:5])
        if tag == "sup-":
            f, mt, e, m = op[1:5]
            self.sup_by_fact.delete(quad_key(f, mt, e, m))
            self.sup_by_event.delete(quad_key(e, f, mt, m))
            if m:
                self.sup_by_meta.delete(quad_key(m, e, f, mt))
            return ("sup+", f, mt, e, m)
        if tag == "edge+":
            self.graph.add_genl_mt(op[1], op[2])
            return ("edge-", op[1], op[2])
        if tag == "edge-":
            self.graph.remove_genl_mt(op[1], op[2])
            return ("edge+", op[1], op[2])
        if tag == "index":
            self.indexes[op[1]] = op[2]
            self._back_index(op[1], op[2])
            return ("unindex", op[1])
        if tag == "unindex":
            pos = self.indexes.pop(op[1])
            for key in [k for k in self._direct if k[0] == op[1]]:
                del self._direct[key]
            return ("index", op[1], pos)
        raise StorageError(f"unknown operation {tag}")

    def _index_support(self, quad) -> None:
        f, mt, e, m = quad
        self.sup_by_fact.put(quad_key(f, mt, e, m))
        self.sup_by_event.put(quad_key(e, f, mt, m))
        if m:
            self.sup_by_meta.put(quad_key(m, e, f, mt))

    def _create_fact(self, fid: int, text: str, body: Optional[Term]) -> None:
        if body is None:
            body = parse_term(text)
        pred = self.interner.lookup(body[0])
        special = body[0].text in self.special_preds
        ground = is_ground(body)
        fact = Fact(fid, text, ground, special, body)
        self.facts[fid] = fact
        self._by_text[text] = fid
        if fid >= self._next_fact:
            self._next_fact = fid + 1
        if special:
            return
        for e, p in self._mentions_of(body, create=False):
            self.mentions.put(mention_key(e, p, fid))
        if not ground:
            self.nonground.add(fid)
        if pred in self.indexes:
            self._index_fact(fact, pred, self.indexes[pred])

    def _destroy_fact(self, fid: int) -> Fact:
        fact = self.facts.pop(fid)
        del self._by_text[fact.text]
        if fact.special:
            return fact
        body = fact.body
        for e, p in self._mentions_of(body, create=False):
            self.mentions.delete(mention_key(e, p, fid))
        self.nonground.discard(fid)
        pred = self.interner.lookup(body[0])
        if pred in self.indexes and len(body) > self.indexes[pred]:
            key = (pred, body[self.indexes[pred]].text)
            ids = self._direct.get(key)
            if ids is not None and fid in ids:
                ids.remove(fid)
                if not ids:
                    del self._direct[key]
        return fact

    def _index_fact(self, fact: Fact, pred: int, pos: int) -> None:
        body = fact.body
        if len(body) <= pos or body[0].text != self.interner.text(pred):
            return
        ids = self._direct.setdefault((pred, body[pos].text), [])
        if not ids or ids[-1] < fact.id:
            ids.append(fact.id)
        elif fact.id not in ids:
            ids.append(fact.id)
            ids.sort()

    def _back_index(self, pred: int, pos: int) -> None:
        for fid in self.bucket(pred, 0):
            self._index_fact(self.facts[fid], pred, pos)

    # -- entities ---------------------------------------------------------------

    def intern(self, t: Term) -> int:
        i = self.interner.lookup(t)
        if i is not None:
            return i
        with self.lock:
            i = self.interner.lookup(t)
            if i is None:
                i = self.interner.next_id
                self._emit(("ent", i, t.text))
            return i

    def lookup(self, t: Term) -> Optional[int]:
        return self.interner.lookup(t)

    def term_of(self, entity: int) -> Term:
        return self.interner.term(entity)

    # -- mentions -------------------------------------------------------------------

    def _mentions_of(self, body: Term, create: bool) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        resolve = self.intern if create else self.interner.lookup
        for pos, el in enumerate(body.elements):
            for atom in _atoms(el):
                i = resolve(atom)
                if i is None:
                    raise KeyError(atom)
                out.add((i, pos))
        return out

    def compute_mentions(self, body: Term, create: bool = True) -> set[tuple[int, int]]:
        """Coarse-coded ``(entity, position)`` pairs for a compound body.

        Every non-variable atom inside top-level element ``k`` yields one
        mention at position ``k``. With ``create=False`` unknown atoms raise
        ``KeyError`` instead of being interned.
        """
        if not isinstance(body, Compound):
            raise TypeError(f"mentions need a compound, got {body}")
        return self._mentions_of(body, create)

    def query_mentions(self, pattern: Compound) -> Optional[set[tuple[int, int]]]:
        """Mentions of a query pattern, or None if it names an unknown entity."""
        try:
            return self._mentions_of(pattern, create=False)
        except KeyError:
            return None

    def bucket(self, entity: int, position: int) -> Iterator[int]:
        lo = mention_key(entity, position, 0)
        hi = mention_key(entity, position + 1, 0) if position < 0xFFFF else prefix_end(u64(entity))
        for k in self.mentions.keys(lo, hi):
            yield decode_mention(k)[2]

    def bucket_cursor(self, entity: int, position: int) -> "BucketCursor":
        lo = mention_key(entity, position, 0)
        hi = mention_key(entity, position + 1, 0) if position < 0xFFFF else prefix_end(u64(entity))
        return BucketCursor(self.mentions.cursor(lo, hi), lo[:10])

    def facts_mentioning(self, entity: int) -> Iterator[int]:
        ids = SortedSet()
        for k in self.mentions.prefix(u64(entity)):
            ids.add(decode_mention(k)[2])
        return iter(ids)

    def mention_keys(self) -> Iterator[bytes]:
        return self.mentions.keys()

    # -- facts --------------------------------------------------------------------

    def fact_id(self, body: Term) -> Optional[int]:
        return self._by_text.get(body.text)

    def fact(self, fid: int) -> Fact:
        try:
            return self.facts[fid]
        except KeyError:
            raise MissingFact(fid) from None

    def __len__(self) -> int:
        return len(self.facts)

    def store_fact(self, body: Term, mt: int) -> tuple[int, bool]:
        """Store ``body`` in microtheory ``mt``; returns ``(fact id, newly added to mt)``."""
        if not isinstance(body, Compound):
            raise TypeError(f"facts must be compound terms, got {body}")
        with self.transaction():
            fid = self._by_text.get(body.text)
            if fid is None:
                for el in body.elements:
                    for atom in _atoms(el):
                        self.intern(atom)
                fid = self._next_fact
                self._emit(("fact", fid, body.text, body))
            fact = self.facts[fid]
            if mt in fact.mts:
                return fid, False
            self._emit(("mt+", fid, mt))
            return fid, True

    def forget_fact_in_mt(self, fid: int, mt: int) -> bool:
        """Drop ``mt`` from the fact; returns True if the fact is now gone entirely."""
        fact = self.facts.get(fid)
        if fact is None or mt not in fact.mts:
            raise MissingFact((fid, mt))
        with self.transaction():
            for key in list(self.sup_by_fact.prefix(u64(fid) + u64(mt))):
                self._emit(("sup-",) + decode_quad(key))
            self._emit(("mt-", fid, mt))
            if not fact.mts:
                for hook in self.forget_hooks:
                    hook(fact)
                self._emit(("unfact", fid))
                return True
        return False

    def all_fact_ids(self) -> list[int]:
        return sorted(self.facts)

    # -- microtheory edges -------------------------------------------------------

    def add_edge(self, child: int, parent: int) -> None:
        if self.graph.has_edge(child, parent):
            return
        if self.graph.would_cycle(child, parent):
            raise CycleError(child, parent,
                             f"genlMt {self.term_of(child)} -> {self.term_of(parent)} would create a cycle")
        self._emit(("edge+", child, parent))

    def remove_edge(self, child: int, parent: int) -> None:
        self._emit(("edge-", child, parent))

    # -- direct index ------------------------------------------------------------

    def declare_index(self, pred: int, pos: int) -> None:
        self._emit(("index", pred, pos))

    def index_lookup(self, pred: int, key_text: str) -> list[int]:
        return self._direct.get((pred, key_text), [])

    # -- provenance tables ---------------------------------------------------------

    def put_event(self, ev: ProvenanceEvent) -> None:
        self._emit(("event", ev.id, ev.source.text, ev.timestamp, ev.event_type.text,
                    ev.meta_event, ev.update, ev.source, ev.event_type))

    def drop_event(self, event_id: int) -> None:
        self._emit(("unevent", event_id))

    def events_with_source(self, source: Term) -> set[int]:
        return set(self._events_by_source.get(source.text, ()))

    def add_support(self, fid: int, mt: int, event: int, meta: int = 0) -> None:
        if quad_key(fid, mt, event, meta) not in self.sup_by_fact:
            self._emit(("sup+", fid, mt, event, meta))

    def remove_support(self, fid: int, mt: int, event: int, meta: int = 0) -> None:
        self._emit(("sup-", fid, mt, event, meta))

    def supports_of(self, fid: int, mt: Optional[int] = None) -> list[tuple[int, int, int, int]]:
        prefix = u64(fid) if mt is None else u64(fid) + u64(mt)
        return [decode_quad(k) for k in self.sup_by_fact.prefix(prefix)]

    def supports_by_event(self, event: int) -> list[tuple[int, int, int, int]]:
        """``(fact, mt, event, meta)`` tuples recorded under ``event``."""
        out = []
        for k in self.sup_by_event.prefix(u64(event)):
            e, f, mt, m = decode_quad(k)
            out.append((f, mt, e, m))
        return out

    def supports_by_meta(self, meta: int) -> list[tuple[int, int, int, int]]:
        out = []
        for k in self.sup_by_meta.prefix(u64(meta)):
            m, e, f, mt = decode_quad(k)
            out.append((f, mt, e, m))
        return out

    def is_supported(self, fid: int, mt: int) -> bool:
        return next(iter(self.sup_by_fact.prefix(u64(fid) + u64(mt))), None) is not None


class BucketCursor:
    """Cursor over one mention bucket yielding fact ids."""

    __slots__ = ("_c", "_prefix")

    def __init__(self, cursor, prefix: bytes):
        self._c = cursor
        self._prefix = prefix

    def __len__(self) -> int:
        return len(self._c)

    @property
    def at_end(self) -> bool:
        return self._c.at_end

    @property
    def value(self) -> int:
        return int.from_bytes(self._c.key[10:], "big")

    def advance(self) -> None:
        self._c.advance()

    def seek(self, fid: int) -> None:
        self._c.seek(self._prefix + u64(fid))


def _atoms(t: Term) -> Iterator[Term]:
    if isinstance(t, Compound):
        for e in t.elements:
            yield from _atoms(e)
    elif not isinstance(t, Variable):
        yield t
