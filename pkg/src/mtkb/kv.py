"""Ordered byte-keyed maps with range cursors, and the fixed-width key codecs."""
from __future__ import annotations

import struct
from typing import Iterator, Optional

from sortedcontainers import SortedDict

MAX_POSITION = 0xFFFF  # sentinel for argument positions past 65,534

_MENTION = struct.Struct(">QHQ")
_QUAD = struct.Struct(">QQQQ")
_U64 = struct.Struct(">Q")


def clamp_position(p: int) -> int:
    return p if p < MAX_POSITION else MAX_POSITION


def mention_key(entity: int, position: int, fact: int) -> bytes:
    return _MENTION.pack(entity, clamp_position(position), fact)


def decode_mention(key: bytes) -> tuple[int, int, int]:
    return _MENTION.unpack(key)


def quad_key(a: int, b: int, c: int, d: int) -> bytes:
    return _QUAD.pack(a, b, c, d)


def decode_quad(key: bytes) -> tuple[int, int, int, int]:
    return _QUAD.unpack(key)


def u64(n: int) -> bytes:
    return _U64.pack(n)


def prefix_end(prefix: bytes) -> Optional[bytes]:
    """Smallest key greater than every key starting with ``prefix``."""
    b = bytearray(prefix)
    while b:
        if b[-1] != 0xFF:
            b[-1] += 1
            return bytes(b)
        b.pop()
    return None


class OrderedKV:
    """A map from ``bytes`` to values, iterable in key order over ranges."""

    def __init__(self, items=None):
        self._d = SortedDict(items or ())

    def __len__(self) -> int:
        return len(self._d)

    def __contains__(self, key: bytes) -> bool:
        return key in self._d

    def get(self, key: bytes, default=None):
        return self._d.get(key, default)

    def put(self, key: bytes, value=None) -> None:
        self._d[key] = value

    def delete(self, key: bytes) -> bool:
        return self._d.pop(key, _MISSING) is not _MISSING

    def keys(self, lo: Optional[bytes] = None, hi: Optional[bytes] = None) -> Iterator[bytes]:
        """Keys in ``[lo, hi)`` in ascending order."""
        return self._d.irange(lo, hi, inclusive=(True, False))

    def items(self, lo: Optional[bytes] = None, hi: Optional[bytes] = None):
        d = self._d
        for k in d.irange(lo, hi, inclusive=(True, False)):
            yield k, d[k]

    def prefix(self, prefix: bytes) -> Iterator[bytes]:
        return self.keys(prefix, prefix_end(prefix))

    def count(self, lo: bytes, hi: Optional[bytes]) -> int:
        d = self._d
        end = len(d) if hi is None else d.bisect_left(hi)
        return max(0, end - d.bisect_left(lo))

    def cursor(self, lo: bytes, hi: Optional[bytes]) -> "Cursor":
        return Cursor(self._d, lo, hi)


_MISSING = object()


class Cursor:
    """Positioned iterator over ``[lo, hi)`` supporting forward ``seek``."""

    __slots__ = ("_d", "_keys", "_pos", "_end")

    def __init__(self, d: SortedDict, lo: bytes, hi: Optional[bytes]):
        self._d = d
        self._keys = d.keys()
        self._pos = d.bisect_left(lo)
        self._end = len(d) if hi is None else d.bisect_left(hi)

    def __len__(self) -> int:
        return max(0, self._end - self._pos)

    @property
    def at_end(self) -> bool:
        return self._pos >= self._end

    @property
    def key(self) -> bytes:
        return self._keys[self._pos]

    def advance(self) -> None:
        self._pos += 1

    def seek(self, key: bytes) -> None:
        """Move to the first key >= ``key`` (never moves backwards)."""
        if self._pos < self._end and self._keys[self._pos] < key:
            self._pos = max(self._pos, self._d.bisect_left(key))
