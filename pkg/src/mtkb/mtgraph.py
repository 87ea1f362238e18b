"""Microtheory inheritance graph built from ``genlMt`` edges."""
from __future__ import annotations

import threading
from collections import defaultdict


class CycleError(ValueError):
    def __init__(self, child: int, parent: int, message: str = ""):
        super().__init__(message or f"genlMt edge {child} -> {parent} would create a cycle")
        self.child = child
        self.parent = parent


class MissingEdge(KeyError):
    pass


class MtGraph:
    """Acyclic child -> parent graph with memoized ancestor sets.

    ``visible_mts(m)`` is the reflexive-transitive closure over parents.
    Mutations swap in fresh memo entries under a lock, so a reader sees the
    closure from before or after an edge change, never a partial update.
    """

    def __init__(self):
        self._parents: dict[int, set[int]] = defaultdict(set)
        self._children: dict[int, set[int]] = defaultdict(set)
        self._nodes: set[int] = set()
        self._closure: dict[int, frozenset[int]] = {}
        self._lock = threading.RLock()

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self._nodes)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((c, p) for c, ps in self._parents.items() for p in ps)

    def add_node(self, mt: int) -> None:
        self._nodes.add(mt)

    def has_edge(self, child: int, parent: int) -> bool:
        return parent in self._parents.get(child, ())

    def parents(self, mt: int) -> frozenset[int]:
        return frozenset(self._parents.get(mt, ()))

    def children(self, mt: int) -> frozenset[int]:
        return frozenset(self._children.get(mt, ()))

    def would_cycle(self, child: int, parent: int) -> bool:
        return child == parent or child in self.visible_mts(parent)

    def add_genl_mt(self, child: int, parent: int) -> None:
        with self._lock:
            if self.has_edge(child, parent):
                return
            if self.would_cycle(child, parent):
                raise CycleError(child, parent)
            self._nodes.update((child, parent))
            self._parents[child].add(parent)
            self._children[parent].add(child)
            self._invalidate(child)

    def remove_genl_mt(self, child: int, parent: int) -> None:
        with self._lock:
            if not self.has_edge(child, parent):
                raise MissingEdge((child, parent))
            self._parents[child].discard(parent)
            self._children[parent].discard(child)
            self._invalidate(child)

    def _invalidate(self, mt: int) -> None:
        stack, seen = [mt], set()
        while stack:
            m = stack.pop()
            if m in seen:
                continue
            seen.add(m)
            self._closure.pop(m, None)
            stack.extend(self._children.get(m, ()))

    def visible_mts(self, context: int) -> frozenset[int]:
        cached = self._closure.get(context)
        if cached is not None:
            return cached
        with self._lock:
            self._nodes.add(context)
            result = self._compute(context)
            self._closure[context] = result
            return result

    def _compute(self, mt: int) -> frozenset[int]:
        out, stack = set(), [mt]
        while stack:
            m = stack.pop()
            if m in out:
                continue
            done = self._closure.get(m)
            if done is not None and m != mt:
                out |= done
                continue
            out.add(m)
            stack.extend(self._parents.get(m, ()))
        return frozenset(out)

    def descendants(self, mt: int) -> set[int]:
        """Every microtheory that can see ``mt`` (including itself)."""
        out, stack = set(), [mt]
        while stack:
            m = stack.pop()
            if m not in out:
                out.add(m)
                stack.extend(self._children.get(m, ()))
        return out
