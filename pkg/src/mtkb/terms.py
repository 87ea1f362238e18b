"""Symbolic terms: the value type for facts, queries and provenance sources.

Terms are immutable. Every term carries its canonical text, which doubles as
its identity: two terms are equal exactly when they print the same.
"""
from __future__ import annotations

import re
import threading
from typing import Iterable, Iterator, Optional

__all__ = [
    "Term", "Symbol", "Integer", "String", "Variable", "Compound",
    "TermSyntaxError", "parse_term", "parse_terms", "canonical_print",
    "variables_of", "unify", "substitute", "rename_apart", "is_ground",
    "Interner", "sym", "compound",
]

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

_INT_RE = re.compile(r"[-+]?[0-9]+\Z")
_BAD_ATOM_CHARS = re.compile(r'[\s()";]')


class TermSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class Term:
    __slots__ = ("_text",)

    _text: str

    def __str__(self) -> str:
        return self._text

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._text!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Term):
            return NotImplemented
        return self._text == other._text

    def __hash__(self) -> int:
        return hash(self._text)

    def __setattr__(self, name, value):
        raise AttributeError("terms are immutable")

    @property
    def text(self) -> str:
        return self._text

    @property
    def is_atom(self) -> bool:
        return not isinstance(self, Compound)


class Symbol(Term):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not name or _BAD_ATOM_CHARS.search(name) or name[0] == "?" or _INT_RE.match(name):
            raise ValueError(f"not a valid symbol name: {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_text", name)


class Integer(Term):
    __slots__ = ("value",)

    def __init__(self, value: int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"integer term needs an int, got {value!r}")
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueError(f"integer out of signed 64-bit range: {value}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_text", str(value))


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_ESCAPE_RE = re.compile(r'[\\"\n\t\r]')


class String(Term):
    __slots__ = ("value",)

    def __init__(self, value: str):
        object.__setattr__(self, "value", value)
        body = _ESCAPE_RE.sub(lambda m: _ESCAPES[m.group()], value)
        object.__setattr__(self, "_text", f'"{body}"')


class Variable(Term):
    """A logic variable. ``name`` includes the leading ``?``."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        if not name.startswith("?"):
            name = "?" + name
        if len(name) < 2 or _BAD_ATOM_CHARS.search(name):
            raise ValueError(f"not a valid variable name: {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_text", name)


class Compound(Term):
    __slots__ = ("elements", "_ground")

    def __init__(self, elements: Iterable[Term]):
        elements = tuple(elements)
        if not elements:
            raise ValueError("compound term needs at least one element")
        for e in elements:
            if not isinstance(e, Term):
                raise TypeError(f"compound element is not a term: {e!r}")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "_text", "(" + " ".join(e._text for e in elements) + ")")
        ground = all(
            e._ground if isinstance(e, Compound) else not isinstance(e, Variable)
            for e in elements
        )
        object.__setattr__(self, "_ground", ground)

    @property
    def functor(self) -> Term:
        return self.elements[0]

    @property
    def args(self) -> tuple[Term, ...]:
        return self.elements[1:]

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __iter__(self) -> Iterator[Term]:
        return iter(self.elements)


def sym(name: str) -> Symbol:
    return Symbol(name)


def compound(*elements) -> Compound:
    """Build a compound, promoting plain Python values to atoms."""
    return Compound(_coerce(e) for e in elements)


def _coerce(v) -> Term:
    if isinstance(v, Term):
        return v
    if isinstance(v, bool):
        raise TypeError("booleans are not terms")
    if isinstance(v, int):
        return Integer(v)
    if isinstance(v, str):
        if v.startswith("?"):
            return Variable(v)
        return Symbol(v)
    if isinstance(v, (tuple, list)):
        return compound(*v)
    raise TypeError(f"cannot convert {v!r} to a term")


def canonical_print(t: Term) -> str:
    return t._text


def is_ground(t: Term) -> bool:
    if isinstance(t, Compound):
        return t._ground
    return not isinstance(t, Variable)


# -- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>")
  | (?P<atom>[^\s()";]+)
    """,
    re.VERBOSE,
)
_STRING_ESC_RE = re.compile(r"\\(.)", re.DOTALL)


def _atom(tok: str, line: int, col: int) -> Term:
    if tok[0] == "?":
        if len(tok) == 1:
            raise TermSyntaxError("bare '?' is not a variable", line, col)
        return Variable(tok)
    if _INT_RE.match(tok):
        value = int(tok)
        if not INT64_MIN <= value <= INT64_MAX:
            raise TermSyntaxError(f"integer out of 64-bit range: {tok}", line, col)
        return Integer(value)
    return Symbol(tok)


def _string(tok: str, line: int, col: int) -> String:
    def unescape(m):
        c = m.group(1)
        if c not in _UNESCAPES:
            raise TermSyntaxError(f"bad string escape \\{c}", line, col)
        return _UNESCAPES[c]

    return String(_STRING_ESC_RE.sub(unescape, tok[1:-1]))


def iter_toplevel(text: str, comments: bool = True) -> Iterator[tuple[Term, int, int]]:
    """Yield ``(term, line, column)`` for each top-level term in ``text``.

    Comments are skipped only when ``comments`` is true; the bare term
    grammar has none.
    """
    stack: list[tuple[list, int, int]] = []
    line, line_start = 1, 0
    pos, n = 0, len(text)
    match = _TOKEN_RE.match
    while pos < n:
        m = match(text, pos)
        col = pos - line_start + 1
        if m is None:  # pragma: no cover - the atom class matches everything else
            raise TermSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        pos = m.end()
        if kind == "ws":
            continue
        if kind == "nl":
            line += 1
            line_start = pos
            continue
        if kind == "comment":
            if not comments:
                raise TermSyntaxError("comments are not allowed here", line, col)
            continue
        if kind == "lparen":
            stack.append(([], line, col))
            continue
        if kind == "rparen":
            if not stack:
                raise TermSyntaxError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            if not items:
                raise TermSyntaxError("empty compound '()'", l0, c0)
            term: Term = Compound(items)
            if stack:
                stack[-1][0].append(term)
            else:
                yield term, l0, c0
            continue
        if kind == "badstring":
            raise TermSyntaxError("unterminated string", line, col)
        if kind == "string":
            term = _string(tok, line, col)
        else:
            term = _atom(tok, line, col)
        if stack:
            stack[-1][0].append(term)
        else:
            yield term, line, col
    if stack:
        _, l0, c0 = stack[-1]
        raise TermSyntaxError("unbalanced '(': missing ')'", l0, c0)


def parse_terms(text: str) -> list[Term]:
    return [t for t, _, _ in iter_toplevel(text)]


def parse_term(text: str) -> Term:
    """Parse exactly one term."""
    terms = list(iter_toplevel(text, comments=False))
    if len(terms) != 1:
        raise TermSyntaxError(f"expected exactly one term, found {len(terms)}")
    return terms[0][0]


# -- variables and unification --------------------------------------------

def variables_of(t: Term) -> set[str]:
    out: set[str] = set()
    _collect_vars(t, out)
    return out


def _collect_vars(t: Term, out: set[str]) -> None:
    if isinstance(t, Variable):
        out.add(t.name)
    elif isinstance(t, Compound) and not t._ground:
        for e in t.elements:
            _collect_vars(e, out)


Bindings = dict


def _walk(t: Term, b: dict) -> Term:
    while isinstance(t, Variable) and t.name in b:
        t = b[t.name]
    return t


def _occurs(name: str, t: Term, b: dict) -> bool:
    t = _walk(t, b)
    if isinstance(t, Variable):
        return t.name == name
    if isinstance(t, Compound) and not t._ground:
        return any(_occurs(name, e, b) for e in t.elements)
    return False


def _unify(a: Term, b: Term, s: dict) -> bool:
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = _walk(x, s)
        y = _walk(y, s)
        if x is y:
            continue
        if isinstance(x, Variable):
            if isinstance(y, Variable) and x.name == y.name:
                continue
            if _occurs(x.name, y, s):
                return False
            s[x.name] = y
        elif isinstance(y, Variable):
            if _occurs(y.name, x, s):
                return False
            s[y.name] = x
        elif isinstance(x, Compound):
            if not isinstance(y, Compound) or len(x.elements) != len(y.elements):
                return False
            if x._ground and y._ground:
                if x._text != y._text:
                    return False
                continue
            stack.extend(zip(x.elements, y.elements))
        elif x._text != y._text:
            return False
    return True


def unify(pattern: Term, fact_body: Term) -> Optional[dict[str, Term]]:
    """Most general unifier of two terms, or None.

    The result is idempotent: no bound variable appears in any binding's value.
    """
    s: dict[str, Term] = {}
    if not _unify(pattern, fact_body, s):
        return None
    return {name: substitute(value, s) for name, value in s.items()}


def match_ground(pattern: Term, fact: Term) -> Optional[dict[str, Term]]:
    """``unify`` specialised to a ground ``fact``: no occurs check, no substitution."""
    s: dict[str, Term] = {}
    if not isinstance(pattern, Compound) or not isinstance(fact, Compound):
        stack = [(pattern, fact)]
    elif pattern._ground:
        return s if pattern._text == fact._text else None
    elif len(pattern.elements) != len(fact.elements):
        return None
    else:
        stack = []
        for x, y in zip(pattern.elements, fact.elements):
            if isinstance(x, Variable):
                bound = s.get(x.name)
                if bound is None:
                    s[x.name] = y
                elif bound._text != y._text:
                    return None
            elif isinstance(x, Compound):
                stack.append((x, y))
            elif x._text != y._text:
                return None
    while stack:
        x, y = stack.pop()
        if isinstance(x, Variable):
            bound = s.get(x.name)
            if bound is None:
                s[x.name] = y
            elif bound._text != y._text:
                return None
        elif isinstance(x, Compound):
            if x._ground:
                if x._text != y._text:
                    return None
            elif not isinstance(y, Compound) or len(x.elements) != len(y.elements):
                return None
            else:
                stack.extend(zip(x.elements, y.elements))
        elif x._text != y._text:
            return None
    return s


def substitute(t: Term, b: dict) -> Term:
    if not b:
        return t
    if isinstance(t, Variable):
        if t.name in b:
            return substitute(b[t.name], b)
        return t
    if isinstance(t, Compound) and not t._ground:
        return Compound(substitute(e, b) for e in t.elements)
    return t


def rename_apart(t: Term, suffix: str) -> Term:
    if is_ground(t):
        return t
    names = variables_of(t)
    return substitute(t, {n: Variable(f"{n}~{suffix}") for n in names})


# -- interning -------------------------------------------------------------

class Interner:
    """Assigns stable positive ids to atoms and compound terms.

    Ids are keyed by canonical text and never reused. ``restore`` and
    ``forget`` exist for persistence replay and transaction rollback.
    """

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._texts: dict[int, str] = {}
        self._terms: dict[int, Term] = {}
        self._next = 1
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._ids)

    def intern(self, t: Term) -> tuple[int, bool]:
        """Return ``(id, created)``."""
        text = t._text
        i = self._ids.get(text)
        if i is not None:
            return i, False
        with self._lock:
            i = self._ids.get(text)
            if i is not None:
                return i, False
            i = self._next
            self._next += 1
            self._ids[text] = i
            self._texts[i] = text
            self._terms[i] = t
            return i, True

    def lookup(self, t: Term) -> Optional[int]:
        return self._ids.get(t._text)

    def lookup_text(self, text: str) -> Optional[int]:
        return self._ids.get(text)

    def term(self, i: int) -> Term:
        t = self._terms.get(i)
        if t is None:
            t = parse_term(self._texts[i])
            self._terms[i] = t
        return t

    def text(self, i: int) -> str:
        return self._texts[i]

    def __contains__(self, i: int) -> bool:
        return i in self._texts

    def restore(self, i: int, text: str) -> None:
        with self._lock:
            self._ids[text] = i
            self._texts[i] = text
            if i >= self._next:
                self._next = i + 1

    def forget(self, i: int) -> None:
        with self._lock:
            text = self._texts.pop(i)
            del self._ids[text]
            self._terms.pop(i, None)

    def items(self) -> Iterator[tuple[int, str]]:
        return iter(self._texts.items())

    @property
    def next_id(self) -> int:
        return self._next

    def reserve(self, next_id: int) -> None:
        with self._lock:
            self._next = max(self._next, next_id)
