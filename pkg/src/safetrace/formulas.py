"""Temporal-logic formulas over finite traces: syntax, parsing, and semantics.

Formulas are immutable trees built from the Boolean connectives and the
finite-trace temporal operators: strong next, weak next, until, release,
always, eventually. The concrete syntax is plain ASCII::

    G(!(collision | badcontact))        # invariant
    grasped -> (stable U released)      # ordering obligation
    F done                              # eventual goal

Operator binding, loosest to tightest: ``<->``, ``->`` (right-associative),
``|``, ``&``, ``U``/``R`` (right-associative, same level), then the unary
operators ``!``, ``X``, ``WX``, ``G``, ``F``. ``#`` starts a comment running
to end of line. ``a <-> b`` is sugar for ``(a -> b) & (b -> a)`` and expands
during parsing; every other operator is a first-class node.

Semantics are the standard finite-trace ones. A trace is a nonempty sequence
of valuations (sets of true propositions, closed-world). Strong next is false
at the final step; weak next is true there. ``evaluate`` implements the
satisfaction relation by memoized recursion over (subformula, position) and is
the reference oracle for the automaton pipeline in :mod:`safetrace.automata`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import FormulaSyntaxError

__all__ = [
    "Formula",
    "TrueFormula",
    "FalseFormula",
    "Prop",
    "Not",
    "And",
    "Or",
    "Implies",
    "Next",
    "WeakNext",
    "Until",
    "Release",
    "Always",
    "Eventually",
    "TRUE",
    "FALSE",
    "RESERVED_WORDS",
    "is_valid_proposition",
    "Trace",
    "parse",
    "format_formula",
    "to_nnf",
    "propositions",
    "evaluate",
]

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

#: Words with a fixed meaning in the concrete syntax; not usable as propositions.
RESERVED_WORDS = frozenset({"true", "false", "U", "R", "X", "WX", "G", "F"})


def is_valid_proposition(name: str) -> bool:
    """A proposition is a letter followed by letters/digits/underscores and
    not one of the reserved syntax words."""
    return bool(IDENT_RE.match(name)) and name not in RESERVED_WORDS


@dataclass(frozen=True, slots=True)
class Formula:
    """Base class for formula nodes. Nodes are immutable and hashable."""

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True, slots=True)
class TrueFormula(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FalseFormula(Formula):
    pass


@dataclass(frozen=True, slots=True)
class Prop(Formula):
    name: str

    def __post_init__(self) -> None:
        if not is_valid_proposition(self.name):
            raise ValueError(f"invalid proposition name: {self.name!r}")


@dataclass(frozen=True, slots=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Next(Formula):
    """Strong next: requires a following step to exist."""

    operand: Formula


@dataclass(frozen=True, slots=True)
class WeakNext(Formula):
    """Weak next: vacuously true at the final step."""

    operand: Formula


@dataclass(frozen=True, slots=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Always(Formula):
    operand: Formula


@dataclass(frozen=True, slots=True)
class Eventually(Formula):
    operand: Formula


TRUE = TrueFormula()
FALSE = FalseFormula()


class Trace:
    """A nonempty, immutable sequence of valuations.

    Each step is the set of propositions that hold there; anything absent is
    false (closed world). Step ``0`` is the first observation, step ``H`` the
    last, so the length is ``H + 1``.
    """

    __slots__ = ("steps",)

    def __init__(self, steps: Iterable[Iterable[str]]):
        normalized = tuple(
            s if isinstance(s, frozenset) else frozenset(s) for s in steps
        )
        if not normalized:
            raise ValueError("trace must contain at least one step")
        object.__setattr__(self, "steps", normalized)

    def __setattr__(self, name: str, value) -> None:
        raise AttributeError("Trace is immutable")

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, index: int) -> frozenset[str]:
        return self.steps[index]

    def __iter__(self) -> Iterator[frozenset[str]]:
        return iter(self.steps)

    def __eq__(self, other) -> bool:
        return isinstance(other, Trace) and self.steps == other.steps

    def __hash__(self) -> int:
        return hash(self.steps)

    def __repr__(self) -> str:
        rendered = ", ".join("{" + ",".join(sorted(s)) + "}" for s in self.steps)
        return f"Trace([{rendered}])"

    @property
    def last_index(self) -> int:
        return len(self.steps) - 1

    def suffix(self, start: int) -> "Trace":
        """The trace from ``start`` (inclusive) to the end; must be nonempty."""
        if not 0 <= start < len(self.steps):
            raise IndexError(f"suffix start {start} out of range for length {len(self.steps)}")
        return Trace(self.steps[start:])


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_UNARY_WORDS = frozenset({"X", "WX", "G", "F"})

_Token = tuple[str, str, int, int]  # kind, text, line, column


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("<->", i):
            tokens.append(("<->", "<->", line, col))
            i += 3
            col += 3
            continue
        if text.startswith("->", i):
            tokens.append(("->", "->", line, col))
            i += 2
            col += 2
            continue
        if c in "()|&!":
            tokens.append((c, c, line, col))
            i += 1
            col += 1
            continue
        if c.isalpha():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(("word", word, line, col))
            col += j - i
            i = j
            continue
        raise FormulaSyntaxError(f"unknown operator or character {c!r}", line, col)
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], text: str):
        self.tokens = tokens
        self.pos = 0
        # End-of-input position for error reporting.
        lines = text.splitlines() or [""]
        self.eof_line = len(lines)
        self.eof_col = len(lines[-1]) + 1

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _error(self, message: str, expected: tuple[str, ...]) -> FormulaSyntaxError:
        tok = self._peek()
        if tok is None:
            return FormulaSyntaxError(message + " (end of input)", self.eof_line, self.eof_col, expected)
        return FormulaSyntaxError(f"{message}, found {tok[1]!r}", tok[2], tok[3], expected)

    def _advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse_formula(self) -> Formula:
        return self._iff()

    def _iff(self) -> Formula:
        node = self._implies()
        while (tok := self._peek()) and tok[0] == "<->":
            self._advance()
            rhs = self._implies()
            node = And(Implies(node, rhs), Implies(rhs, node))
        return node

    def _implies(self) -> Formula:
        node = self._or()
        if (tok := self._peek()) and tok[0] == "->":
            self._advance()
            return Implies(node, self._implies())
        return node

    def _or(self) -> Formula:
        node = self._and()
        while (tok := self._peek()) and tok[0] == "|":
            self._advance()
            node = Or(node, self._and())
        return node

    def _and(self) -> Formula:
        node = self._until()
        while (tok := self._peek()) and tok[0] == "&":
            self._advance()
            node = And(node, self._until())
        return node

    def _until(self) -> Formula:
        node = self._unary()
        tok = self._peek()
        if tok and tok[0] == "word" and tok[1] in ("U", "R"):
            op = self._advance()[1]
            rhs = self._until()
            return Until(node, rhs) if op == "U" else Release(node, rhs)
        return node

    def _unary(self) -> Formula:
        tok = self._peek()
        if tok is None:
            raise self._error("unexpected end of formula", ("!", "X", "WX", "G", "F", "true", "false", "identifier", "("))
        if tok[0] == "!":
            self._advance()
            return Not(self._unary())
        if tok[0] == "word" and tok[1] in _UNARY_WORDS:
            word = self._advance()[1]
            operand = self._unary()
            return {"X": Next, "WX": WeakNext, "G": Always, "F": Eventually}[word](operand)
        return self._atom()

    def _atom(self) -> Formula:
        expected = ("true", "false", "identifier", "(")
        tok = self._peek()
        if tok is None:
            raise self._error("unexpected end of formula", expected)
        if tok[0] == "(":
            self._advance()
            node = self.parse_formula()
            closing = self._peek()
            if closing is None or closing[0] != ")":
                raise self._error("unclosed parenthesis", (")",))
            self._advance()
            return node
        if tok[0] == "word":
            word = self._advance()[1]
            if word == "true":
                return TRUE
            if word == "false":
                return FALSE
            if word in RESERVED_WORDS:
                raise FormulaSyntaxError(
                    f"reserved word {word!r} cannot be used as a proposition", tok[2], tok[3], expected
                )
            return Prop(word)
        raise self._error("expected an atom", expected)


def parse(text: str) -> Formula:
    """Parse a formula from its concrete syntax.

    Raises :class:`FormulaSyntaxError` with line/column information on bad
    input, including empty input.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise FormulaSyntaxError("empty formula", 1, 1, ("formula",))
    parser = _Parser(tokens, text)
    node = parser.parse_formula()
    trailing = parser._peek()
    if trailing is not None:
        raise FormulaSyntaxError(
            f"unexpected trailing input {trailing[1]!r}", trailing[2], trailing[3], ("end of input",)
        )
    return node


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

# Binding strength; parenthesization compares child strength against these.
_PREC_IMPLIES = 2
_PREC_OR = 3
_PREC_AND = 4
_PREC_UNTIL = 5
_PREC_UNARY = 6
_PREC_ATOM = 7

_UNARY_TOKENS = {Next: "X", WeakNext: "WX", Always: "G", Eventually: "F"}


def _precedence(f: Formula) -> int:
    if isinstance(f, (TrueFormula, FalseFormula, Prop)):
        return _PREC_ATOM
    if isinstance(f, (Not, Next, WeakNext, Always, Eventually)):
        return _PREC_UNARY
    if isinstance(f, (Until, Release)):
        return _PREC_UNTIL
    if isinstance(f, And):
        return _PREC_AND
    if isinstance(f, Or):
        return _PREC_OR
    if isinstance(f, Implies):
        return _PREC_IMPLIES
    raise TypeError(f"not a formula: {f!r}")


def _render(f: Formula, min_prec: int) -> str:
    text = _render_bare(f)
    if _precedence(f) < min_prec:
        return "(" + text + ")"
    return text


def _render_bare(f: Formula) -> str:
    if isinstance(f, TrueFormula):
        return "true"
    if isinstance(f, FalseFormula):
        return "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Not):
        return "!" + _render(f.operand, _PREC_UNARY)
    if isinstance(f, (Next, WeakNext, Always, Eventually)):
        token = _UNARY_TOKENS[type(f)]
        child = _render(f.operand, _PREC_UNARY)
        sep = "" if child.startswith("(") else " "
        return token + sep + child
    if isinstance(f, Until):
        return _render(f.left, _PREC_UNTIL + 1) + " U " + _render(f.right, _PREC_UNTIL)
    if isinstance(f, Release):
        return _render(f.left, _PREC_UNTIL + 1) + " R " + _render(f.right, _PREC_UNTIL)
    if isinstance(f, And):
        return _render(f.left, _PREC_AND) + " & " + _render(f.right, _PREC_AND + 1)
    if isinstance(f, Or):
        return _render(f.left, _PREC_OR) + " | " + _render(f.right, _PREC_OR + 1)
    if isinstance(f, Implies):
        return _render(f.left, _PREC_IMPLIES + 1) + " -> " + _render(f.right, _PREC_IMPLIES)
    raise TypeError(f"not a formula: {f!r}")


def format_formula(f: Formula) -> str:
    """Render ``f`` deterministically with minimal parentheses.

    ``parse(format_formula(f))`` returns a tree structurally equal to ``f``;
    no operator is rewritten during printing.
    """
    return _render_bare(f)


# ---------------------------------------------------------------------------
# Normal form and structure
# ---------------------------------------------------------------------------


def to_nnf(f: Formula) -> Formula:
    """Negation normal form: negation only directly above propositions,
    implication eliminated, all dualities applied. Preserves the formula's
    value on every trace and position."""
    if isinstance(f, (TrueFormula, FalseFormula, Prop)):
        return f
    if isinstance(f, Not):
        return _nnf_negated(f.operand)
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Implies):
        return Or(_nnf_negated(f.left), to_nnf(f.right))
    if isinstance(f, Next):
        return Next(to_nnf(f.operand))
    if isinstance(f, WeakNext):
        return WeakNext(to_nnf(f.operand))
    if isinstance(f, Until):
        return Until(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Release):
        return Release(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Always):
        return Always(to_nnf(f.operand))
    if isinstance(f, Eventually):
        return Eventually(to_nnf(f.operand))
    raise TypeError(f"not a formula: {f!r}")


def _nnf_negated(f: Formula) -> Formula:
    """NNF of ``!f``."""
    if isinstance(f, TrueFormula):
        return FALSE
    if isinstance(f, FalseFormula):
        return TRUE
    if isinstance(f, Prop):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.operand)
    if isinstance(f, And):
        return Or(_nnf_negated(f.left), _nnf_negated(f.right))
    if isinstance(f, Or):
        return And(_nnf_negated(f.left), _nnf_negated(f.right))
    if isinstance(f, Implies):
        return And(to_nnf(f.left), _nnf_negated(f.right))
    if isinstance(f, Next):
        # At the final step strong next is false, so its negation must be weak.
        return WeakNext(_nnf_negated(f.operand))
    if isinstance(f, WeakNext):
        return Next(_nnf_negated(f.operand))
    if isinstance(f, Until):
        return Release(_nnf_negated(f.left), _nnf_negated(f.right))
    if isinstance(f, Release):
        return Until(_nnf_negated(f.left), _nnf_negated(f.right))
    if isinstance(f, Always):
        return Eventually(_nnf_negated(f.operand))
    if isinstance(f, Eventually):
        return Always(_nnf_negated(f.operand))
    raise TypeError(f"not a formula: {f!r}")


def propositions(f: Formula) -> frozenset[str]:
    """The set of proposition names occurring in ``f``."""
    found: set[str] = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Prop):
            found.add(node.name)
        elif isinstance(node, (Not, Next, WeakNext, Always, Eventually)):
            stack.append(node.operand)
        elif isinstance(node, (And, Or, Implies, Until, Release)):
            stack.append(node.left)
            stack.append(node.right)
    return frozenset(found)


# ---------------------------------------------------------------------------
# Reference semantics
# ---------------------------------------------------------------------------


def evaluate(f: Formula, trace: Trace, position: int = 0) -> bool:
    """Whether ``f`` holds at ``position`` of ``trace``.

    This is the reference satisfaction relation, computed by memoized
    recursion over (subformula, position) with no automaton involved:

    - ``X g`` holds at ``i`` iff ``i < H`` and ``g`` holds at ``i + 1``;
      ``WX g`` holds iff ``i = H`` or ``g`` holds at ``i + 1``.
    - ``a U b`` holds at ``i`` iff ``b`` holds at some ``j in [i, H]`` and
      ``a`` holds at every step in ``[i, j)``; ``R`` is its dual.
    - ``G``/``F`` quantify over all/some steps in ``[i, H]``.
    """
    n = len(trace)
    if not 0 <= position < n:
        raise IndexError(f"position {position} out of range for trace of length {n}")
    steps = trace.steps
    memo: dict[tuple[int, int], bool] = {}

    def sat(node: Formula, i: int) -> bool:
        key = (id(node), i)
        cached = memo.get(key)
        if cached is not None:
            return cached
        result = _sat(node, i)
        memo[key] = result
        return result

    def _sat(node: Formula, i: int) -> bool:
        if isinstance(node, TrueFormula):
            return True
        if isinstance(node, FalseFormula):
            return False
        if isinstance(node, Prop):
            return node.name in steps[i]
        if isinstance(node, Not):
            return not sat(node.operand, i)
        if isinstance(node, And):
            return sat(node.left, i) and sat(node.right, i)
        if isinstance(node, Or):
            return sat(node.left, i) or sat(node.right, i)
        if isinstance(node, Implies):
            return not sat(node.left, i) or sat(node.right, i)
        if isinstance(node, Next):
            return i + 1 < n and sat(node.operand, i + 1)
        if isinstance(node, WeakNext):
            return i + 1 >= n or sat(node.operand, i + 1)
        if isinstance(node, Until):
            for j in range(i, n):
                if sat(node.right, j):
                    return True
                if not sat(node.left, j):
                    return False
            return False
        if isinstance(node, Release):
            for j in range(i, n):
                if not sat(node.right, j):
                    return False
                if sat(node.left, j):
                    return True
            return True
        if isinstance(node, Always):
            return all(sat(node.operand, j) for j in range(i, n))
        if isinstance(node, Eventually):
            return any(sat(node.operand, j) for j in range(i, n))
        raise TypeError(f"not a formula: {node!r}")

    return sat(f, position)
