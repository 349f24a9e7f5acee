"""Independent oracles and sweep helpers shared by the test suite.

`naive_evaluate` re-implements the satisfaction relation directly from the
quantifier definitions (explicit witness searches, no memoization, no shared
code with the package) and anchors the chain of trust: the package evaluator
is checked against it on small exhaustive spaces, the vectorized bulk oracle
is checked against the package evaluator, and the automaton pipeline is then
checked against the bulk oracle at scale.
"""

from __future__ import annotations

import itertools
import random
from functools import lru_cache

import numpy as np

from safetrace.formulas import (
    FALSE,
    TRUE,
    Always,
    And,
    Eventually,
    FalseFormula,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Prop,
    Release,
    Trace,
    TrueFormula,
    Until,
    WeakNext,
)


def naive_evaluate(f: Formula, trace: Trace, i: int = 0) -> bool:
    """Literal reading of the semantics: until/release/always/eventually via
    explicit quantification over witness positions."""
    n = len(trace)
    if isinstance(f, TrueFormula):
        return True
    if isinstance(f, FalseFormula):
        return False
    if isinstance(f, Prop):
        return f.name in trace[i]
    if isinstance(f, Not):
        return not naive_evaluate(f.operand, trace, i)
    if isinstance(f, And):
        return naive_evaluate(f.left, trace, i) and naive_evaluate(f.right, trace, i)
    if isinstance(f, Or):
        return naive_evaluate(f.left, trace, i) or naive_evaluate(f.right, trace, i)
    if isinstance(f, Implies):
        return (not naive_evaluate(f.left, trace, i)) or naive_evaluate(f.right, trace, i)
    if isinstance(f, Next):
        return i + 1 < n and naive_evaluate(f.operand, trace, i + 1)
    if isinstance(f, WeakNext):
        return i + 1 >= n or naive_evaluate(f.operand, trace, i + 1)
    if isinstance(f, Until):
        return any(
            naive_evaluate(f.right, trace, j)
            and all(naive_evaluate(f.left, trace, k) for k in range(i, j))
            for j in range(i, n)
        )
    if isinstance(f, Release):
        # Dual of until by definition.
        return not naive_evaluate(Until(Not(f.left), Not(f.right)), trace, i)
    if isinstance(f, Always):
        return all(naive_evaluate(f.operand, trace, j) for j in range(i, n))
    if isinstance(f, Eventually):
        return any(naive_evaluate(f.operand, trace, j) for j in range(i, n))
    raise TypeError(f"not a formula: {f!r}")


def all_traces(props: list[str], length: int):
    """Every trace of exactly `length` over the closed proposition set."""
    valuations = [
        frozenset(p for p, keep in zip(props, bits) if keep)
        for bits in itertools.product([False, True], repeat=len(props))
    ]
    for combo in itertools.product(valuations, repeat=length):
        yield Trace(combo)


@lru_cache(maxsize=None)
def _symbol_grid(num_props: int, length: int) -> tuple:
    """Per-position symbol indices across all V**length traces; trace j has
    symbol (j // V**(length-1-t)) % V at position t."""
    width = 1 << num_props
    count = width**length
    trace_ids = np.arange(count)
    return tuple(
        (trace_ids // width ** (length - 1 - t)) % width for t in range(length)
    )


def bulk_evaluate(f: Formula, props: list[str], length: int) -> np.ndarray:
    """Initial-position truth of `f` on every trace of exactly `length` over
    `props` (bit i of a symbol = props[i]), as a bool vector indexed like
    `_symbol_grid`. Vectorized backward pass over positions."""
    grid = _symbol_grid(len(props), length)
    count = len(grid[0]) if length else 1
    bit_of = {p: i for i, p in enumerate(props)}
    memo: dict[int, list[np.ndarray]] = {}

    def columns(node: Formula) -> list[np.ndarray]:
        cached = memo.get(id(node))
        if cached is not None:
            return cached
        if isinstance(node, TrueFormula):
            result = [np.ones(count, dtype=bool)] * length
        elif isinstance(node, FalseFormula):
            result = [np.zeros(count, dtype=bool)] * length
        elif isinstance(node, Prop):
            bit = bit_of[node.name]
            result = [(grid[t] >> bit & 1).astype(bool) for t in range(length)]
        elif isinstance(node, Not):
            result = [~c for c in columns(node.operand)]
        elif isinstance(node, And):
            result = [a & b for a, b in zip(columns(node.left), columns(node.right))]
        elif isinstance(node, Or):
            result = [a | b for a, b in zip(columns(node.left), columns(node.right))]
        elif isinstance(node, Implies):
            result = [~a | b for a, b in zip(columns(node.left), columns(node.right))]
        elif isinstance(node, Next):
            inner = columns(node.operand)
            result = [inner[t + 1] if t + 1 < length else np.zeros(count, dtype=bool) for t in range(length)]
        elif isinstance(node, WeakNext):
            inner = columns(node.operand)
            result = [inner[t + 1] if t + 1 < length else np.ones(count, dtype=bool) for t in range(length)]
        elif isinstance(node, (Until, Release)):
            left, right = columns(node.left), columns(node.right)
            result = [None] * length
            result[length - 1] = right[length - 1]
            for t in range(length - 2, -1, -1):
                if isinstance(node, Until):
                    result[t] = right[t] | (left[t] & result[t + 1])
                else:
                    result[t] = right[t] & (left[t] | result[t + 1])
        elif isinstance(node, (Always, Eventually)):
            inner = columns(node.operand)
            result = [None] * length
            result[length - 1] = inner[length - 1]
            for t in range(length - 2, -1, -1):
                if isinstance(node, Always):
                    result[t] = inner[t] & result[t + 1]
                else:
                    result[t] = inner[t] | result[t + 1]
        else:
            raise TypeError(f"not a formula: {node!r}")
        memo[id(node)] = result
        return result

    return columns(f)[0]


def bulk_accept(dfa, length: int) -> np.ndarray:
    """DFA acceptance on every trace of exactly `length`, indexed like
    `bulk_evaluate(..., list(dfa.props), length)`."""
    grid = _symbol_grid(len(dfa.props), length)
    transitions = np.asarray(dfa.transitions)
    count = len(grid[0]) if length else 1
    state = np.full(count, dfa.initial)
    for t in range(length):
        state = transitions[state, grid[t]]
    accepting = np.zeros(dfa.num_states, dtype=bool)
    for s in dfa.accepting:
        accepting[s] = True
    return accepting[state]


def agree_on_all_traces(formula: Formula, dfa, max_length: int) -> bool:
    """Exhaustive DFA-vs-oracle agreement over every trace up to max_length."""
    props = list(dfa.props)
    for length in range(1, max_length + 1):
        if not np.array_equal(bulk_evaluate(formula, props, length), bulk_accept(dfa, length)):
            return False
    return True


_LEAF_PROPS = ("a", "b", "c", "d")


def random_formula(rng: random.Random, max_depth: int, props=_LEAF_PROPS) -> Formula:
    """Structural fuzzer over the full operator set."""
    if max_depth == 0 or rng.random() < 0.18:
        roll = rng.random()
        if roll < 0.08:
            return TRUE
        if roll < 0.16:
            return FALSE
        return Prop(rng.choice(props))
    kind = rng.randrange(10)
    if kind == 0:
        return Not(random_formula(rng, max_depth - 1, props))
    if kind == 1:
        return Next(random_formula(rng, max_depth - 1, props))
    if kind == 2:
        return WeakNext(random_formula(rng, max_depth - 1, props))
    if kind == 3:
        return Always(random_formula(rng, max_depth - 1, props))
    if kind == 4:
        return Eventually(random_formula(rng, max_depth - 1, props))
    binary = (And, Or, Implies, Until, Release)[kind - 5]
    return binary(
        random_formula(rng, max_depth - 1, props),
        random_formula(rng, max_depth - 1, props),
    )


def random_trace(rng: random.Random, props, length: int) -> Trace:
    return Trace(
        [frozenset(p for p in props if rng.random() < 0.4) for _ in range(length)]
    )
