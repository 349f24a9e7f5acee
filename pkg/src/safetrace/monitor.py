"""Stepwise runtime monitoring of a compiled DFA over a rollout trace.

After consuming each valuation the monitor reports one of four verdicts:

- ``TRUE`` / ``FALSE``: the automaton sits in a permanence-classified state,
  so no continuation of the trace can change the outcome.
- ``PRESUMABLY_TRUE`` / ``PRESUMABLY_FALSE``: the prefix consumed so far,
  read as a complete trace, satisfies / fails the property, but a different
  continuation could still flip it.

``FALSE`` and ``TRUE`` are absorbing. A property counts as violated when a
``FALSE`` verdict occurs (a mid-trace violation) or, optionally, when the
trace ends in a rejecting state (an end-of-trace violation: an obligation
such as an unmet eventuality survived to the horizon). The per-step count of
``FALSE``/``PRESUMABLY_FALSE`` verdicts is the unsafe-step total, and its
fraction of the trace length is the unsafe-state exposure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .automata import Dfa, Permanence
from .errors import MonitorError
from .formulas import Trace

__all__ = ["Verdict", "MonitorResult", "Monitor", "run_trace", "trace_masks"]


class Verdict(Enum):
    TRUE = "T"
    FALSE = "F"
    PRESUMABLY_TRUE = "pt"
    PRESUMABLY_FALSE = "pf"


# Byte codes used for compact verdict storage; index = code.
_VERDICTS = (Verdict.TRUE, Verdict.FALSE, Verdict.PRESUMABLY_TRUE, Verdict.PRESUMABLY_FALSE)
_CODE_TRUE, _CODE_FALSE, _CODE_PT, _CODE_PF = range(4)
_UNSAFE_CODES = (_CODE_FALSE, _CODE_PF)


def _verdict_code(d: Dfa, state: int) -> int:
    label = d.permanence[state]
    if label is Permanence.PERM_TRUE:
        return _CODE_TRUE
    if label is Permanence.PERM_FALSE:
        return _CODE_FALSE
    return _CODE_PT if state in d.accepting else _CODE_PF


@dataclass(frozen=True)
class MonitorResult:
    """Outcome of monitoring one property instance over one trace.

    ``verdict_codes`` stores one byte per timestep (0=TRUE, 1=FALSE, 2=
    PRESUMABLY_TRUE, 3=PRESUMABLY_FALSE); ``verdicts`` decodes it.
    ``violated`` records whether a ``FALSE`` verdict occurred mid-trace;
    ``final_satisfied`` whether the last state was accepting. ``exposure`` is
    ``unsafe_steps / length`` as an exact fraction.
    """

    verdict_codes: bytes
    final_satisfied: bool
    violated: bool
    violation_timestep: int | None
    unsafe_steps: int
    length: int
    exposure: Fraction

    @property
    def verdicts(self) -> tuple[Verdict, ...]:
        return tuple(_VERDICTS[c] for c in self.verdict_codes)

    @property
    def violation_kind(self) -> str | None:
        """``"mid"`` when a FALSE verdict occurred, ``"end"`` when the trace
        merely ended unsatisfied, ``None`` when the property held."""
        if self.violated:
            return "mid"
        if not self.final_satisfied:
            return "end"
        return None

    def violates(self, strict_end: bool = True) -> bool:
        """Whether this counts as a violation; ``strict_end`` controls whether
        ending in a rejecting state (without an absorbing FALSE) counts."""
        if self.violated:
            return True
        return strict_end and not self.final_satisfied

    def unsafe_flags(self) -> bytes:
        """Per-step 0/1 flags marking FALSE or PRESUMABLY_FALSE verdicts."""
        return self.verdict_codes.translate(_UNSAFE_FLAG_TABLE)


_UNSAFE_FLAG_TABLE = bytes(
    1 if code in _UNSAFE_CODES else 0 for code in range(256)
)


class _Runner:
    """Precomputed tables for batch runs of one DFA.

    When the automaton has at most 256 states the transition table is
    flattened into ``bytes`` so the per-step loop is a pair of byte lookups,
    and per-step verdicts come from a single C-level ``translate``. Larger
    automata fall back to tuple indexing.
    """

    def __init__(self, d: Dfa):
        self.dfa = d
        n = d.num_states
        width = d.alphabet_size
        self.width = width
        self.initial = d.initial
        codes = [_verdict_code(d, s) for s in range(n)]
        self.codes = codes
        self.accepting = [s in d.accepting for s in range(n)]
        # A state is absorbing for monitoring purposes once its verdict can
        # no longer change.
        self.absorbing = [d.permanence[s] is not Permanence.UNDETERMINED for s in range(n)]
        self.compact = n <= 256
        if self.compact:
            self.flat = bytes(
                d.transitions[s][m] for s in range(n) for m in range(width)
            )
            self.stop = bytes(1 if self.absorbing[s] else 0 for s in range(n)) + bytes(
                256 - n
            )
            self.code_table = bytes(codes) + bytes(256 - n)
        else:
            self.flat = None

    def run_codes(self, masks: Sequence[int]) -> tuple[bytes, int]:
        """Verdict codes per step plus the final state (or an equivalent
        member of its absorbing class)."""
        n = len(masks)
        if self.compact:
            flat = self.flat
            width = self.width
            stop = self.stop
            state = self.initial
            states = bytearray(n)
            consumed = 0
            for m in masks:
                state = flat[state * width + m]
                states[consumed] = state
                consumed += 1
                if stop[state]:
                    break
            if consumed < n:
                # Absorbed: every later verdict equals this one, and
                # acceptance is uniform across the absorbing class.
                states[consumed:] = bytes((state,)) * (n - consumed)
            return bytes(states).translate(self.code_table), state
        transitions = self.dfa.transitions
        state = self.initial
        codes = bytearray(n)
        consumed = 0
        for m in masks:
            state = transitions[state][m]
            codes[consumed] = self.codes[state]
            consumed += 1
            if self.absorbing[state]:
                break
        if consumed < n:
            codes[consumed:] = bytes((self.codes[state],)) * (n - consumed)
        return bytes(codes), state

    def run(self, masks: Sequence[int]) -> MonitorResult:
        codes, final_state = self.run_codes(masks)
        return _result_from_codes(codes, self.accepting[final_state])


def _result_from_codes(codes: bytes, final_accepting: bool) -> MonitorResult:
    n = len(codes)
    first_false = codes.find(_CODE_FALSE)
    unsafe = codes.count(_CODE_FALSE) + codes.count(_CODE_PF)
    return MonitorResult(
        verdict_codes=codes,
        final_satisfied=final_accepting,
        violated=first_false != -1,
        violation_timestep=None if first_false == -1 else first_false,
        unsafe_steps=unsafe,
        length=n,
        exposure=Fraction(unsafe, n),
    )


def runner_for(d: Dfa) -> _Runner:
    """The cached batch runner for a DFA (built on first use)."""
    runner = d._runner
    if runner is None:
        runner = _Runner(d)
        d._runner = runner
    return runner


def trace_masks(d: Dfa, trace: Trace | Sequence[Iterable[str]]) -> bytes:
    """Project every valuation of a trace onto the DFA's bitmask alphabet."""
    bits = [(p, 1 << i) for i, p in enumerate(d.props)]
    out = bytearray(len(trace))
    for t, valuation in enumerate(trace):
        mask = 0
        for p, bit in bits:
            if p in valuation:
                mask |= bit
        out[t] = mask
    return bytes(out)


class Monitor:
    """Online monitor over one compiled property DFA.

    Valuations are fed one at a time with :meth:`step`, each returning the
    verdict after that step; :meth:`finalize` closes the trace and produces
    the :class:`MonitorResult`. Instances are single-use and strictly
    sequential; run one monitor per property instance per rollout.
    """

    def __init__(self, dfa: Dfa):
        self._dfa = dfa
        self._state = dfa.initial
        self._codes = bytearray()
        self._finalized = False

    @property
    def steps_consumed(self) -> int:
        return len(self._codes)

    def step(self, valuation: Iterable[str]) -> Verdict:
        if self._finalized:
            raise MonitorError("step after finalize")
        d = self._dfa
        self._state = d.transitions[self._state][d.mask_of(valuation)]
        code = _verdict_code(d, self._state)
        self._codes.append(code)
        return _VERDICTS[code]

    def finalize(self) -> MonitorResult:
        if not self._codes:
            raise MonitorError("finalize before any step was consumed")
        self._finalized = True
        return _result_from_codes(bytes(self._codes), self._state in self._dfa.accepting)


def run_trace(d: Dfa, trace: Trace | Sequence[Iterable[str]]) -> MonitorResult:
    """Monitor a whole trace at once; identical to stepping every valuation
    through a fresh :class:`Monitor` and finalizing."""
    if len(trace) == 0:
        raise MonitorError("cannot monitor an empty trace")
    return runner_for(d).run(trace_masks(d, trace))
