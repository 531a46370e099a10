"""Stateful translators between effects: processors, LTSs, generative systems.

A ``ResidualComodel`` answers input requests by issuing requests in another
effect theory.  Its step map ``gamma`` sends each state to an effect value
over (output token, next state) pairs, where the residual theory picks the
value's shape:

* kind ``"processor"``: a finite read tree over an input alphabet (the
  machine consumes input tokens to decide what to emit),
* kind ``"lts"``: a non-empty finite set of pairs (a finitely branching
  labelled transition system),
* kind ``"generative"``: an exact rational distribution over pairs summing
  to one (a generative probabilistic system).

Totality of ``gamma`` enforces non-termination structurally: every state
always has a next step.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Mapping

from .errors import InvariantViolation, TheoryMismatch
from .theory import (
    READ,
    App,
    Distribution,
    EffectValue,
    Term,
    Var,
    iter_nodes,
    leaf_names,
    map_leaves,
)

PROCESSOR = "processor"
LTS = "lts"
GENERATIVE = "generative"
KINDS = (PROCESSOR, LTS, GENERATIVE)


def _check_pair(payload, output_alphabet, states, context):
    if not (isinstance(payload, tuple) and len(payload) == 2):
        raise InvariantViolation(f"{context}: leaf payload {payload!r} is not a (token, state) pair")
    token, state = payload
    if token not in output_alphabet:
        raise InvariantViolation(f"{context}: token {token!r} is not in the output alphabet")
    if state not in states:
        raise InvariantViolation(f"{context}: next state {state!r} is undeclared")


@dataclass(frozen=True)
class ResidualComodel:
    """Finite translator with one total step entry per state.

    ``gamma_table`` values are read trees, frozensets, or ``Distribution``
    objects over (output token, next state) pairs, matching ``kind``.
    """

    kind: str
    output_alphabet: tuple
    states: tuple
    gamma_table: Mapping[Hashable, EffectValue]
    input_alphabet: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvariantViolation(f"unknown system kind {self.kind!r}")
        if not self.states:
            raise InvariantViolation("system needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise InvariantViolation("duplicate state names")
        if not self.output_alphabet:
            raise InvariantViolation("output alphabet must be non-empty")
        if len(set(self.output_alphabet)) != len(self.output_alphabet):
            raise InvariantViolation("output alphabet has duplicate tokens")
        if self.kind == PROCESSOR:
            if not self.input_alphabet:
                raise InvariantViolation("a processor needs an input alphabet")
            if len(set(self.input_alphabet)) != len(self.input_alphabet):
                raise InvariantViolation("input alphabet has duplicate tokens")
        elif self.input_alphabet is not None:
            raise InvariantViolation(f"kind {self.kind!r} does not take an input alphabet")
        declared = set(self.states)
        missing = declared - set(self.gamma_table)
        if missing:
            raise InvariantViolation(f"gamma is not total: missing {sorted(map(str, missing))}")
        extra = set(self.gamma_table) - declared
        if extra:
            raise InvariantViolation(f"gamma mentions undeclared states {sorted(map(str, extra))}")
        out = set(self.output_alphabet)
        for state, value in self.gamma_table.items():
            context = f"gamma at state {state!r}"
            if self.kind == PROCESSOR:
                if not isinstance(value, (Var, App)):
                    raise InvariantViolation(f"{context}: expected a read tree")
                for node in iter_nodes(value):
                    if isinstance(node, Var):
                        _check_pair(node.name, out, declared, context)
                    else:
                        if node.op != READ:
                            raise InvariantViolation(f"{context}: unexpected operation {node.op!r}")
                        if len(node.args) != len(self.input_alphabet):
                            raise InvariantViolation(
                                f"{context}: read node has {len(node.args)} branches, "
                                f"input alphabet has {len(self.input_alphabet)}"
                            )
            elif self.kind == LTS:
                if not isinstance(value, frozenset) or not value:
                    raise InvariantViolation(f"{context}: expected a non-empty frozenset")
                for payload in value:
                    _check_pair(payload, out, declared, context)
            else:
                if not isinstance(value, Distribution):
                    raise InvariantViolation(f"{context}: expected a Distribution")
                for payload in value:
                    _check_pair(payload, out, declared, context)
                if value.mass() != 1:
                    raise InvariantViolation(
                        f"{context}: violates mass conservation, weights sum to {value.mass()}"
                    )

    def gamma(self, state) -> EffectValue:
        try:
            return self.gamma_table[state]
        except KeyError:
            raise InvariantViolation(f"state {state!r} is not a state of the system") from None

    @cached_property
    def input_index(self) -> Mapping[Hashable, int]:
        if self.input_alphabet is None:
            raise InvariantViolation(f"kind {self.kind!r} has no input alphabet")
        return {token: i for i, token in enumerate(self.input_alphabet)}


def processor(input_alphabet, output_alphabet, states, gamma_table) -> ResidualComodel:
    return ResidualComodel(
        PROCESSOR, tuple(output_alphabet), tuple(states), dict(gamma_table), tuple(input_alphabet)
    )


def lts(output_alphabet, states, gamma_table) -> ResidualComodel:
    table = {s: frozenset(v) for s, v in gamma_table.items()}
    return ResidualComodel(LTS, tuple(output_alphabet), tuple(states), table)


def generative(output_alphabet, states, gamma_table) -> ResidualComodel:
    table = {
        s: v if isinstance(v, Distribution) else Distribution(v)
        for s, v in gamma_table.items()
    }
    return ResidualComodel(GENERATIVE, tuple(output_alphabet), tuple(states), table)


def emit(token, state) -> Var:
    """Leaf of a processor step: emit ``token`` and move to ``state``."""
    return Var((token, state))


@dataclass(frozen=True)
class ProcessorState:
    """A translator pointed at one of its states; the unit of composition."""

    system: ResidualComodel
    state: Hashable

    def __post_init__(self):
        if self.state not in self.system.states:
            raise InvariantViolation(f"state {self.state!r} is not a state of the system")


# ---------------------------------------------------------------------------
# Effect plumbing shared by the three residual theories.

def pure_effect(kind: str, payload) -> EffectValue:
    if kind == PROCESSOR:
        return Var(payload)
    if kind == LTS:
        return frozenset({payload})
    return Distribution.point(payload)


def bind_effect(kind: str, value: EffectValue, fn) -> EffectValue:
    """Substitute a continuation into an effect value, theory by theory:
    leaf substitution for read trees, union for sets, mixture for
    distributions."""
    if kind == PROCESSOR:
        return map_leaves(value, fn)
    if kind == LTS:
        out = set()
        for payload in value:
            out |= fn(payload)
        return frozenset(out)
    return value.bind(fn)


def effect_payloads(kind: str, value: EffectValue):
    """Iterate the (token, state) payloads stored in an effect value."""
    if kind == PROCESSOR:
        return leaf_names(value)
    return iter(value)


def derived_coop(system: ResidualComodel, term: Term, state) -> EffectValue:
    """Interpret an input-theory request tree over the system's outputs.

    A leaf returns its value paired with the current state.  A read node over
    the output alphabet is answered by one system step, binding each (token,
    next state) outcome into the child the token selects.
    """
    out_index = {token: i for i, token in enumerate(system.output_alphabet)}

    def go(node: Term, s) -> EffectValue:
        if isinstance(node, Var):
            return pure_effect(system.kind, (node.name, s))
        if node.op != READ:
            raise InvariantViolation(f"request term contains {node.op!r}, expected {READ!r}")
        if len(node.args) != len(system.output_alphabet):
            raise InvariantViolation(
                f"request read node has {len(node.args)} branches, "
                f"output alphabet has {len(system.output_alphabet)}"
            )

        def continue_with(payload):
            token, nxt = payload
            return go(node.args[out_index[token]], nxt)

        return bind_effect(system.kind, system.gamma(s), continue_with)

    return go(term, state)


# ---------------------------------------------------------------------------
# Bisimilarity by partition refinement.

def _quotient_step(kind: str, value: EffectValue, block_of) -> Hashable:
    """One-step signature of a state: its gamma value with successor states
    replaced by their current partition blocks."""
    if kind == PROCESSOR:
        return map_leaves(value, lambda payload: Var((payload[0], block_of(payload[1]))))
    if kind == LTS:
        return frozenset((token, block_of(s)) for token, s in value)
    merged: dict = {}
    for (token, s), w in value.items():
        key = (token, block_of(s))
        merged[key] = merged.get(key, Fraction(0)) + w
    return frozenset(merged.items())


def bisimilar(r1: ResidualComodel, s1, r2: ResidualComodel, s2) -> bool:
    """Greatest-fixpoint partition refinement on the disjoint union of states.

    Two states stay together exactly when their one-step signatures agree
    after quotienting successor states by the current partition; effect
    values compare by normal-form equality.
    """
    if r1.kind != r2.kind:
        raise TheoryMismatch(f"cannot compare a {r1.kind} with a {r2.kind}")
    if tuple(r1.output_alphabet) != tuple(r2.output_alphabet):
        raise TheoryMismatch(
            f"output alphabets differ: {r1.output_alphabet} vs {r2.output_alphabet}"
        )
    if r1.kind == PROCESSOR and tuple(r1.input_alphabet) != tuple(r2.input_alphabet):
        raise TheoryMismatch(
            f"input alphabets differ: {r1.input_alphabet} vs {r2.input_alphabet}"
        )
    if s1 not in r1.states or s2 not in r2.states:
        raise InvariantViolation("states must belong to their systems")

    union = [(0, s) for s in r1.states] + [(1, s) for s in r2.states]
    systems = (r1, r2)
    block = {q: 0 for q in union}
    while True:
        signatures = {}
        for side, s in union:
            sig = _quotient_step(
                systems[side].kind,
                systems[side].gamma(s),
                lambda nxt, side=side: block[(side, nxt)],
            )
            signatures[(side, s)] = sig
        order: dict = {}
        new_block = {}
        for q in union:
            key = (block[q], signatures[q])
            if key not in order:
                order[key] = len(order)
            new_block[q] = order[key]
        if new_block == block:
            return block[(0, s1)] == block[(1, s2)]
        block = new_block
