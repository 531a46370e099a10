"""State machines that answer effect requests, and streams as their limit.

A ``Comodel`` is a finite state set with, for each operation of a signature,
a total table sending a state to (chosen branch, next state).  Running a term
against a comodel descends the term one node per table lookup; for the input
theory this makes the machine an answer source for ``read`` requests.

The machine whose states are whole input streams is never materialized.
``StreamOracle`` stands in for its states: eventually periodic streams are
stored as prefix plus cycle, and arbitrary ones as a pure index callback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Mapping

from .errors import InvariantViolation
from .theory import READ, App, Signature, Term, Var, input_signature, sequence


@dataclass(frozen=True)
class Comodel:
    """Finite state machine interpreting each operation as branch + successor.

    ``tables`` maps an operation name to a total table ``state -> (branch
    index, next state)``.  For input-theory machines, ``alphabet`` gives the
    token emitted at each branch index.
    """

    signature: Signature
    states: tuple
    tables: Mapping[str, Mapping[Hashable, tuple[int, Hashable]]]
    alphabet: tuple | None = None

    def __post_init__(self):
        if not self.states:
            raise InvariantViolation("comodel needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise InvariantViolation("duplicate state names")
        declared = set(self.states)
        ops = {name for name, _ in self.signature.operations}
        if set(self.tables) != ops:
            raise InvariantViolation(f"tables cover {sorted(self.tables)}, signature declares {sorted(ops)}")
        for op, table in self.tables.items():
            arity = self.signature.arity(op)
            missing = declared - set(table)
            if missing:
                raise InvariantViolation(f"table for {op!r} is not total: missing {sorted(map(str, missing))}")
            for state, (branch, nxt) in table.items():
                if state not in declared:
                    raise InvariantViolation(f"table for {op!r} mentions undeclared state {state!r}")
                if not 0 <= branch < arity:
                    raise InvariantViolation(f"branch index {branch} out of range for {op!r} at state {state!r}")
                if nxt not in declared:
                    raise InvariantViolation(f"next state {nxt!r} undeclared ({op!r} at {state!r})")
        if self.alphabet is not None and len(self.alphabet) != self.signature.arity(READ):
            raise InvariantViolation("alphabet length must match the read arity")

    def read_step(self, state) -> tuple[Hashable, Hashable]:
        """One input step: (emitted token, next state)."""
        branch, nxt = self.tables[READ][state]
        return self.alphabet[branch], nxt


def input_comodel(alphabet, states, read_table: Mapping) -> Comodel:
    """Input-theory machine from a table ``state -> (token, next state)``."""
    alphabet = tuple(alphabet)
    index = {token: i for i, token in enumerate(alphabet)}
    table = {}
    for state, (token, nxt) in read_table.items():
        if token not in index:
            raise InvariantViolation(f"token {token!r} at state {state!r} is not in the alphabet")
        table[state] = (index[token], nxt)
    return Comodel(input_signature(alphabet), tuple(states), {READ: table}, alphabet)


# ---------------------------------------------------------------------------
# Stream oracles.

class StreamOracle:
    """An infinite token stream, exposed by position."""

    def at(self, i: int):
        raise NotImplementedError

    def drop(self, k: int) -> "StreamOracle":
        raise NotImplementedError

    def take(self, n: int) -> tuple:
        return tuple(self.at(i) for i in range(n))


@dataclass(frozen=True)
class PeriodicStream(StreamOracle):
    """Finite prefix followed by a cycle repeated forever."""

    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        if not self.cycle:
            raise InvariantViolation("cycle must be non-empty")

    def at(self, i: int):
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def drop(self, k: int) -> "PeriodicStream":
        if k <= len(self.prefix):
            return PeriodicStream(self.prefix[k:], self.cycle)
        r = (k - len(self.prefix)) % len(self.cycle)
        return PeriodicStream((), self.cycle[r:] + self.cycle[:r])


@dataclass(frozen=True, eq=False)
class CallbackStream(StreamOracle):
    """Stream given by a pure index function (same index, same token)."""

    fn: Callable[[int], Hashable]
    offset: int = 0

    def at(self, i: int):
        return self.fn(self.offset + i)

    def drop(self, k: int) -> "CallbackStream":
        return CallbackStream(self.fn, self.offset + k)


def periodic(prefix, cycle) -> PeriodicStream:
    return PeriodicStream(tuple(prefix), tuple(cycle))


def constant_stream(token) -> PeriodicStream:
    return PeriodicStream((), (token,))


# ---------------------------------------------------------------------------
# Running computations against a machine.

def run_term(machine: Comodel, term: Term, state) -> tuple[Hashable, Hashable]:
    """Evaluate ``term`` from ``state``: (leaf value reached, final state).

    Iterative descent: each interior node consults the machine's table for
    its operation and picks the child at the answered branch.
    """
    node = term
    while isinstance(node, App):
        branch, state = machine.tables[node.op][state]
        node = node.args[branch]
    return node.name, state


@dataclass(frozen=True)
class BehaviourProbe:
    """A machine pointed at one of its states; evaluates terms to values."""

    machine: Comodel
    state: Hashable

    def __post_init__(self):
        if self.state not in self.machine.states:
            raise InvariantViolation(f"state {self.state!r} is not a state of the machine")


def behaviour(probe: BehaviourProbe, term: Term):
    """Value component of running ``term`` from the probe's state."""
    value, _ = run_term(probe.machine, term, probe.state)
    return value


def behaviour_stream(probe: BehaviourProbe, n: int) -> tuple:
    """First ``n`` tokens emitted by iterating the read table from the probe."""
    machine, state = probe.machine, probe.state
    if machine.alphabet is None:
        raise InvariantViolation("behaviour streams need an input-theory comodel")
    out = []
    for _ in range(n):
        token, state = machine.read_step(state)
        out.append(token)
    return tuple(out)


def operationally_equivalent(m1: Comodel, s1, m2: Comodel, s2, depth: int) -> bool:
    """Whether two input machines emit the same tokens up to ``depth``.

    For the input theory this exhausts every computation of read-depth at
    most ``depth``; the unconditional statement is not decidable, so callers
    must report the depth used.
    """
    return behaviour_stream(BehaviourProbe(m1, s1), depth) == behaviour_stream(BehaviourProbe(m2, s2), depth)


# ---------------------------------------------------------------------------
# The operational topology on streams, by membership of sub-basic opens.

def run_on_stream(term: Term, stream: StreamOracle, alphabet) -> tuple[Hashable, int]:
    """Evaluate an input-theory term against a stream: (value, tokens consumed)."""
    index = {token: i for i, token in enumerate(alphabet)}
    node = term
    pos = 0
    while isinstance(node, App):
        node = node.args[index[stream.at(pos)]]
        pos += 1
    return node.name, pos


def subbasic_member(term: Term, value, stream: StreamOracle, alphabet) -> bool:
    """Whether ``stream`` lies in the sub-basic open set of streams on which
    ``term`` evaluates to ``value``.

    Inductive clauses: a leaf names the whole space or the empty set
    according to whether it equals ``value``; a read node sends the stream to
    the branch of its head token, testing the tail against that child.
    """
    if isinstance(term, Var):
        return term.name == value
    index = {token: i for i, token in enumerate(alphabet)}
    head = stream.at(0)
    return subbasic_member(term.args[index[head]], value, stream.drop(1), alphabet)


def read_request(alphabet) -> App:
    """The one-step request term: read a token and return it."""
    return App(READ, tuple(Var(token) for token in alphabet))


def continuity_identity_holds(term: Term, value, branch_token, stream: StreamOracle, alphabet) -> bool:
    """Check one instance of the identity equating the preimage of a one-step
    open under ``read`` with an intersection of sub-basic opens.

    Left side: take one read step on the stream and test (answered token,
    rest of stream) against {branch} x [term -> value].  Right side: membership
    in [read -> branch] and in [read-then-term -> value].
    """
    head = stream.at(0)
    lhs = head == branch_token and subbasic_member(term, value, stream.drop(1), alphabet)
    request = read_request(alphabet)
    rhs = subbasic_member(request, branch_token, stream, alphabet) and subbasic_member(
        sequence(request, term), value, stream, alphabet
    )
    return lhs == rhs
