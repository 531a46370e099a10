"""Finite signatures, free term trees, substitution, and effect normal forms.

Terms are immutable trees: ``Var`` leaves hold an opaque hashable payload and
``App`` nodes hold an operation name with arity-many children.  Three concrete
effect theories are supported, each with a canonical normal form instead of a
generic rewriting engine:

* input from a finite alphabet A: a single A-ary ``read`` operation, no
  equations; terms are their own normal forms,
* binary non-deterministic choice (``or``): commutative, associative,
  idempotent; the normal form is the non-empty set of leaf payloads,
* binary probabilistic choice (``+r`` for a rational bias r in (0,1)); the
  normal form is an exact rational distribution over leaf payloads.

``EffectValue`` is the union of the three normal-form representations; code
that stores one alongside a system dispatches on the system's kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterator, Mapping, Union

from .errors import ArityMismatch, InvariantViolation, UnboundVariable

READ = "read"
CHOICE = "or"
PROB_PREFIX = "+"


@dataclass(frozen=True)
class Var:
    """Leaf holding a variable (or, more generally, any hashable payload)."""

    name: Hashable


@dataclass(frozen=True)
class App:
    """Interior node: an operation applied to arity-many subterms."""

    op: str
    args: tuple["Term", ...]


Term = Union[Var, App]


@dataclass(frozen=True)
class Signature:
    """Ordered list of (operation name, arity) pairs.

    Names must be unique and arities at least 1.  The empty signature is the
    pure signature: its terms are bare variables.
    """

    operations: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.operations]
        if len(set(names)) != len(names):
            raise InvariantViolation(f"duplicate operation names in {names}")
        for name, arity in self.operations:
            if arity < 1:
                raise InvariantViolation(f"operation {name!r} has arity {arity}, expected >= 1")

    def arity(self, op: str) -> int:
        for name, arity in self.operations:
            if name == op:
                return arity
        raise InvariantViolation(f"unknown operation {op!r}")

    def __contains__(self, op: str) -> bool:
        return any(name == op for name, _ in self.operations)


def input_signature(alphabet) -> Signature:
    """Signature of the input theory: one ``read`` with one branch per token."""
    alphabet = tuple(alphabet)
    if not alphabet:
        raise InvariantViolation("input alphabet must be non-empty")
    if len(set(alphabet)) != len(alphabet):
        raise InvariantViolation(f"input alphabet has duplicate tokens: {alphabet}")
    return Signature(((READ, len(alphabet)),))


CHOICE_SIGNATURE = Signature(((CHOICE, 2),))


def read(args) -> App:
    return App(READ, tuple(args))


def choice(left: Term, right: Term) -> App:
    return App(CHOICE, (left, right))


def prob_op(r: Fraction) -> str:
    """Operation name for probabilistic choice with left-branch weight ``r``."""
    r = Fraction(r)
    if not 0 < r < 1:
        raise InvariantViolation(f"probabilistic bias must lie strictly between 0 and 1, got {r}")
    return f"{PROB_PREFIX}{r.numerator}/{r.denominator}"


def prob_bias(op: str) -> Fraction:
    """Recover the rational bias from a probabilistic operation name."""
    if not op.startswith(PROB_PREFIX):
        raise InvariantViolation(f"not a probabilistic choice operation: {op!r}")
    try:
        num, _, den = op[len(PROB_PREFIX):].partition("/")
        r = Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvariantViolation(f"malformed probabilistic operation name: {op!r}") from exc
    if not 0 < r < 1:
        raise InvariantViolation(f"probabilistic bias must lie strictly between 0 and 1, got {r}")
    return r


def prob(r, left: Term, right: Term) -> App:
    return App(prob_op(Fraction(r)), (left, right))


# ---------------------------------------------------------------------------
# Term walks.  These are iterative: terms produced by repeated leaf expansion
# (see costream.extensional) can be deep enough to exhaust the call stack.

def map_leaves(term: Term, fn: Callable[[Hashable], Term]) -> Term:
    """Rebuild ``term`` with every leaf ``Var(v)`` replaced by ``fn(v)``."""
    if isinstance(term, Var):
        return fn(term.name)
    stack = [[term, 0, []]]
    while True:
        node, i, acc = stack[-1]
        if i == len(node.args):
            built = App(node.op, tuple(acc))
            stack.pop()
            if not stack:
                return built
            stack[-1][1] += 1
            stack[-1][2].append(built)
            continue
        child = node.args[i]
        if isinstance(child, Var):
            stack[-1][1] += 1
            stack[-1][2].append(fn(child.name))
        else:
            stack.append([child, 0, []])


def iter_nodes(term: Term) -> Iterator[Term]:
    """Yield every node of ``term`` in preorder."""
    stack = [term]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, App):
            stack.extend(reversed(node.args))


def leaf_names(term: Term) -> Iterator[Hashable]:
    """Yield leaf payloads left to right."""
    stack = [term]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            yield node.name
        else:
            stack.extend(reversed(node.args))


def term_size(term: Term) -> int:
    return sum(1 for _ in iter_nodes(term))


def term_depth(term: Term) -> int:
    stack = [(term, 0)]
    depth = 0
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if isinstance(node, App):
            stack.extend((child, d + 1) for child in node.args)
    return depth


def check_arities(term: Term, signature: Signature | None = None) -> None:
    """Verify each operation is used with one consistent arity.

    With a signature, also verify every operation belongs to it and is used
    at its declared arity.
    """
    seen: dict[str, int] = {}
    for node in iter_nodes(term):
        if isinstance(node, Var):
            continue
        arity = seen.setdefault(node.op, len(node.args))
        if arity != len(node.args):
            raise ArityMismatch(f"operation {node.op!r} used with arities {arity} and {len(node.args)}")
        if signature is not None and len(node.args) != signature.arity(node.op):
            raise ArityMismatch(
                f"operation {node.op!r} used with arity {len(node.args)}, "
                f"signature declares {signature.arity(node.op)}"
            )


def render(term: Term) -> str:
    """Compact single-line rendering, e.g. ``read(x, y)``."""
    if isinstance(term, Var):
        return str(term.name)
    return f"{term.op}({', '.join(render(a) for a in term.args)})"


# ---------------------------------------------------------------------------
# Substitution and sequencing.

def substitute(term: Term, assignment) -> Term:
    """Replace each leaf of ``term`` by its image under ``assignment``.

    ``assignment`` is a mapping or a callable from leaf payloads to terms.
    Raises ``UnboundVariable`` for a leaf outside the assignment's domain and
    ``ArityMismatch`` if the result uses one operation at two arities.
    """
    if callable(assignment) and not isinstance(assignment, Mapping):
        fn = assignment
    else:
        def fn(name):
            try:
                return assignment[name]
            except KeyError:
                raise UnboundVariable(name) from None
    result = map_leaves(term, fn)
    check_arities(result)
    return result


def sequence(first: Term, then: Term) -> Term:
    """``first`` with every leaf replaced by ``then``: run both, keep the
    second's return value."""
    result = map_leaves(first, lambda _name: then)
    check_arities(result)
    return result


# ---------------------------------------------------------------------------
# Normal forms for the choice theories.

class Distribution:
    """Finitely supported map from values to positive exact rationals.

    Equality is support-and-weights equality, so normal forms of
    probabilistically equivalent terms compare equal.
    """

    __slots__ = ("_weights",)

    def __init__(self, weights):
        accumulated: dict = {}
        items = weights.items() if isinstance(weights, Mapping) else weights
        for value, weight in items:
            weight = Fraction(weight)
            if weight < 0:
                raise InvariantViolation(f"negative weight {weight} for {value!r}")
            if weight:
                accumulated[value] = accumulated.get(value, Fraction(0)) + weight
        if not accumulated:
            raise InvariantViolation("distribution must have non-empty support")
        self._weights = accumulated

    @classmethod
    def point(cls, value) -> "Distribution":
        return cls({value: Fraction(1)})

    def mass(self) -> Fraction:
        return sum(self._weights.values(), Fraction(0))

    def support(self):
        return frozenset(self._weights)

    def items(self):
        return self._weights.items()

    def __getitem__(self, value) -> Fraction:
        return self._weights.get(value, Fraction(0))

    def __len__(self) -> int:
        return len(self._weights)

    def __iter__(self):
        return iter(self._weights)

    def scale(self, factor) -> "Distribution":
        factor = Fraction(factor)
        if factor <= 0:
            raise InvariantViolation(f"scale factor must be positive, got {factor}")
        return Distribution((v, w * factor) for v, w in self.items())

    @classmethod
    def mix(cls, parts) -> "Distribution":
        """Weighted sum of distributions; weights need not sum to one."""
        out: dict = {}
        for weight, dist in parts:
            weight = Fraction(weight)
            for value, w in dist.items():
                out[value] = out.get(value, Fraction(0)) + weight * w
        return cls(out)

    def map(self, fn) -> "Distribution":
        return Distribution((fn(v), w) for v, w in self.items())

    def bind(self, fn) -> "Distribution":
        return Distribution.mix((w, fn(v)) for v, w in self.items())

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self._weights == other._weights

    def __hash__(self):
        return hash(frozenset(self._weights.items()))

    def __repr__(self):
        body = ", ".join(f"{v!r}: {w}" for v, w in self.items())
        return f"Distribution({{{body}}})"


EffectValue = Union[Term, frozenset, Distribution]


def choice_normal_form(term: Term) -> frozenset:
    """Set of leaf payloads of a term over the binary choice operation.

    Commutativity, associativity, and idempotence are absorbed by the set.
    """
    for node in iter_nodes(term):
        if isinstance(node, App) and node.op != CHOICE:
            raise InvariantViolation(f"expected only {CHOICE!r} nodes, found {node.op!r}")
    return frozenset(leaf_names(term))


def prob_normal_form(term: Term) -> Distribution:
    """Distribution over leaf payloads of a probabilistic choice term.

    Each leaf weighs the product of branch biases on its path (r to the left,
    1 - r to the right); weights of equal leaves add up, and the total mass is
    exactly 1.
    """
    weights: dict = {}
    stack = [(term, Fraction(1))]
    while stack:
        node, w = stack.pop()
        if isinstance(node, Var):
            weights[node.name] = weights.get(node.name, Fraction(0)) + w
            continue
        r = prob_bias(node.op)
        if len(node.args) != 2:
            raise ArityMismatch(f"probabilistic choice is binary, got {len(node.args)} children")
        left, right = node.args
        stack.append((left, w * r))
        stack.append((right, w * (1 - r)))
    return Distribution(weights)
