"""Feedforward ReLU networks over exact rationals, and the gadget library.

Everything here is exact: weights, biases, and states are rationals
(gmpy2 when available, stdlib fractions otherwise), so threshold and
min gadgets hit their target values with zero error — the recognition
certainty of the compiled networks depends on exact equality at the focus.

The building blocks:

* ``FnnLayer`` / ``Fnn`` — sparse neurons ``relu(bias + sum w_i x_i)``.
* gadget constructors — small Fnns realizing Boolean algebra on scaled
  flags, masked multiplication, min/threshold chains, value shifts, and
  whole-atom checks over pre-scaled monomial values.
* ``Circuit`` — a named-port builder that assembles many gadgets into one
  Fnn, padding depth mismatches with identity ReLUs (sound because every
  routed value is nonnegative).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

try:  # pragma: no cover - environment-dependent import
    from gmpy2 import mpq as _ratctor
except ImportError:  # pragma: no cover
    from fractions import Fraction as _ratctor

Rational = type(_ratctor(0))
RationalLike = Union[int, Rational]


def rat(numerator: RationalLike, denominator: RationalLike = 1) -> Rational:
    return _ratctor(numerator, denominator)


ZERO = rat(0)
ONE = rat(1)


def format_rational(q: RationalLike) -> str:
    q = rat(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Rational:
    parts = text.split("/")
    if len(parts) == 1:
        return rat(int(parts[0]))
    if len(parts) == 2:
        num, den = int(parts[0]), int(parts[1])
        if den <= 0:
            raise ValueError(f"denominator must be positive in {text!r}")
        return rat(num, den)
    raise ValueError(f"not a rational: {text!r}")


# ---------------------------------------------------------------------------
# Networks


@dataclass(frozen=True)
class FnnLayer:
    """One ReLU layer; neurons store (bias, ((input_index, weight), ...))."""

    input_dim: int
    neurons: tuple[tuple[Rational, tuple[tuple[int, Rational], ...]], ...]

    def __post_init__(self) -> None:
        for bias, weights in self.neurons:
            for idx, _w in weights:
                if not 0 <= idx < self.input_dim:
                    raise ValueError(f"weight index {idx} out of range")

    @property
    def output_dim(self) -> int:
        return len(self.neurons)


@dataclass(frozen=True)
class Fnn:
    layers: tuple[FnnLayer, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("an Fnn needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.input_dim != a.output_dim:
                raise ValueError("adjacent layer dimensions do not compose")

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim


def _layer_eval(layer: FnnLayer, values: Sequence[Rational]) -> list[Rational]:
    out = []
    for bias, weights in layer.neurons:
        acc = bias
        for idx, w in weights:
            acc += w * values[idx]
        out.append(acc if acc > 0 else ZERO)
    return out


def fnn_eval(n: Fnn, inputs: Sequence[RationalLike]) -> list[Rational]:
    """Exact forward pass."""
    if len(inputs) != n.input_dim:
        raise ValueError(
            f"expected {n.input_dim} inputs, got {len(inputs)}"
        )
    values: list[Rational] = [rat(x) for x in inputs]
    for layer in n.layers:
        values = _layer_eval(layer, values)
    return values


# ---------------------------------------------------------------------------
# Circuit builder


@dataclass(frozen=True)
class Ref:
    """Handle to a value inside a circuit: an input port or a neuron."""

    kind: str  # "in" | "neuron"
    index: int
    depth: int  # 0 for inputs; neurons sit at depth >= 1


class Circuit:
    """Assembles ReLU neurons into an Fnn with named input ports.

    Values flow only forward; a term read from an earlier depth is carried
    through memoized identity ReLUs.  That identity trick — and therefore
    the whole builder — is only sound for nonnegative values, which all
    compiled constructions maintain by design.
    """

    def __init__(self, inputs: Mapping[str, int], width: Optional[int] = None):
        self._inputs = dict(inputs)
        used = max(self._inputs.values(), default=-1) + 1
        self._width = used if width is None else width
        if self._width < used:
            raise ValueError("declared width smaller than the largest port index")
        # neurons[d] = list of (bias, [(ref, weight), ...]) at depth d+1
        self._neurons: list[list[tuple[Rational, list[tuple[Ref, Rational]]]]] = []
        self._identity: dict[Ref, Ref] = {}
        self._outputs: list[tuple[str, Ref]] = []

    def input(self, name: str) -> Ref:
        return Ref("in", self._inputs[name], 0)

    def _alloc(
        self, depth: int, bias: Rational, terms: list[tuple[Ref, Rational]]
    ) -> Ref:
        while len(self._neurons) < depth:
            self._neurons.append([])
        self._neurons[depth - 1].append((bias, terms))
        return Ref("neuron", len(self._neurons[depth - 1]) - 1, depth)

    def _lift(self, ref: Ref, depth: int) -> Ref:
        while ref.depth < depth:
            nxt = self._identity.get(ref)
            if nxt is None or nxt.depth > ref.depth + 1:
                nxt = self._alloc(ref.depth + 1, ZERO, [(ref, ONE)])
                self._identity[ref] = nxt
            ref = nxt
        return ref

    def relu(
        self,
        terms: Iterable[tuple[RationalLike, Ref]],
        bias: RationalLike = 0,
    ) -> Ref:
        terms = [(rat(w), r) for w, r in terms]
        depth = 1 + max((r.depth for _w, r in terms), default=0)
        lifted = [(self._lift(r, depth - 1), w) for w, r in terms]
        return self._alloc(depth, rat(bias), lifted)

    def const(self, value: RationalLike) -> Ref:
        if rat(value) < 0:
            raise ValueError("constants must be nonnegative (ReLU range)")
        return self._alloc(1, rat(value), [])

    def min_(self, x: Ref, y: Ref) -> Ref:
        """min(x, y) for nonnegative x, y: relu(x - relu(x - y))."""
        over = self.relu([(1, x), (-1, y)])
        return self.relu([(1, x), (-1, over)])

    def output(self, name: str, ref: Ref) -> None:
        self._outputs.append((name, ref))

    def output_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ref in self._outputs)

    def build(self) -> Fnn:
        if not self._outputs:
            raise ValueError("circuit has no outputs")
        depth = max(max((r.depth for _n, r in self._outputs), default=0), 1)
        finals = [(name, self._lift(r, depth)) for name, r in self._outputs]
        layers = []
        for d, stage in enumerate(self._neurons):
            in_dim = self._width if d == 0 else len(self._neurons[d - 1])
            neurons = []
            for bias, terms in stage:
                weights: dict[int, Rational] = {}
                for ref, w in terms:
                    weights[ref.index] = weights.get(ref.index, ZERO) + w
                neurons.append(
                    (bias, tuple(sorted(weights.items())))
                )
            layers.append(FnnLayer(in_dim, tuple(neurons)))
        # Final selection layer re-emits the outputs in declaration order.
        sel = FnnLayer(
            len(self._neurons[depth - 1]),
            tuple((ZERO, ((r.index, ONE),)) for _name, r in finals),
        )
        layers = layers[:depth] + [sel]
        return Fnn(tuple(layers))


# ---------------------------------------------------------------------------
# Gadgets


def gadget_not(scale: RationalLike) -> Fnn:
    """A negation on {0, scale} flags: relu(scale - x)."""
    c = Circuit({"x": 0})
    c.output("out", c.relu([(-1, c.input("x"))], scale))
    return c.build()


def gadget_and(scale: RationalLike) -> Fnn:
    """A conjunction on {0, scale} flags: relu(x1 + x2 - scale)."""
    c = Circuit({"x1": 0, "x2": 1})
    c.output(
        "out",
        c.relu([(1, c.input("x1")), (1, c.input("x2"))], rat(-1) * rat(scale)),
    )
    return c.build()


def gadget_mask_mul() -> Fnn:
    """relu(y - (1 - b)): equals b*y for y in [0,1] and a 0/1 flag b."""
    c = Circuit({"y": 0, "b": 1})
    c.output("out", c.relu([(1, c.input("y")), (1, c.input("b"))], -1))
    return c.build()


def gadget_min(r2: RationalLike) -> Fnn:
    """min(x, r2) for nonnegative x."""
    if rat(r2) < 0:
        raise ValueError("threshold must be nonnegative")
    c = Circuit({"x": 0})
    x = c.input("x")
    over = c.relu([(1, x)], rat(-1) * rat(r2))
    c.output("out", c.relu([(1, x), (-1, over)]))
    return c.build()


def gadget_shift(r: RationalLike) -> Fnn:
    """0/1 flag to {0, r}: relu(r - relu(1 - x)).

    Sound for 0 < r <= 1, which covers every scale the compiler emits
    (all are reciprocals of positive node-count powers).
    """
    c = Circuit({"x": 0})
    inner = c.relu([(-1, c.input("x"))], 1)
    c.output("out", c.relu([(-1, inner)], r))
    return c.build()


def term_check_refs(
    c: Circuit,
    monomial_inputs: Sequence[Ref],
    coeffs: Sequence[RationalLike],
    bound: RationalLike,
    r1: Rational,
    r2: Rational,
) -> Ref:
    """Atom check inside a circuit; see gadget_term_check."""
    if r2 > r1:
        raise ValueError("inner scale r2 must not exceed input scale r1")
    if r2 <= 0:
        raise ValueError("scales must be positive")
    terms = [(rat(a), m) for a, m in zip(coeffs, monomial_inputs)]
    x_t = c.relu(terms, rat(-1) * r1 * rat(bound))
    r2_ref = c.const(r2)
    y_t = c.min_(x_t, r2_ref)
    return c.relu([(-1, y_t)], r2)


def gadget_term_check(
    coeffs: Sequence[RationalLike],
    bound: RationalLike,
    r1: RationalLike,
    r2: RationalLike,
) -> Fnn:
    """Checks one atom ``sum a_i m_i <= bound`` over pre-scaled inputs.

    Inputs are the monomial values scaled by r1 (input i = r1 * m_i).  The
    chain x_t = relu(sum a_i (r1 m_i) - r1 b), y_t = min(x_t, r2),
    z_t = relu(r2 - y_t) yields r2 when the atom holds and 0 otherwise,
    provided x_t is either 0 or at least r2 — guaranteed by r2 <= r1
    because a violated integer atom pushes x_t to at least r1.
    """
    c = Circuit({f"m{i}": i for i in range(len(coeffs))})
    refs = [c.input(f"m{i}") for i in range(len(coeffs))]
    c.output("out", term_check_refs(c, refs, coeffs, bound, rat(r1), rat(r2)))
    return c.build()


def boolean_refs(
    c: Circuit,
    formulas: Sequence,
    bit_refs: Sequence[Ref],
) -> dict:
    """0/1 truth refs for modal-free formulas over label-bit refs."""
    from .logic import And, Modal, Not, Prop, modal_depth

    memo: dict = {}

    def truth(f) -> Ref:
        if f in memo:
            return memo[f]
        if isinstance(f, Prop):
            ref = c.relu([(1, bit_refs[f.index])])
        elif isinstance(f, Not):
            ref = c.relu([(-1, truth(f.operand))], 1)
        elif isinstance(f, And):
            a, b = truth(f.left), truth(f.right)
            ref = c.relu([(1, a), (1, b)], -1)
        elif isinstance(f, Modal):
            raise ValueError("modal nodes have no Boolean-layer truth value")
        else:  # pragma: no cover
            raise TypeError(f"not a formula: {f!r}")
        memo[f] = ref
        return ref

    for f in formulas:
        if modal_depth(f) != 0:
            raise ValueError("Boolean layer only evaluates modal-free formulas")
        truth(f)
    return memo


def build_boolean_layer(formulas: Sequence, colours: int) -> Fnn:
    """Truth values of modal-free formulas from a label bitvector.

    The input is a full combination layout [state, in-agg, out-agg,
    global-agg] of width 4*colours; everything beyond the label bits is
    ignored (zero weight).  Outputs follow the order of ``formulas``.
    """
    c = Circuit({f"c{i}": i for i in range(colours)}, width=4 * colours)
    bits = [c.input(f"c{i}") for i in range(colours)]
    memo = boolean_refs(c, formulas, bits)
    for i, f in enumerate(formulas):
        c.output(f"f{i}", memo[f])
    return c.build()
