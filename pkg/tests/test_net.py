"""Tests for the exact-rational ReLU networks and the gadget library."""

import random

import pytest

from pmlc.graphs import Graph, PointedGraph
from pmlc.logic import And, Not, Prop, parse_formula, parse_peano
from pmlc.net import (
    Circuit,
    Fnn,
    FnnLayer,
    ONE,
    ZERO,
    build_boolean_layer,
    fnn_eval,
    format_rational,
    gadget_and,
    gadget_mask_mul,
    gadget_min,
    gadget_not,
    gadget_shift,
    gadget_term_check,
    parse_rational,
    rat,
)
from pmlc.oracle import eval_peano, models

from formula_gen import random_boolean


# ---------------------------------------------------------------------------
# Rationals


def test_rational_arithmetic_is_exact():
    assert rat(1, 3) + rat(1, 3) + rat(1, 3) == ONE
    assert rat(2, 8) == rat(1, 4)
    assert rat(-2, 8) == rat(-1, 4)


@pytest.mark.parametrize(
    "text,value",
    [
        ("3/4", rat(3, 4)),
        ("-2/8", rat(-1, 4)),
        ("5", rat(5)),
        ("0/7", ZERO),
    ],
)
def test_parse_rational(text, value):
    assert parse_rational(text) == value


def test_format_rational_always_carries_denominator():
    assert format_rational(rat(5)) == "5/1"
    assert format_rational(rat(-2, 8)) == "-1/4"
    assert format_rational(0) == "0/1"


@pytest.mark.parametrize("text", ["1/2/3", "1/0", "1/-2", "x", ""])
def test_parse_rational_rejects(text):
    with pytest.raises(ValueError):
        parse_rational(text)


def test_parse_format_round_trip():
    rng = random.Random("rational-round-trip")
    for _ in range(200):
        q = rat(rng.randint(-300, 300), rng.randint(1, 300))
        assert parse_rational(format_rational(q)) == q


# ---------------------------------------------------------------------------
# Fnn evaluation


def _layer(input_dim, rows):
    return FnnLayer(
        input_dim,
        tuple(
            (rat(bias), tuple((i, rat(w)) for i, w in weights))
            for bias, weights in rows
        ),
    )


def test_identity_chain_preserves_value():
    ident = Fnn(
        (
            _layer(1, [(0, [(0, 1)])]),
            _layer(1, [(0, [(0, 1)])]),
        )
    )
    assert fnn_eval(ident, [rat(1, 3)]) == [rat(1, 3)]


def test_relu_clamps_negative_sums():
    clamp = Fnn((_layer(1, [(-1, [(0, 1)])]),))
    assert fnn_eval(clamp, [rat(1, 2)]) == [ZERO]
    assert fnn_eval(clamp, [rat(3, 2)]) == [rat(1, 2)]


def test_fnn_eval_checks_input_dimension():
    ident = Fnn((_layer(2, [(0, [(0, 1)])]),))
    with pytest.raises(ValueError):
        fnn_eval(ident, [ONE])


def test_fnn_rejects_non_composing_layers():
    with pytest.raises(ValueError):
        Fnn((_layer(1, [(0, [(0, 1)])]), _layer(2, [(0, [(0, 1)])])))


def test_fnn_rejects_out_of_range_weight_index():
    with pytest.raises(ValueError):
        _layer(1, [(0, [(1, 1)])])


def test_fnn_needs_a_layer():
    with pytest.raises(ValueError):
        Fnn(())


# ---------------------------------------------------------------------------
# Boolean gadgets


def test_gadget_not_truth_table():
    g = gadget_not(1)
    assert fnn_eval(g, [0]) == [ONE]
    assert fnn_eval(g, [1]) == [ZERO]


def test_gadget_not_scaled():
    g = gadget_not(rat(1, 8))
    assert fnn_eval(g, [0]) == [rat(1, 8)]
    assert fnn_eval(g, [rat(1, 8)]) == [ZERO]


def test_gadget_and_truth_table():
    g = gadget_and(1)
    assert fnn_eval(g, [0, 0]) == [ZERO]
    assert fnn_eval(g, [0, 1]) == [ZERO]
    assert fnn_eval(g, [1, 0]) == [ZERO]
    assert fnn_eval(g, [1, 1]) == [ONE]


def test_gadget_and_scaled():
    s = rat(1, 8)
    g = gadget_and(s)
    assert fnn_eval(g, [s, s]) == [s]
    assert fnn_eval(g, [0, s]) == [ZERO]
    assert fnn_eval(g, [0, 0]) == [ZERO]


@pytest.mark.parametrize("den", [1, 2, 3, 7, 64])
def test_boolean_gadgets_exhaustive_grid(den):
    scale = rat(1, den)
    g_not, g_and = gadget_not(scale), gadget_and(scale)
    for a in (ZERO, scale):
        (out,) = fnn_eval(g_not, [a])
        assert out == (scale if a == ZERO else ZERO)
        assert out >= 0
        for b in (ZERO, scale):
            (out,) = fnn_eval(g_and, [a, b])
            assert out == (scale if a == b == scale else ZERO)
            assert out >= 0


# ---------------------------------------------------------------------------
# Masked multiplication, min, shift


def test_gadget_mask_mul_examples():
    g = gadget_mask_mul()
    assert fnn_eval(g, [rat(3, 4), 1]) == [rat(3, 4)]
    assert fnn_eval(g, [rat(3, 4), 0]) == [ZERO]
    assert fnn_eval(g, [rat(1, 16), 1]) == [rat(1, 16)]
    assert fnn_eval(g, [1, 1]) == [ONE]
    assert fnn_eval(g, [0, 0]) == [ZERO]


def test_gadget_mask_mul_grid():
    g = gadget_mask_mul()
    for num in range(65):
        y = rat(num, 64)
        for b in (0, 1):
            assert fnn_eval(g, [y, b]) == [y * b]


def test_gadget_min_examples():
    g = gadget_min(rat(1, 16))
    assert fnn_eval(g, [0]) == [ZERO]
    assert fnn_eval(g, [rat(1, 32)]) == [rat(1, 32)]
    assert fnn_eval(g, [rat(1, 16)]) == [rat(1, 16)]
    assert fnn_eval(g, [rat(1, 2)]) == [rat(1, 16)]
    assert fnn_eval(g, [1]) == [rat(1, 16)]


def test_gadget_min_grid():
    for den in (1, 4, 64):
        r2 = rat(1, den)
        g = gadget_min(r2)
        for num in range(0, 130, 3):
            x = rat(num, 64)
            assert fnn_eval(g, [x]) == [min(x, r2)]


def test_gadget_shift_examples():
    g = gadget_shift(rat(1, 64))
    assert fnn_eval(g, [0]) == [ZERO]
    assert fnn_eval(g, [1]) == [rat(1, 64)]
    ninth = gadget_shift(rat(1, 9))
    assert fnn_eval(ninth, [1]) == [rat(1, 9)]
    assert fnn_eval(ninth, [0]) == [ZERO]
    # r = 1 degenerates to the identity on flags.
    ident = gadget_shift(ONE)
    assert fnn_eval(ident, [1]) == [ONE]
    assert fnn_eval(ident, [0]) == [ZERO]


# ---------------------------------------------------------------------------
# Term check


def test_term_check_single_variable_atom():
    # x1 <= 1 with inputs pre-scaled by 1/4; inner scale 1/16.
    g = gadget_term_check([1], 1, rat(1, 4), rat(1, 16))
    # m1 = 0, 1: satisfied -> r2.
    assert fnn_eval(g, [0]) == [rat(1, 16)]
    assert fnn_eval(g, [rat(1, 4)]) == [rat(1, 16)]
    # m1 = 2, 3: violated -> 0.
    assert fnn_eval(g, [rat(2, 4)]) == [ZERO]
    assert fnn_eval(g, [rat(3, 4)]) == [ZERO]


def test_term_check_equal_scales_saturate():
    g = gadget_term_check([1], 2, ONE, ONE)
    assert fnn_eval(g, [2]) == [ONE]
    assert fnn_eval(g, [3]) == [ZERO]
    assert fnn_eval(g, [7]) == [ZERO]


def test_term_check_negative_coefficients():
    # -x1 <= 2 holds for every natural x1.
    g = gadget_term_check([-1], 2, rat(1, 2), rat(1, 2))
    for m in range(5):
        assert fnn_eval(g, [rat(m, 2)]) == [rat(1, 2)]


def test_term_check_rejects_bad_scales():
    with pytest.raises(ValueError):
        gadget_term_check([1], 1, rat(1, 16), rat(1, 4))
    with pytest.raises(ValueError):
        gadget_term_check([1], 1, ONE, ZERO)


_SWEEP_ATOMS = [
    "x1 <= 1",
    "x1*x1*x1 - x2*x2*x3 <= 0",
    "x1*x1 - x2*x2*x2 <= 1",
    "2*x1 + 3*x2 <= 7",
    "0 - x1 <= 2",
]

_SCALE_PAIRS = [
    (rat(1), rat(1)),
    (rat(1), rat(1, 2)),
    (rat(1), rat(1, 16)),
    (rat(1, 2), rat(1, 2)),
    (rat(1, 2), rat(1, 16)),
    (rat(1, 16), rat(1, 16)),
]


def _assignments(arity, top=4):
    if arity == 0:
        yield ()
        return
    for head in range(top + 1):
        for rest in _assignments(arity - 1, top):
            yield (head,) + rest


@pytest.mark.parametrize("text", _SWEEP_ATOMS)
def test_term_check_matches_arithmetic_oracle(text):
    from pmlc.logic import peano_arity

    atom = parse_peano(text)
    arity = peano_arity(atom)
    coeffs = [m.coeff for m in atom.monomials]
    for r1, r2 in _SCALE_PAIRS:
        g = gadget_term_check(coeffs, atom.bound, r1, r2)
        for assignment in _assignments(arity):
            inputs = []
            for mono in atom.monomials:
                value = 1
                for v in mono.variables:
                    value *= assignment[v - 1]
                inputs.append(r1 * value)
            expected = r2 if eval_peano(atom, assignment) else ZERO
            assert fnn_eval(g, inputs) == [expected]


# ---------------------------------------------------------------------------
# Circuit builder


def test_circuit_pads_depth_with_identities():
    c = Circuit({"x": 0})
    deep = c.relu([(1, c.relu([(1, c.input("x"))]))])  # depth 2
    mixed = c.relu([(1, deep), (1, c.input("x"))], bias=rat(1, 3))
    c.output("out", mixed)
    net = c.build()
    assert fnn_eval(net, [rat(1, 6)]) == [rat(1, 6) + rat(1, 6) + rat(1, 3)]


def test_circuit_min_of_two_refs():
    c = Circuit({"x": 0, "y": 1})
    c.output("out", c.min_(c.input("x"), c.input("y")))
    net = c.build()
    assert fnn_eval(net, [rat(3, 4), rat(1, 4)]) == [rat(1, 4)]
    assert fnn_eval(net, [rat(1, 4), rat(3, 4)]) == [rat(1, 4)]
    assert fnn_eval(net, [rat(2, 7), rat(2, 7)]) == [rat(2, 7)]


def test_circuit_outputs_follow_declaration_order():
    c = Circuit({"x": 0})
    x = c.input("x")
    a = c.relu([(2, x)])
    b = c.relu([(3, x)])
    c.output("triple", b)
    c.output("double", a)
    assert c.output_names() == ("triple", "double")
    net = c.build()
    assert fnn_eval(net, [ONE]) == [rat(3), rat(2)]


def test_circuit_merges_duplicate_term_indices():
    c = Circuit({"x": 0})
    x = c.input("x")
    c.output("out", c.relu([(1, x), (1, x)]))
    assert fnn_eval(c.build(), [rat(1, 2)]) == [ONE]


def test_circuit_const_and_width_checks():
    c = Circuit({"x": 0}, width=8)
    c.output("out", c.relu([(1, c.const(rat(5, 3)))]))
    net = c.build()
    assert net.input_dim == 8
    assert fnn_eval(net, [0] * 8) == [rat(5, 3)]

    with pytest.raises(ValueError):
        Circuit({"x": 3}, width=2)
    with pytest.raises(ValueError):
        Circuit({"x": 0}).const(-1)
    with pytest.raises(ValueError):
        Circuit({"x": 0}).build()


def test_circuit_raw_input_output_is_lifted():
    c = Circuit({"x": 0, "y": 1})
    c.output("x", c.input("x"))
    net = c.build()
    assert fnn_eval(net, [rat(2, 5), ONE]) == [rat(2, 5)]


# ---------------------------------------------------------------------------
# Boolean layer


def _single_node(bits):
    return PointedGraph(
        Graph(1, len(bits), frozenset(), (tuple(bits),)), 0
    )


def test_boolean_layer_example():
    f = And(Not(Prop(0)), Prop(1))
    net = build_boolean_layer([f], 2)
    assert net.input_dim == 8
    assert fnn_eval(net, [0, 1] + [0] * 6) == [ONE]
    assert fnn_eval(net, [1, 1] + [0] * 6) == [ZERO]


def test_boolean_layer_ignores_aggregation_inputs():
    f = parse_formula("(p0 | p1)")
    net = build_boolean_layer([f], 2)
    junk = [rat(7, 3), rat(9), rat(1, 13), rat(4), rat(5), rat(6)]
    assert fnn_eval(net, [1, 0] + junk) == fnn_eval(net, [1, 0] + [0] * 6)


def test_boolean_layer_rejects_modal_formulas():
    with pytest.raises(ValueError):
        build_boolean_layer([parse_formula("<top>{x1 <= 0}(p0)")], 1)


@pytest.mark.parametrize("colours", [1, 2, 3, 4])
def test_boolean_layer_matches_oracle_on_all_labels(colours):
    rng = random.Random(f"boolean-layer-{colours}")
    formulas = [Prop(0), Not(Prop(0))]
    if colours >= 2:
        formulas.append(parse_formula("(p0 | p1)"))
        formulas.append(And(Prop(0), Not(Prop(1))))
    formulas.extend(random_boolean(rng, colours) for _ in range(4))
    net = build_boolean_layer(formulas, colours)
    for mask in range(2 ** colours):
        bits = [(mask >> i) & 1 for i in range(colours)]
        pg = _single_node(bits)
        inputs = bits + [0] * (3 * colours)
        got = fnn_eval(net, inputs)
        for f, value in zip(formulas, got):
            assert value in (ZERO, ONE)
            assert (value == ONE) == models(pg, f)


def test_boolean_layer_output_order_matches_input_order():
    net = build_boolean_layer([Prop(1), Prop(0)], 2)
    assert fnn_eval(net, [1, 0] + [0] * 6) == [ZERO, ONE]


# ---------------------------------------------------------------------------
# Global nonnegativity


def test_every_gadget_output_is_nonnegative_on_random_inputs():
    rng = random.Random("nonneg")
    gadgets = [
        (gadget_not(rat(1, 3)), 1),
        (gadget_and(rat(1, 5)), 2),
        (gadget_mask_mul(), 2),
        (gadget_min(rat(1, 7)), 1),
        (gadget_shift(rat(2, 3)), 1),
        (gadget_term_check([2, -1], 3, rat(1, 4), rat(1, 8)), 2),
    ]
    for net, arity in gadgets:
        for _ in range(50):
            inputs = [rat(rng.randint(0, 40), rng.randint(1, 8)) for _ in range(arity)]
            for value in fnn_eval(net, inputs):
                assert value >= 0
