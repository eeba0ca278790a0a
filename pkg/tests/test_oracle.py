"""Reference semantics: constraint evaluation and modal satisfaction."""

import random

import pytest

from pmlc.graphs import Graph, PointedGraph, gen_pointed, neigh
from pmlc.logic import (
    Modality,
    flatten_global,
    parse_formula,
    parse_peano,
)
from pmlc.oracle import (
    all_pointed_graphs,
    eval_peano,
    modality_extension,
    models,
)

from formula_gen import random_formula


def graph_of(n, colours, edges, labels):
    return Graph(n, colours, frozenset(edges), tuple(tuple(b) for b in labels))


# ---------------------------------------------------------------------------
# Constraint evaluation


def test_eval_peano_cubic():
    psi = parse_peano("x1*x1*x1 - x2*x2*x3 <= 0")
    assert eval_peano(psi, (3, 2, 2)) is False  # 27 - 8 = 19 > 0
    assert eval_peano(psi, (0, 0, 0)) is True
    assert eval_peano(psi, (2, 2, 2)) is True  # 8 - 8 = 0


def test_eval_peano_negation():
    psi = parse_peano("x1 >= 2")
    assert eval_peano(psi, (2,)) is True
    assert eval_peano(psi, (1,)) is False


def test_eval_peano_conjunction_and_equality():
    psi = parse_peano("x1 = 2")
    assert [eval_peano(psi, (k,)) for k in range(4)] == [False, False, True, False]


def test_eval_peano_arity_mismatch():
    with pytest.raises(ValueError):
        eval_peano(parse_peano("x2 <= 1"), (3,))


def test_eval_peano_ignores_spare_values():
    assert eval_peano(parse_peano("x1 <= 1"), (1, 99)) is True


# ---------------------------------------------------------------------------
# Modality extension


def test_modality_extension():
    g = graph_of(4, 1, {(1, 0), (0, 2)}, [[0]] * 4)
    pg = PointedGraph(g, 0)
    assert modality_extension(Modality.TOP, pg) == (0, 1, 2, 3)
    assert modality_extension(Modality.ID, pg) == (0,)
    assert modality_extension(Modality.E_IN, pg) == (1,)
    assert modality_extension(Modality.E_OUT, pg) == (2,)


# ---------------------------------------------------------------------------
# Satisfaction


def lemma_pair():
    """Two edge-free graphs separating 'at least two p0 nodes': one of two
    nodes labelled p0 versus two of four."""
    g1 = graph_of(2, 1, set(), [[1], [0]])
    g2 = graph_of(4, 1, set(), [[1], [1], [0], [0]])
    return PointedGraph(g1, 0), PointedGraph(g2, 0)


def test_models_counting_pair():
    phi = parse_formula("<top>{x1 >= 2}(p0)")
    pg1, pg2 = lemma_pair()
    assert models(pg1, phi) is False
    assert models(pg2, phi) is True


def test_models_prop():
    g = graph_of(2, 1, set(), [[1], [0]])
    assert models(PointedGraph(g, 0), parse_formula("p0")) is True
    assert models(PointedGraph(g, 1), parse_formula("p0")) is False


def test_models_colour_out_of_range():
    g = graph_of(1, 1, set(), [[1]])
    with pytest.raises(ValueError):
        models(PointedGraph(g, 0), parse_formula("p1"))


def test_models_id_modality():
    # <id>{x1 >= 1}(p0) holds exactly where p0 does.
    phi = parse_formula("<id>{x1 >= 1}(p0)")
    g = graph_of(2, 1, set(), [[1], [0]])
    assert models(PointedGraph(g, 0), phi) is True
    assert models(PointedGraph(g, 1), phi) is False


def test_models_edge_modalities():
    # Focus satisfies "at least one out-neighbour with p0, no in-neighbour
    # with p0" on a 2-path.
    phi = parse_formula("<out,in>{(x1 >= 1 & x2 <= 0)}(p0,p0)")
    g = graph_of(3, 1, {(0, 1), (1, 2)}, [[0], [1], [0]])
    assert models(PointedGraph(g, 0), phi) is True
    assert models(PointedGraph(g, 1), phi) is False


def test_models_nested():
    phi = parse_formula("<out>{x1 >= 1}(<out>{x1 >= 1}(p0))")
    g = graph_of(3, 1, {(0, 1), (1, 2)}, [[0], [0], [1]])
    assert models(PointedGraph(g, 0), phi) is True
    assert models(PointedGraph(g, 1), phi) is False
    assert models(PointedGraph(g, 2), phi) is False


@pytest.mark.parametrize("seed", range(30))
def test_models_boolean_laws(seed):
    rng = random.Random(f"laws-{seed}")
    pg = gen_pointed(seed, 5, 2, 0.4)
    phi = random_formula(rng, 2, list(Modality))
    chi = random_formula(rng, 1, list(Modality))
    from pmlc.logic import And, Not

    assert models(pg, Not(phi)) == (not models(pg, phi))
    assert models(pg, And(phi, chi)) == (models(pg, phi) and models(pg, chi))


def test_models_direct_counting_cross_check():
    # With constraint x1 <= K the modal node is a thresholded count.
    for seed in range(20):
        pg = gen_pointed(seed, 6, 2, 0.35)
        g = pg.graph
        for pi, direction in [
            (Modality.E_IN, "in"),
            (Modality.E_OUT, "out"),
        ]:
            for k in range(3):
                phi = parse_formula(
                    f"<{pi.surface}>{{x1 <= {k}}}(p0)"
                )
                expected = (
                    sum(
                        1
                        for u in neigh(g, pg.focus, direction)
                        if g.labels[u][0] == 1
                    )
                    <= k
                )
                assert models(pg, phi) == expected


def test_models_memoization_consistency():
    # Deeply shared subformulas: repeated evaluation stays consistent.
    phi = parse_formula("(<top>{x1 >= 1}(p0) & !<top>{x1 >= 1}(p0))")
    g = graph_of(3, 1, set(), [[1], [0], [0]])
    assert models(PointedGraph(g, 0), phi) is False


# ---------------------------------------------------------------------------
# Global-fragment properties


def _focus_blind(phi):
    """True when every proposition occurrence sits under a modal node, so an
    all-top formula's verdict cannot depend on the focus."""
    from pmlc.logic import And, Modal, Not, Prop

    if isinstance(phi, Prop):
        return False
    if isinstance(phi, Not):
        return _focus_blind(phi.operand)
    if isinstance(phi, And):
        return _focus_blind(phi.left) and _focus_blind(phi.right)
    return True


def test_models_focus_invariant_for_top_formulas():
    rng = random.Random("focus-invariance")
    checked = 0
    while checked < 25:
        phi = random_formula(rng, 2, [Modality.TOP])
        if not _focus_blind(phi):
            continue  # bare root-level propositions do read the focus label
        checked += 1
        pg = gen_pointed(rng.randrange(10**6), 5, 2, 0.4)
        verdicts = {
            models(PointedGraph(pg.graph, v), phi)
            for v in range(pg.graph.node_count)
        }
        assert len(verdicts) == 1


def test_models_focus_invariant_exhaustive_edge_free():
    phi = parse_formula("<top>{x1 >= 2}(p0)")
    for pg in all_pointed_graphs(5, 1, edges=False):
        base = models(PointedGraph(pg.graph, 0), phi)
        assert models(pg, phi) == base


def test_flatten_global_preserves_semantics_fixed():
    phi = parse_formula("<top>{x1 <= 0}(<top>{x1 >= 1}(p0))")
    flat = flatten_global(phi)
    for pg in all_pointed_graphs(4, 1, edges=False):
        assert models(pg, phi) == models(pg, flat)


@pytest.mark.parametrize("seed", range(12))
def test_flatten_global_preserves_semantics_random(seed):
    rng = random.Random(f"flatten-{seed}")
    # Single-child chains keep the guessed-subformula count (and hence the
    # disjunction blow-up) small while still exercising depth 3.
    phi = random_formula(
        rng, 3, [Modality.TOP], props=2, max_degree=2, max_children=1
    )
    flat = flatten_global(phi)
    # Global formulas ignore edges, so edge-free enumeration is exhaustive
    # up to semantics.
    for pg in all_pointed_graphs(4, 2, edges=False):
        assert models(pg, phi) == models(pg, flat)


def test_models_with_edges_small_exhaustive():
    # Edge semantics sanity on every 2-node pointed graph with edges.
    phi = parse_formula("<out>{x1 >= 1}(p0)")
    for pg in all_pointed_graphs(2, 1, edges=True):
        expected = any(
            pg.graph.labels[u][0] == 1
            for u in neigh(pg.graph, pg.focus, "out")
        )
        assert models(pg, phi) == expected
