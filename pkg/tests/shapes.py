"""Canonical pointed-graph shapes for the depth-2 out-only formula.

Colour 0 is the proposition p0; colour 1 marks the focus.  Self-loops are
included explicitly wherever a trace-respecting walk prefix demands one, so
the two member shapes genuinely satisfy the tree-like class predicate and
the two non-member shapes fail it solely through an indistinct neighbour
pair.
"""

from pmlc.graphs import Graph, PointedGraph
from pmlc.logic import parse_formula

OUT_OUT = parse_formula("<out>{x1 >= 1}(<out>{x1 >= 1}(p0))")


def binary_out_tree() -> PointedGraph:
    """Member: focus root, two internal children, four leaves carrying p0."""
    edges = {(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)}
    labels = (
        (0, 1),  # focus (marked)
        (0, 0),
        (0, 0),
        (1, 0),
        (1, 0),
        (1, 0),
        (1, 0),
    )
    return PointedGraph(Graph(7, 2, frozenset(edges), labels), 0)


def directed_triangle() -> PointedGraph:
    """Member, and regular: 3-cycle with self-loops everywhere."""
    edges = {(0, 1), (1, 2), (2, 0), (0, 0), (1, 1), (2, 2)}
    labels = ((0, 1), (1, 0), (1, 0))
    return PointedGraph(Graph(3, 2, frozenset(edges), labels), 0)


def converging_diamond() -> PointedGraph:
    """Non-member: the two middle nodes reach the sink and share trace sets."""
    edges = {(0, 1), (0, 2), (1, 3), (2, 3), (0, 0), (1, 1), (2, 2)}
    labels = ((0, 1), (0, 0), (0, 0), (1, 0))
    return PointedGraph(Graph(4, 2, frozenset(edges), labels), 0)


def biloop_star() -> PointedGraph:
    """Non-member: two mutual neighbours of the focus share trace sets."""
    edges = {(0, 1), (1, 0), (0, 2), (2, 0), (0, 0), (1, 1), (2, 2)}
    labels = ((0, 1), (1, 0), (1, 0))
    return PointedGraph(Graph(3, 2, frozenset(edges), labels), 0)


def loopless_tree() -> PointedGraph:
    """Depth-2 out-tree with no self-loops: fails via the walk-prefix rule."""
    edges = {(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)}
    labels = (
        (0, 1),
        (0, 0),
        (0, 0),
        (1, 0),
        (1, 0),
        (1, 0),
        (1, 0),
    )
    return PointedGraph(Graph(7, 2, frozenset(edges), labels), 0)
