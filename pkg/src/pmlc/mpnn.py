"""Message-passing networks: data model, exact evaluator, judge, file format.

A network is a stack of layers, each pairing a combination Fnn with three
aggregators — one over in-neighbour states, one over out-neighbour states,
one over all node states.  Evaluation is synchronous and exact: every node's
next state is the comb applied to

    [previous state || in-aggregate || out-aggregate || global aggregate]

so the comb input width is always four times the state width.  Judgement
reads the focus node's last state dimension and compares it against the
recognition value n^(-e): compiled networks either hit it exactly or land
on exactly 0, and anything else is reported as malformed rather than
rounded.  Networks carry their own acceptance contract (certainty exponent,
inverted flag, required graph class, mark colour, source formula), so a
serialized network file is self-describing.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .graphs import (
    Graph,
    PointedGraph,
    check_tree_like,
    is_marked,
    is_regular,
    is_strongly_marked,
    neigh,
)
from .net import (
    Fnn,
    FnnLayer,
    Rational,
    ZERO,
    fnn_eval,
    format_rational,
    parse_rational,
    rat,
)


class Aggregator(enum.Enum):
    MEAN = "mean"
    SUM = "sum"
    MAX = "max"


def aggregate(
    a: Aggregator, values: Iterable[Sequence[Rational]], dim: int
) -> list[Rational]:
    """Combine a multiset of state vectors; the empty multiset gives zeros."""
    rows = list(values)
    for row in rows:
        if len(row) != dim:
            raise ValueError(f"expected vectors of length {dim}")
    if not rows:
        return [ZERO] * dim
    if a is Aggregator.MAX:
        return [max(row[i] for row in rows) for i in range(dim)]
    totals = [ZERO] * dim
    for row in rows:
        for i, x in enumerate(row):
            totals[i] += x
    if a is Aggregator.SUM:
        return totals
    share = rat(1, len(rows))
    return [t * share for t in totals]


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class CertaintyDescriptor:
    """Recognition certainty c(n) = n^(-exponent); exponent 0 means 1."""

    exponent: int

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError("certainty exponent must be a natural number")

    def value(self, node_count: int) -> Rational:
        return rat(1, node_count ** self.exponent)


@dataclass(frozen=True)
class MpnnLayer:
    comb: Fnn
    loc_in: Aggregator
    loc_out: Aggregator
    glob: Aggregator
    in_dim: int
    out_dim: int

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        if self.comb.input_dim != 4 * self.in_dim:
            raise ValueError(
                "comb input width must be 4 * state width "
                f"({self.comb.input_dim} != {4 * self.in_dim})"
            )
        if self.comb.output_dim != self.out_dim:
            raise ValueError("comb output width disagrees with out_dim")


CLASS_TAGS = (
    "any",
    "marked",
    "strong",
    "regular-strong",
    "tree-like",
    "regular-tree-like",
)


@dataclass(frozen=True)
class Mpnn:
    colours: int
    layers: tuple[MpnnLayer, ...]
    certainty: CertaintyDescriptor
    inverted: bool
    required_class: str
    mark_colour: Optional[int] = None
    formula_text: Optional[str] = None
    dimension_names: Optional[tuple[tuple[str, ...], ...]] = None

    def __post_init__(self) -> None:
        if self.colours < 1:
            raise ValueError("need at least one colour")
        if self.required_class not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.required_class!r}")
        width = self.colours
        for layer in self.layers:
            if layer.in_dim != width:
                raise ValueError("layer input widths do not chain")
            width = layer.out_dim
        if self.dimension_names is not None:
            if len(self.dimension_names) != len(self.layers):
                raise ValueError("dimension names must cover every layer")
            for names, layer in zip(self.dimension_names, self.layers):
                if len(names) != layer.out_dim:
                    raise ValueError("dimension name row width mismatch")
                for name in names:
                    if not name or any(ch.isspace() for ch in name):
                        raise ValueError(f"bad dimension name {name!r}")
        needs_mark = self.required_class not in ("any",)
        if needs_mark and self.mark_colour is None:
            raise ValueError(f"class {self.required_class!r} needs a mark colour")
        if self.mark_colour is not None and not 0 <= self.mark_colour < self.colours:
            raise ValueError("mark colour out of range")
        if self.required_class in ("tree-like", "regular-tree-like"):
            if self.formula_text is None:
                raise ValueError("tree-like classes need the source formula")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.colours


# ---------------------------------------------------------------------------
# Evaluation


def _states_after(m: Mpnn, g: Graph, keep_trace: bool):
    if g.colours != m.colours:
        raise ValueError(
            f"graph has {g.colours} colours, network expects {m.colours}"
        )
    nodes = range(g.node_count)
    states: list[list[Rational]] = [[rat(b) for b in g.labels[v]] for v in nodes]
    trace = [states]
    ins = [neigh(g, v, "in") for v in nodes]
    outs = [neigh(g, v, "out") for v in nodes]
    for layer in m.layers:
        glob = aggregate(layer.glob, states, layer.in_dim)
        nxt = []
        for v in nodes:
            agg_in = aggregate(
                layer.loc_in, (states[u] for u in ins[v]), layer.in_dim
            )
            agg_out = aggregate(
                layer.loc_out, (states[u] for u in outs[v]), layer.in_dim
            )
            nxt.append(fnn_eval(layer.comb, states[v] + agg_in + agg_out + glob))
        states = nxt
        if keep_trace:
            trace.append(states)
    return trace if keep_trace else states


def mpnn_eval(m: Mpnn, g: Graph) -> list[list[Rational]]:
    """Final state vector of every node after all synchronous rounds."""
    return _states_after(m, g, keep_trace=False)


def mpnn_eval_traced(m: Mpnn, g: Graph) -> list[list[list[Rational]]]:
    """All intermediate state tables: entry 0 is the labels, entry L is final."""
    return _states_after(m, g, keep_trace=True)


# ---------------------------------------------------------------------------
# Judgement


class ClassViolation(Exception):
    """The judged graph is outside the network's required class."""


@dataclass(frozen=True)
class Verdict:
    kind: str  # "accept" | "reject" | "malformed"
    value: Rational

    @property
    def accepted(self) -> bool:
        return self.kind == "accept"


def check_required_class(m: Mpnn, pg: PointedGraph) -> None:
    """Raise ClassViolation unless pg belongs to m.required_class."""
    tag = m.required_class
    if tag == "any":
        return
    g, v, colour = pg.graph, pg.focus, m.mark_colour
    if tag == "marked":
        if not is_marked(g, v, colour):
            raise ClassViolation(f"focus {v} is not uniquely marked")
        return
    if tag in ("strong", "regular-strong"):
        if not is_strongly_marked(g, v, colour):
            raise ClassViolation(f"focus {v} is not strongly marked")
        if tag == "regular-strong" and not is_regular(g):
            raise ClassViolation("graph is not regular")
        return
    # tree-like variants
    from .logic import parse_formula

    phi = parse_formula(m.formula_text)
    ok, witness = check_tree_like(phi, pg, colour)
    if not ok:
        raise ClassViolation(f"graph is not tree-like for the formula: {witness}")
    if tag == "regular-tree-like" and not is_regular(g):
        raise ClassViolation("graph is not regular")


def judge(m: Mpnn, pg: PointedGraph) -> Verdict:
    """Read the focus's last dimension and map it to a verdict.

    Normal networks accept at exactly n^(-e) and reject at exactly 0.
    Inverted networks (the homogeneous construction) accept at 0, reject at
    any value >= n^(-e), and values strictly in between are malformed.
    """
    check_required_class(m, pg)
    states = mpnn_eval(m, pg.graph)
    value = states[pg.focus][-1]
    target = m.certainty.value(pg.graph.node_count)
    if m.inverted:
        if value == ZERO:
            return Verdict("accept", value)
        if value >= target:
            return Verdict("reject", value)
        return Verdict("malformed", value)
    if value == target:
        return Verdict("accept", value)
    if value == ZERO:
        return Verdict("reject", value)
    return Verdict("malformed", value)


# ---------------------------------------------------------------------------
# Serialization


class MpnnFormatError(ValueError):
    pass


def print_mpnn(m: Mpnn) -> str:
    lines = ["mpnn"]
    lines.append(f"colours {m.colours}")
    lines.append(f"certainty {m.certainty.exponent}")
    lines.append(f"inverted {1 if m.inverted else 0}")
    lines.append(f"class {m.required_class}")
    lines.append(f"markcolour {'-' if m.mark_colour is None else m.mark_colour}")
    lines.append(f"formula {'-' if m.formula_text is None else m.formula_text}")
    lines.append(f"layers {len(m.layers)}")
    for i, layer in enumerate(m.layers):
        lines.append(
            f"layer {i} {layer.loc_in.value} {layer.loc_out.value} "
            f"{layer.glob.value} {layer.in_dim} {layer.out_dim}"
        )
        if m.dimension_names is not None:
            lines.append("dims " + " ".join(m.dimension_names[i]))
        lines.append(f"fnn {len(layer.comb.layers)}")
        for fl in layer.comb.layers:
            lines.append(f"fnnlayer {fl.input_dim} {len(fl.neurons)}")
            for bias, weights in fl.neurons:
                parts = [f"neuron {format_rational(bias)}"]
                parts.extend(f"{idx}:{format_rational(w)}" for idx, w in weights)
                lines.append(" ".join(parts))
    lines.append("end")
    return "\n".join(lines) + "\n"


class _LineReader:
    def __init__(self, text: str):
        self.lines = [
            ln.strip()
            for ln in text.splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
        self.pos = 0

    def next(self, expect: Optional[str] = None) -> str:
        if self.pos >= len(self.lines):
            raise MpnnFormatError("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        if expect is not None and not line.startswith(expect):
            raise MpnnFormatError(f"expected {expect!r}, found {line!r}")
        return line

    def peek(self) -> Optional[str]:
        return self.lines[self.pos] if self.pos < len(self.lines) else None


def _int_field(line: str, name: str) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != name:
        raise MpnnFormatError(f"malformed {name!r} line: {line!r}")
    try:
        return int(parts[1])
    except ValueError as exc:
        raise MpnnFormatError(f"bad integer in {line!r}") from exc


def parse_mpnn(text: str) -> Mpnn:
    r = _LineReader(text)
    if r.next() != "mpnn":
        raise MpnnFormatError("missing mpnn header")
    colours = _int_field(r.next("colours"), "colours")
    exponent = _int_field(r.next("certainty"), "certainty")
    inverted_flag = _int_field(r.next("inverted"), "inverted")
    if inverted_flag not in (0, 1):
        raise MpnnFormatError("inverted flag must be 0 or 1")
    class_line = r.next("class").split()
    if len(class_line) != 2:
        raise MpnnFormatError("malformed class line")
    required_class = class_line[1]
    mark_line = r.next("markcolour").split()
    if len(mark_line) != 2:
        raise MpnnFormatError("malformed markcolour line")
    mark_colour = None if mark_line[1] == "-" else int(mark_line[1])
    formula_line = r.next("formula")
    formula_rest = formula_line[len("formula"):].strip()
    formula_text = None if formula_rest == "-" else formula_rest
    layer_count = _int_field(r.next("layers"), "layers")
    layers = []
    dim_rows: list[tuple[str, ...]] = []
    saw_dims = False
    try:
        for i in range(layer_count):
            head = r.next("layer").split()
            if len(head) != 7 or int(head[1]) != i:
                raise MpnnFormatError(f"malformed layer header: {head!r}")
            loc_in, loc_out, glob = (Aggregator(x) for x in head[2:5])
            in_dim, out_dim = int(head[5]), int(head[6])
            nxt = r.peek()
            if nxt is not None and nxt.startswith("dims"):
                saw_dims = True
                dim_rows.append(tuple(r.next().split()[1:]))
            elif saw_dims:
                raise MpnnFormatError("dims rows must cover all layers or none")
            fnn_layers = _int_field(r.next("fnn"), "fnn")
            fls = []
            for _ in range(fnn_layers):
                fh = r.next("fnnlayer").split()
                if len(fh) != 3:
                    raise MpnnFormatError(f"malformed fnnlayer line: {fh!r}")
                input_dim, neuron_count = int(fh[1]), int(fh[2])
                neurons = []
                for _ in range(neuron_count):
                    parts = r.next("neuron").split()
                    bias = parse_rational(parts[1])
                    weights = []
                    for w in parts[2:]:
                        idx_text, _, num_text = w.partition(":")
                        weights.append((int(idx_text), parse_rational(num_text)))
                    neurons.append((bias, tuple(weights)))
                fls.append(FnnLayer(input_dim, tuple(neurons)))
            layers.append(
                MpnnLayer(Fnn(tuple(fls)), loc_in, loc_out, glob, in_dim, out_dim)
            )
        if r.next() != "end":
            raise MpnnFormatError("missing end line")
        if r.peek() is not None:
            raise MpnnFormatError(f"trailing content: {r.peek()!r}")
        return Mpnn(
            colours=colours,
            layers=tuple(layers),
            certainty=CertaintyDescriptor(exponent),
            inverted=bool(inverted_flag),
            required_class=required_class,
            mark_colour=mark_colour,
            formula_text=formula_text,
            dimension_names=tuple(dim_rows) if saw_dims else None,
        )
    except MpnnFormatError:
        raise
    except (ValueError, IndexError) as exc:
        raise MpnnFormatError(f"malformed network file: {exc}") from exc


# ---------------------------------------------------------------------------
# Random networks (for the inexpressibility demo and invariance tests)


def random_mpnn(
    rng: random.Random,
    colours: int,
    max_layers: int = 3,
    max_dim: int = 3,
    aggregators: Sequence[Aggregator] = (Aggregator.MEAN,),
) -> Mpnn:
    """A dense random network with rational weights; class-free metadata."""

    def coeff() -> Rational:
        return rat(rng.randint(-3, 3), rng.randint(1, 4))

    layers = []
    width = colours
    for _ in range(rng.randint(1, max_layers)):
        out_dim = rng.randint(1, max_dim)
        neurons = tuple(
            (
                coeff(),
                tuple((i, coeff()) for i in range(4 * width)),
            )
            for _ in range(out_dim)
        )
        comb = Fnn((FnnLayer(4 * width, neurons),))
        layers.append(
            MpnnLayer(
                comb,
                rng.choice(list(aggregators)),
                rng.choice(list(aggregators)),
                rng.choice(list(aggregators)),
                width,
                out_dim,
            )
        )
        width = out_dim
    return Mpnn(
        colours=colours,
        layers=tuple(layers),
        certainty=CertaintyDescriptor(0),
        inverted=False,
        required_class="any",
    )
