"""Formula-to-network compilation facade.

Each compilation target pairs a formula fragment with the graph class it
is guaranteed on and the aggregators the network may use.  ``compile``
dispatches to the matching builder, checks the layer budget, and wraps
the result in a report (layer count, certainty exponent, class tag,
fragment tags, dimension map) suitable for printing next to the network.

Targets:

========================  =======================  ========================
name                      formula fragment          judged graph class
========================  =======================  ========================
global-homogeneous        top-only, homogeneous,    all pointed graphs
                          depth <= 1 (inverted)
global-shallow            top-only, depth <= 1      marked focus
global-deep               top-only, any depth       marked focus
local-mean-regular        edge-only, depth <= 1     regular, strongly marked
local-mixed-sum/-max      edge-only, depth <= 1     strongly marked
shallow-mixed-regular     any modality, depth <= 1  regular, strongly marked
shallow-mixed-sum/-max    any modality, depth <= 1  strongly marked
nested-mean-regular       edge-only, depth-critical regular tree-like
nested-mixed-sum/-max     edge-only, depth-critical tree-like
========================  =======================  ========================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from ..logic import (
    FragmentTags,
    PmlFormula,
    classify,
    degree,
    flatten_global,
    modal_depth,
    subformulas_ordered,
    trace_index,
)
from ..mpnn import Aggregator, CertaintyDescriptor, Mpnn
from .build import FragmentMismatch, TraceLimitExceeded
from .nested import build_nested
from .shallow import (
    build_global_deep,
    build_global_homogeneous,
    build_global_shallow,
    build_local_mean,
    build_local_mixed,
    build_shallow_mixed,
)

__all__ = [
    "ALL_TARGETS",
    "Aggregator",
    "CompilationReport",
    "CompilationTarget",
    "FragmentMismatch",
    "TraceLimitExceeded",
    "build_global_deep",
    "build_global_homogeneous",
    "build_global_shallow",
    "build_local_mean",
    "build_local_mixed",
    "build_nested",
    "build_shallow_mixed",
    "certainty_of",
    "compile",
    "format_report",
    "parse_target",
]

_EXTRA_NAME = {Aggregator.SUM: "sum", Aggregator.MAX: "max"}

_PLAIN_KINDS = (
    "global-homogeneous",
    "global-shallow",
    "global-deep",
    "local-mean-regular",
    "shallow-mixed-regular",
    "nested-mean-regular",
)
_MIXED_KINDS = ("local-mixed", "shallow-mixed", "nested-mixed")

# Layer budget per target kind: global/local/shallow bounds are a*deg+b,
# nested bounds a*md*max(deg, 1)+b (the floor covers constraint-free
# formulas, whose pipelines still need their setup and check layers).
_BUDGETS = {
    "global-homogeneous": ("exact", 1, 1),
    "global-shallow": ("ceiling", 2, 2),
    "global-deep": ("ceiling", 2, 2),
    "local-mean-regular": ("ceiling", 2, 2),
    "local-mixed": ("ceiling", 4, 2),
    "shallow-mixed-regular": ("ceiling", 8, 2),
    "shallow-mixed": ("ceiling", 8, 2),
    "nested-mean-regular": ("ceiling", 5, 2),
    "nested-mixed": ("ceiling", 5, 2),
}


@dataclass(frozen=True)
class CompilationTarget:
    """One compilation mode: fragment, graph class, and aggregator budget."""

    kind: str
    extra: Optional[Aggregator] = None

    def __post_init__(self) -> None:
        if self.kind in _PLAIN_KINDS:
            if self.extra is not None:
                raise ValueError(f"target {self.kind!r} is mean-only")
        elif self.kind in _MIXED_KINDS:
            if self.extra not in (Aggregator.SUM, Aggregator.MAX):
                raise ValueError(
                    f"target {self.kind!r} needs an extra aggregator, sum or max"
                )
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")

    @property
    def name(self) -> str:
        """Canonical hyphenated name, e.g. ``local-mixed-sum``."""
        if self.extra is None:
            return self.kind
        return f"{self.kind}-{_EXTRA_NAME[self.extra]}"


ALL_TARGETS: Tuple[CompilationTarget, ...] = (
    CompilationTarget("global-homogeneous"),
    CompilationTarget("global-shallow"),
    CompilationTarget("global-deep"),
    CompilationTarget("local-mean-regular"),
    CompilationTarget("local-mixed", Aggregator.SUM),
    CompilationTarget("local-mixed", Aggregator.MAX),
    CompilationTarget("shallow-mixed-regular"),
    CompilationTarget("shallow-mixed", Aggregator.SUM),
    CompilationTarget("shallow-mixed", Aggregator.MAX),
    CompilationTarget("nested-mean-regular"),
    CompilationTarget("nested-mixed", Aggregator.SUM),
    CompilationTarget("nested-mixed", Aggregator.MAX),
)


def parse_target(name: str) -> CompilationTarget:
    """Resolve a canonical target name; raise ValueError with the list."""
    for target in ALL_TARGETS:
        if target.name == name:
            return target
    known = ", ".join(t.name for t in ALL_TARGETS)
    raise ValueError(f"unknown target {name!r}; known targets: {known}")


@dataclass(frozen=True)
class CompilationReport:
    """Everything about a compiled network except its weights."""

    target: str
    layer_count: int
    exponent: int
    inverted: bool
    required_class: str
    modal_depth: int
    degree: int
    fragment: FragmentTags
    budget_kind: str
    budget_bound: int
    dimension_names: Tuple[Tuple[str, ...], ...]
    notes: Tuple[str, ...] = ()


def compile(
    phi: PmlFormula,
    target: Union[CompilationTarget, str],
    trace_cap: int = 8,
) -> Tuple[Mpnn, CompilationReport]:
    """Translate ``phi`` for ``target``; check the layer budget; report.

    Raises FragmentMismatch when the formula lies outside the target's
    fragment and TraceLimitExceeded when a nested compilation would need
    more than ``trace_cap`` trace dimensions.
    """
    if isinstance(target, str):
        target = parse_target(target)
    kind = target.kind
    if kind == "global-homogeneous":
        net = build_global_homogeneous(phi)
    elif kind == "global-shallow":
        net = build_global_shallow(phi)
    elif kind == "global-deep":
        net = build_global_deep(phi)
    elif kind == "local-mean-regular":
        net = build_local_mean(phi)
    elif kind == "local-mixed":
        net = build_local_mixed(phi, target.extra)
    elif kind == "shallow-mixed-regular":
        net = build_shallow_mixed(phi)
    elif kind == "shallow-mixed":
        net = build_shallow_mixed(phi, target.extra)
    elif kind == "nested-mean-regular":
        net = build_nested(phi, None, trace_cap)
    else:
        net = build_nested(phi, target.extra, trace_cap)

    md, deg = modal_depth(phi), degree(phi)
    budget_kind, a, b = _BUDGETS[kind]
    if kind.startswith("nested"):
        bound = a * md * max(deg, 1) + b
    else:
        bound = a * deg + b
    layers = len(net.layers)
    if budget_kind == "exact":
        assert layers == bound, f"{target.name}: {layers} layers, budget {bound}"
    else:
        assert layers <= bound, f"{target.name}: {layers} layers, budget {bound}"

    notes: List[str] = []
    if kind == "global-deep":
        flat = flatten_global(phi)
        notes.append(
            f"flattened to modal depth {modal_depth(flat)} "
            f"with {len(subformulas_ordered(flat))} subformulas"
        )
    if kind.startswith("nested"):
        notes.append(f"trace index size {len(trace_index(phi))}")

    assert net.dimension_names is not None
    report = CompilationReport(
        target=target.name,
        layer_count=layers,
        exponent=net.certainty.exponent,
        inverted=net.inverted,
        required_class=net.required_class,
        modal_depth=md,
        degree=deg,
        fragment=classify(phi),
        budget_kind=budget_kind,
        budget_bound=bound,
        dimension_names=net.dimension_names,
        notes=tuple(notes),
    )
    return net, report


def certainty_of(report: CompilationReport) -> CertaintyDescriptor:
    """Recognition certainty c(n) = n^(-e) promised by a compilation."""
    return CertaintyDescriptor(report.exponent)


def format_report(report: CompilationReport) -> str:
    """Line-oriented text rendering of a report, dimension map included."""
    tags = report.fragment
    lines = [
        f"target {report.target}",
        f"layers {report.layer_count}",
        f"certainty-exponent {report.exponent}",
        f"inverted {1 if report.inverted else 0}",
        f"class {report.required_class}",
        f"modal-depth {report.modal_depth}",
        f"degree {report.degree}",
        "fragment"
        f" top-only={1 if tags.only_top else 0}"
        f" edges-only={1 if tags.only_edges else 0}"
        f" homogeneous={1 if tags.homogeneous else 0}",
        f"budget {report.budget_kind} {report.budget_bound}",
    ]
    for note in report.notes:
        lines.append(f"note {note}")
    lines.append("dimensions")
    for i, names in enumerate(report.dimension_names, start=1):
        lines.append(f"  {i}: {' '.join(names)}")
    return "\n".join(lines) + "\n"
