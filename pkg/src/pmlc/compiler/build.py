"""Shared layer-assembly machinery for the formula compilers.

Networks are assembled layer by layer over *named dimensions*.  Each layer
is a combination Fnn reading the standard concatenated port layout
[previous state, in-aggregate, out-aggregate, global aggregate]; the
builder tracks dimension names so a value written under a name in one
layer can be read back (directly or through an aggregation port) in the
next.  All intermediate values are nonnegative by construction, which is
what keeps the ReLU identity-carries and the masking gadgets sound.

Scale conventions used throughout the builders:

* flags are 0/1; ``mask01(y, flag)`` multiplies a value ``y`` in [0, 1] by
  a 0/1 flag;
* truth values at a scale ``s`` (held in a reference dimension, never in a
  bias, because ``s`` depends on the graph size) live in {0, s}; the
  Boolean gadgets ``not_at``/``and_at`` and the flag lift ``flag_at``
  operate at such a scale;
* ``atom_check`` turns accumulated monomial values (all scaled by a common
  unit ``u``) into a truth value at scale ``r2``; integrality of the
  underlying counts guarantees a violated atom overshoots ``r2``.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..logic import (
    And,
    Modal,
    Not,
    PeanoAnd,
    PeanoAtom,
    PeanoNot,
    PmlFormula,
    modal_depth,
    subformulas_ordered,
)
from ..mpnn import Aggregator, CertaintyDescriptor, Mpnn, MpnnLayer
from ..net import Circuit, Ref, boolean_refs


class FragmentMismatch(ValueError):
    """The formula lies outside the fragment a target can compile."""


class TraceLimitExceeded(FragmentMismatch):
    """The nested construction would need more trace dimensions than the
    configured cap allows."""


# ---------------------------------------------------------------------------
# Layer assembly


class LayerPlan:
    """One message-passing layer under construction.

    Wraps a :class:`Circuit` whose inputs are the 4*D combination ports of
    the previous layer's D named dimensions.  Outputs are declared in
    order; the dimension written last is the network's verdict dimension
    when this is the final layer.
    """

    def __init__(
        self,
        builder: "NetBuilder",
        in_names: Sequence[str],
        loc_in: Aggregator,
        loc_out: Aggregator,
        glob: Aggregator,
    ):
        self._b = builder
        self._index = {nm: i for i, nm in enumerate(in_names)}
        self.D = len(in_names)
        self.c = Circuit(
            {f"q{i}": i for i in range(4 * self.D)}, width=4 * self.D
        )
        self.loc_in = loc_in
        self.loc_out = loc_out
        self.glob_agg = glob
        self._declared: set = set()

    # -- ports --------------------------------------------------------

    def _port(self, block: int, name: str) -> Ref:
        try:
            i = self._index[name]
        except KeyError:
            raise KeyError(f"dimension {name!r} does not exist at this layer")
        return self.c.input(f"q{block * self.D + i}")

    def prev(self, name: str) -> Ref:
        return self._port(0, name)

    def agg_in(self, name: str) -> Ref:
        return self._port(1, name)

    def agg_out(self, name: str) -> Ref:
        return self._port(2, name)

    def agg(self, direction: str, name: str) -> Ref:
        if direction == "in":
            return self.agg_in(name)
        if direction == "out":
            return self.agg_out(name)
        raise ValueError(f"unknown direction {direction!r}")

    def glob(self, name: str) -> Ref:
        return self._port(3, name)

    # -- outputs ------------------------------------------------------

    def set(self, name: str, ref: Ref) -> None:
        if name in self._declared:
            raise ValueError(f"dimension {name!r} written twice in one layer")
        self._declared.add(name)
        self.c.output(name, ref)

    def carry(self, *names: str) -> None:
        """Re-emit previous-layer values unchanged (they are nonnegative)."""
        for nm in names:
            self.set(nm, self.relu([(1, self.prev(nm))]))

    def done(self) -> None:
        self._b._commit(self, self.c.build(), self.c.output_names())

    # -- gadgets ------------------------------------------------------

    def relu(self, terms, bias=0) -> Ref:
        return self.c.relu(terms, bias)

    def min_(self, x: Ref, y: Ref) -> Ref:
        return self.c.min_(x, y)

    def mask01(self, y: Ref, flag: Ref) -> Ref:
        """y * flag for y in [0, 1] and flag in {0, 1}."""
        return self.relu([(1, y), (1, flag)], -1)

    def mask_at(self, y: Ref, scale: Ref, value: Ref) -> Ref:
        """y * [value > 0] for y <= scale and value in {0, scale}."""
        return self.relu([(1, y), (-1, scale), (1, value)])

    def flag_at(self, scale: Ref, flag: Ref) -> Ref:
        """Lift a 0/1 flag to {0, scale} for a scale in (0, 1]."""
        return self.relu([(1, scale), (1, flag)], -1)

    def not_at(self, scale: Ref, x: Ref) -> Ref:
        return self.relu([(1, scale), (-1, x)])

    def and_at(self, scale: Ref, x: Ref, y: Ref) -> Ref:
        return self.relu([(1, x), (1, y), (-1, scale)])

    def sum_of(self, refs: Sequence[Ref]) -> Ref:
        return self.relu([(1, r) for r in refs])

    def atom_check(
        self,
        atom: PeanoAtom,
        mono_ref: Callable[[Tuple[int, ...]], Ref],
        unit: Ref,
        r2: Ref,
    ) -> Ref:
        """Truth of ``sum a_i m_i <= b`` at scale r2.

        ``mono_ref`` maps a monomial's variable multiset to the dimension
        holding ``unit * product-of-counts``; the bound rides on the unit
        reference so the check stays valid for graph-size-dependent
        scales.  Requires r2 <= unit wherever the inputs are nonzero;
        count integrality then separates satisfied (x = 0 .. below r2 is
        impossible) from violated (x >= unit >= r2).
        """
        terms: List[Tuple[object, Ref]] = [
            (m.coeff, mono_ref(m.variables)) for m in atom.monomials
        ]
        terms.append((-atom.bound, unit))
        x = self.relu(terms)
        y = self.min_(x, r2)
        return self.relu([(1, r2), (-1, y)])

    def peano_truth(self, psi, atom_ref: Callable[[PeanoAtom], Ref], scale: Ref) -> Ref:
        """Evaluate a constraint over atom truth refs at a common scale."""
        if isinstance(psi, PeanoAtom):
            return atom_ref(psi)
        if isinstance(psi, PeanoNot):
            return self.not_at(scale, self.peano_truth(psi.operand, atom_ref, scale))
        if isinstance(psi, PeanoAnd):
            return self.and_at(
                scale,
                self.peano_truth(psi.left, atom_ref, scale),
                self.peano_truth(psi.right, atom_ref, scale),
            )
        raise TypeError(f"not a constraint: {psi!r}")

    def skeleton_truth(
        self, phi: PmlFormula, leaf: Callable[[PmlFormula], Ref], scale: Ref
    ) -> Ref:
        """Evaluate a formula's Boolean skeleton at a scale.

        ``leaf`` supplies truth refs (already at the scale) for modal
        nodes and for maximal modal-free subformulas; only the Not/And
        structure above them is evaluated here.
        """
        if isinstance(phi, Modal) or modal_depth(phi) == 0:
            return leaf(phi)
        if isinstance(phi, Not):
            return self.not_at(scale, self.skeleton_truth(phi.operand, leaf, scale))
        if isinstance(phi, And):
            return self.and_at(
                scale,
                self.skeleton_truth(phi.left, leaf, scale),
                self.skeleton_truth(phi.right, leaf, scale),
            )
        raise TypeError(f"not a formula: {phi!r}")


class NetBuilder:
    """Accumulates message-passing layers over named dimensions."""

    def __init__(self, colours: int):
        self.colours = colours
        self.layers: List[MpnnLayer] = []
        self.dim_names: List[Tuple[str, ...]] = []
        self._names: Tuple[str, ...] = tuple(f"c{i}" for i in range(colours))

    @property
    def names(self) -> Tuple[str, ...]:
        """Dimension names of the most recent layer (colour bits before
        the first layer is committed)."""
        return self._names

    def layer(
        self,
        loc_in: Aggregator = Aggregator.MEAN,
        loc_out: Aggregator = Aggregator.MEAN,
        glob: Aggregator = Aggregator.MEAN,
    ) -> LayerPlan:
        return LayerPlan(self, self._names, loc_in, loc_out, glob)

    def _commit(self, plan: LayerPlan, fnn, out_names: Tuple[str, ...]) -> None:
        self.layers.append(
            MpnnLayer(
                comb=fnn,
                loc_in=plan.loc_in,
                loc_out=plan.loc_out,
                glob=plan.glob_agg,
                in_dim=plan.D,
                out_dim=len(out_names),
            )
        )
        self._names = out_names
        self.dim_names.append(out_names)

    def finish(
        self,
        *,
        exponent: int,
        inverted: bool,
        required_class: str,
        mark_colour: Optional[int],
        formula_text: str,
    ) -> Mpnn:
        return Mpnn(
            colours=self.colours,
            layers=tuple(self.layers),
            certainty=CertaintyDescriptor(exponent),
            inverted=inverted,
            required_class=required_class,
            mark_colour=mark_colour,
            formula_text=formula_text,
            dimension_names=tuple(self.dim_names),
        )


# ---------------------------------------------------------------------------
# Shared formula bookkeeping


def split_subformulas(phi: PmlFormula):
    """(all subformulas, modal-free ones, modal nodes) in canonical order."""
    subs = subformulas_ordered(phi)
    flats = [s for s in subs if modal_depth(s) == 0]
    modals = [s for s in subs if isinstance(s, Modal)]
    return subs, flats, modals


def flat_names(flats: Sequence[PmlFormula]) -> Dict[PmlFormula, str]:
    return {s: f"f{i}" for i, s in enumerate(flats)}


def write_flags(
    plan: LayerPlan, flats: Sequence[PmlFormula], names: Dict[PmlFormula, str]
) -> Dict[PmlFormula, Ref]:
    """First-layer truth flags for every modal-free subformula."""
    bits = [plan.prev(f"c{i}") for i in range(plan.D)]
    memo = boolean_refs(plan.c, list(flats), bits)
    for s in flats:
        plan.set(names[s], memo[s])
    return memo


def monomial_streams(modals: Sequence[Modal]):
    """Deterministic (modal index, variable multiset) stream table.

    Monomials repeated across atoms of one modal node share a stream; the
    same multiset under a different modal node does not (its positions may
    carry different modalities or children).
    """
    streams: List[Tuple[int, Tuple[int, ...]]] = []
    seen: set = set()
    for j, chi in enumerate(modals):
        for atom in _atoms(chi.constraint):
            for m in atom.monomials:
                key = (j, m.variables)
                if key not in seen:
                    seen.add(key)
                    streams.append(key)
    return streams


def _atoms(psi) -> List[PeanoAtom]:
    if isinstance(psi, PeanoAtom):
        return [psi]
    if isinstance(psi, PeanoNot):
        return _atoms(psi.operand)
    return _atoms(psi.left) + _atoms(psi.right)


def atoms_of(psi) -> List[PeanoAtom]:
    """Atoms of a constraint in evaluation (left-to-right) order."""
    return _atoms(psi)


def degenerate_boolean(
    phi: PmlFormula, colours: int, required_class: str, mark_colour: Optional[int]
) -> Mpnn:
    """Single Boolean layer for modal-free formulas: e = 0, not inverted."""
    from ..logic import print_formula

    nb = NetBuilder(colours)
    _subs, flats, _modals = split_subformulas(phi)
    names = flat_names(flats)
    plan = nb.layer()
    memo = write_flags(plan, flats, names)
    plan.set("out", memo[phi])
    plan.done()
    return nb.finish(
        exponent=0,
        inverted=False,
        required_class=required_class,
        mark_colour=mark_colour,
        formula_text=print_formula(phi),
    )
