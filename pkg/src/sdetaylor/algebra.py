"""Weight maps on trees and the operators of the one-step series calculus.

A weight map assigns an exact polynomial to every tree up to a cutoff order.
It models the coefficients of a formal series over rooted trees: the value at
the empty tree is the series' 0th coefficient.  The module implements

* the composition of two series (insertion of one into the other),
* the inverse for the induced group structure,
* the bilinear operator coupling a series Jacobian with a direction series,
* the defining fixed-point recursion for the weights of an implicit one-step
  method, and
* the three iteration recursions (simple sweep, frozen-Jacobian Newton,
  full Newton) that advance an iterated solution one sweep.

All recursions are solved by strict induction on node count, mirroring why
they are well-founded: every subtree pair other than the two trivial ones
references strictly smaller trees, and the implicit part vanishes on the
empty tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from .poly import ONE, ZERO, Poly, Sym, poly_product
from .trees import (
    EMPTY,
    FTree,
    Tree,
    as_rho2,
    enumerate_trees,
    node_count,
    rho2,
    sort_key,
    subtree_pairs,
)


class CutoffError(ValueError):
    """A weight was requested beyond the map's defined order range."""


@dataclass
class WeightMap:
    """Tree -> polynomial table, defined for every tree up to a cutoff order.

    Queries beyond the cutoff raise CutoffError rather than returning zero:
    truncation is always explicit in this codebase.
    """

    cutoff2: int
    num_colors: int
    empty_value: Poly
    table: dict[Tree, Poly]

    @classmethod
    def build(
        cls,
        cutoff: int | float | Fraction,
        num_colors: int,
        empty_value: Poly | int,
        fn: Callable[[Tree], Poly],
    ) -> WeightMap:
        cutoff2 = as_rho2(cutoff)
        table = {t: fn(t) for t in enumerate_trees(Fraction(cutoff2, 2), num_colors)}
        return cls(cutoff2, num_colors, _as_poly(empty_value), table)

    @classmethod
    def from_entries(
        cls,
        cutoff: int | float | Fraction,
        num_colors: int,
        empty_value: Poly | int,
        entries: dict[Tree, Poly],
    ) -> WeightMap:
        """Build from a sparse dict; trees not listed get the zero weight."""
        for t in entries:
            if rho2(t) > as_rho2(cutoff):
                raise CutoffError(f"entry {t} beyond cutoff {cutoff}")
        return cls.build(cutoff, num_colors, empty_value, lambda t: entries.get(t, ZERO))

    def value(self, tree: Tree) -> Poly:
        if tree.is_empty:
            return self.empty_value
        try:
            return self.table[tree]
        except KeyError:
            raise CutoffError(
                f"tree {tree} of order {Fraction(rho2(tree), 2)} beyond cutoff "
                f"{Fraction(self.cutoff2, 2)}"
            ) from None

    def trees(self) -> list[Tree]:
        return list(self.table)

    def map_values(self, fn: Callable[[Poly], Poly]) -> WeightMap:
        return WeightMap(
            self.cutoff2,
            self.num_colors,
            fn(self.empty_value),
            {t: fn(v) for t, v in self.table.items()},
        )

    def equal_up_to(self, other: WeightMap, cutoff: int | float | Fraction) -> bool:
        c2 = as_rho2(cutoff)
        if self.empty_value != other.empty_value:
            return False
        return all(
            self.value(t) == other.value(t)
            for t in enumerate_trees(Fraction(c2, 2), self.num_colors)
        )


def _as_poly(value: Poly | int | Fraction) -> Poly:
    return value if isinstance(value, Poly) else Poly.const(value)


def unit_e(cutoff: int | float | Fraction, num_colors: int = 2) -> WeightMap:
    """The neutral weight map: 1 on the empty tree, 0 elsewhere."""
    return WeightMap.build(cutoff, num_colors, ONE, lambda t: ZERO)


def generic_weights(
    kind: str,
    cutoff: int | float | Fraction,
    num_colors: int = 2,
    *,
    semi_implicit: bool = False,
) -> WeightMap:
    """Free indeterminate weights, one symbol per tree.

    kind "ex" has value 1 on the empty tree; "im" and "pred" have 0 and 1
    respectively.  With semi_implicit=True, "im" weights vanish off trees
    with a deterministic root.
    """
    make = {"ex": Sym.ex, "im": Sym.im, "pred": Sym.pred}[kind]
    empty = ZERO if kind == "im" else ONE

    def fn(t: Tree) -> Poly:
        if kind == "im" and semi_implicit and t.color != 0:
            return ZERO
        return Poly.symbol(make(t))

    return WeightMap.build(cutoff, num_colors, empty, fn)


def _check_ready(phi: WeightMap, cutoff2: int, num_colors: int, name: str) -> None:
    if phi.cutoff2 < cutoff2:
        raise CutoffError(f"{name} covers order {Fraction(phi.cutoff2, 2)} "
                          f"< requested {Fraction(cutoff2, 2)}")
    if phi.num_colors != num_colors:
        raise ValueError(f"{name} uses {phi.num_colors} colors, expected {num_colors}")


def _require_one_at_empty(phi: WeightMap, name: str) -> None:
    if phi.empty_value != ONE:
        raise ValueError(f"{name} must equal 1 on the empty tree")


def _require_zero_at_empty(phi: WeightMap, name: str) -> None:
    if not phi.empty_value.is_zero():
        raise ValueError(f"{name} must vanish on the empty tree")


def _trees_by_nodes(cutoff2: int, num_colors: int) -> list[Tree]:
    ts = enumerate_trees(Fraction(cutoff2, 2), num_colors)
    ts.sort(key=lambda t: (node_count(t), sort_key(t)))
    return ts


def compose(
    phi_x: WeightMap, phi_y: WeightMap, cutoff: int | float | Fraction
) -> WeightMap:
    """Weights of the series phi_y evaluated along the series phi_x.

    The first operand must be 1 on the empty tree; the second is free, and
    the operation is linear in it.  The result's empty-tree value equals
    phi_y's.
    """
    cutoff2 = as_rho2(cutoff)
    n = phi_x.num_colors
    _check_ready(phi_x, cutoff2, n, "phi_x")
    _check_ready(phi_y, cutoff2, n, "phi_y")
    _require_one_at_empty(phi_x, "compose: first operand")

    def entry(tree: Tree) -> Poly:
        acc = ZERO
        for p in subtree_pairs(tree):
            inner = phi_y.value(p.subtree)
            if inner.is_zero():
                continue
            term = inner * poly_product(phi_x.value(d) for d in p.remainder)
            acc = acc + term * p.gamma
        return acc

    return WeightMap.build(Fraction(cutoff2, 2), n, phi_y.empty_value, entry)


def inverse(phi: WeightMap, cutoff: int | float | Fraction) -> WeightMap:
    """The weight map with compose(phi, inverse(phi)) equal to the unit."""
    cutoff2 = as_rho2(cutoff)
    n = phi.num_colors
    _check_ready(phi, cutoff2, n, "phi")
    _require_one_at_empty(phi, "inverse: operand")

    inv: dict[Tree, Poly] = {}

    def inv_value(tree: Tree) -> Poly:
        return ONE if tree.is_empty else inv[tree]

    for tree in _trees_by_nodes(cutoff2, n):
        acc = ZERO
        for p in subtree_pairs(tree):
            if p.subtree == tree:
                continue
            term = inv_value(p.subtree) * poly_product(phi.value(d) for d in p.remainder)
            acc = acc + term * p.gamma
        inv[tree] = -acc
    return WeightMap(cutoff2, n, ONE, inv)


def star(
    phi_x: WeightMap, phi_y: WeightMap, cutoff: int | float | Fraction
) -> WeightMap:
    """Weights of the phi_y-series Jacobian applied to the phi_x-series.

    Bilinear.  When phi_x vanishes on the empty tree this is the plain
    single-remainder sum; otherwise the extension
    (phi_x * phi_y) = ((phi_x - phi_x(empty) e) * phi_y) + phi_x(empty) phi_y
    is used.
    """
    cutoff2 = as_rho2(cutoff)
    n = phi_x.num_colors
    _check_ready(phi_x, cutoff2, n, "phi_x")
    _check_ready(phi_y, cutoff2, n, "phi_y")
    a = phi_x.empty_value

    def entry(tree: Tree) -> Poly:
        acc = ZERO
        for p in subtree_pairs(tree):
            if len(p.remainder) != 1:
                continue
            inner = phi_y.value(p.subtree)
            if inner.is_zero():
                continue
            acc = acc + inner * phi_x.value(p.remainder[0]) * p.gamma
        if not a.is_zero():
            acc = acc + a * phi_y.value(tree)
        return acc

    empty = a * phi_y.empty_value
    return WeightMap.build(Fraction(cutoff2, 2), n, empty, entry)


def exact_method_weights(
    phi_ex: WeightMap, phi_im: WeightMap, cutoff: int | float | Fraction
) -> WeightMap:
    """Weights of the one-step solution of an implicit method.

    Solves the fixed-point recursion
        Phi(tree) = phi_ex(tree) + (Phi o phi_im)(tree),  Phi(empty) = 1,
    by induction on node count; well-founded because phi_im vanishes on the
    empty tree.
    """
    cutoff2 = as_rho2(cutoff)
    n = phi_ex.num_colors
    _check_ready(phi_ex, cutoff2, n, "phi_ex")
    _check_ready(phi_im, cutoff2, n, "phi_im")
    _require_one_at_empty(phi_ex, "explicit part")
    _require_zero_at_empty(phi_im, "implicit part")

    table: dict[Tree, Poly] = {}

    def phi_value(tree: Tree) -> Poly:
        return ONE if tree.is_empty else table[tree]

    for tree in _trees_by_nodes(cutoff2, n):
        acc = phi_ex.value(tree)
        for p in subtree_pairs(tree):
            inner = phi_im.value(p.subtree)
            if inner.is_zero():
                continue
            term = inner * poly_product(phi_value(d) for d in p.remainder)
            acc = acc + term * p.gamma
        table[tree] = acc
    return WeightMap(cutoff2, n, ONE, table)


def _check_iterate_args(
    phi_k: WeightMap, phi_ex: WeightMap, phi_im: WeightMap, cutoff2: int
) -> int:
    n = phi_ex.num_colors
    _check_ready(phi_k, cutoff2, n, "phi_k")
    _check_ready(phi_ex, cutoff2, n, "phi_ex")
    _check_ready(phi_im, cutoff2, n, "phi_im")
    _require_one_at_empty(phi_k, "iterate: current weights")
    _require_one_at_empty(phi_ex, "explicit part")
    _require_zero_at_empty(phi_im, "implicit part")
    return n


def iterate_simple(
    phi_k: WeightMap,
    phi_ex: WeightMap,
    phi_im: WeightMap,
    cutoff: int | float | Fraction,
) -> WeightMap:
    """One functional sweep: next(tree) = phi_ex(tree) + (phi_k o phi_im)(tree)."""
    cutoff2 = as_rho2(cutoff)
    _check_iterate_args(phi_k, phi_ex, phi_im, cutoff2)
    inserted = compose(phi_k, phi_im, Fraction(cutoff2, 2))
    out = WeightMap(
        cutoff2,
        phi_ex.num_colors,
        ONE,
        {t: phi_ex.value(t) + inserted.value(t) for t in inserted.table},
    )
    return out


def iterate_modified_newton(
    phi_k: WeightMap,
    phi_ex: WeightMap,
    phi_im: WeightMap,
    cutoff: int | float | Fraction,
) -> WeightMap:
    """One sweep with the Jacobian frozen at the step's starting point.

    Solves the implicit recursion
        next = phi_ex + (phi_k o phi_im) + ((next - phi_k) * phi_im)
    by node count; the single-remainder sum touches `next` only on strictly
    smaller trees since phi_im vanishes on the empty tree.
    """
    cutoff2 = as_rho2(cutoff)
    n = _check_iterate_args(phi_k, phi_ex, phi_im, cutoff2)
    inserted = compose(phi_k, phi_im, Fraction(cutoff2, 2))

    table: dict[Tree, Poly] = {}

    def delta(tree: Tree) -> Poly:
        return table[tree] - phi_k.value(tree)

    for tree in _trees_by_nodes(cutoff2, n):
        acc = phi_ex.value(tree) + inserted.value(tree)
        for p in subtree_pairs(tree):
            if len(p.remainder) != 1:
                continue
            inner = phi_im.value(p.subtree)
            if inner.is_zero():
                continue
            acc = acc + inner * delta(p.remainder[0]) * p.gamma
        table[tree] = acc
    return WeightMap(cutoff2, n, ONE, table)


def iterate_full_newton(
    phi_k: WeightMap,
    phi_ex: WeightMap,
    phi_im: WeightMap,
    cutoff: int | float | Fraction,
) -> WeightMap:
    """One sweep with the Jacobian taken at the current iterate.

    Solves
        next = phi_ex + (phi_k o ((phi_k^{-1} o next) * phi_im))
    by node count.  The correction map
        A = ((psi - e) * phi_im) + phi_im,   psi = phi_k^{-1} o next,
    vanishes on the empty tree and references `next` only on strictly
    smaller trees, which makes the induction well-founded.
    """
    cutoff2 = as_rho2(cutoff)
    n = _check_iterate_args(phi_k, phi_ex, phi_im, cutoff2)
    inv = inverse(phi_k, Fraction(cutoff2, 2))

    table: dict[Tree, Poly] = {}
    psi_memo: dict[Tree, Poly] = {}
    corr_memo: dict[Tree, Poly] = {}

    def next_value(tree: Tree) -> Poly:
        return ONE if tree.is_empty else table[tree]

    def psi(tree: Tree) -> Poly:
        # (phi_k^{-1} o next)(tree); defined once next is known on tree
        if tree.is_empty:
            return ONE
        if tree not in psi_memo:
            acc = ZERO
            for p in subtree_pairs(tree):
                inner = next_value(p.subtree)
                if inner.is_zero():
                    continue
                term = inner * poly_product(inv.value(d) for d in p.remainder)
                acc = acc + term * p.gamma
            psi_memo[tree] = acc
        return psi_memo[tree]

    def correction(tree: Tree) -> Poly:
        # ((psi - e) * phi_im)(tree) + phi_im(tree); zero on the empty tree
        if tree.is_empty:
            return ZERO
        if tree not in corr_memo:
            acc = phi_im.value(tree)
            for p in subtree_pairs(tree):
                if len(p.remainder) != 1:
                    continue
                inner = phi_im.value(p.subtree)
                if inner.is_zero():
                    continue
                # remainder trees are nonempty, so (psi - e) is just psi there
                acc = acc + inner * psi(p.remainder[0]) * p.gamma
            corr_memo[tree] = acc
        return corr_memo[tree]

    for tree in _trees_by_nodes(cutoff2, n):
        acc = phi_ex.value(tree)
        for p in subtree_pairs(tree):
            inner = correction(p.subtree)
            if inner.is_zero():
                continue
            term = inner * poly_product(phi_k.value(d) for d in p.remainder)
            acc = acc + term * p.gamma
        table[tree] = acc
    return WeightMap(cutoff2, n, ONE, table)


def psi_weight(phi: WeightMap, u: FTree) -> Poly:
    """Series weight of a formal-root tree: the product of its children's
    weights (1 for the childless formal root)."""
    return poly_product(phi.value(c) for c in u.children)


def bind_increments(phi: WeightMap, bindings: dict[Sym, float]) -> dict[Tree, float]:
    """Evaluate every table entry numerically at the given increment values."""
    return {t: v.evaluate(bindings) for t, v in phi.table.items()}
