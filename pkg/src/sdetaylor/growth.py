"""Per-tree growth functions and iteration-count formulas.

For each iteration scheme there is a growth function g on trees: after k
sweeps of that scheme the iterated weights agree with the method's exact
weights precisely on trees with g(tree) <= k.  The maximal growth over all
trees up to a given order then tells how many sweeps a target convergence
order costs.  Semi-implicit methods (implicit only in deterministic-root
trees) get smaller growth functions; purely deterministic problems restrict
everything to single-colored trees.
"""

from __future__ import annotations

import enum
from fractions import Fraction

from .trees import FTree, Tree, rho


class IterationKind(enum.Enum):
    SIMPLE = "simple"
    MODIFIED_NEWTON = "modified"
    FULL_NEWTON = "full"


class ImplicitnessClass(enum.Enum):
    GENERAL = "general"
    SEMI_IMPLICIT = "semi"
    DETERMINISTIC = "deterministic"


ORDERS_TABLE = tuple(Fraction(k, 2) for k in range(1, 7))


def growth(tree: Tree, it: IterationKind, cls: ImplicitnessClass) -> int:
    """Number of sweeps after which this tree's weight becomes exact."""
    if tree.is_empty:
        return 0
    if cls is ImplicitnessClass.DETERMINISTIC:
        _require_deterministic(tree)
        semi = False
    else:
        semi = cls is ImplicitnessClass.SEMI_IMPLICIT
    if it is IterationKind.SIMPLE:
        return _height(tree, semi)
    if it is IterationKind.MODIFIED_NEWTON:
        return _ramification(tree, semi)
    return _doubling(tree, semi)


def _require_deterministic(tree: Tree) -> None:
    if tree.color != 0 or any(c.color != 0 for c in _all_nodes(tree)):
        raise ValueError("deterministic class admits only color-0 trees")


def _all_nodes(tree: Tree):
    yield tree
    for c in tree.children:
        yield from _all_nodes(c)


def _height(t: Tree, semi: bool) -> int:
    if semi and t.color != 0:
        return 1
    return 1 + max((_height(c, semi) for c in t.children), default=0)


def _ramification(t: Tree, semi: bool) -> int:
    """One plus the maximum number of branchings along any root path."""
    if not t.children:
        return 1
    if semi and t.color != 0:
        return 1
    if len(t.children) == 1:
        return _ramification(t.children[0], semi)
    return 1 + max(_ramification(c, semi) for c in t.children)


def _doubling(t: Tree, semi: bool) -> int:
    """Doubling index: the maximum child value, plus one when several
    children attain it."""
    if not t.children:
        return 1
    if semi and t.color != 0:
        return 1
    vals = [_doubling(c, semi) for c in t.children]
    peak = max(vals)
    return peak if vals.count(peak) == 1 else peak + 1


def weak_growth(u: FTree, it: IterationKind, cls: ImplicitnessClass) -> int:
    """Growth of a formal-root tree: the maximum over its children."""
    return max((growth(c, it, cls) for c in u.children), default=0)


def _floor_log2(x: Fraction) -> int:
    if x <= 0:
        raise ValueError("log of nonpositive value")
    k = 0
    if x >= 1:
        while x >= 2:
            x /= 2
            k += 1
        return k
    while x < 1:
        x *= 2
        k -= 1
    return k


def max_growth(
    q: int | float | Fraction, it: IterationKind, cls: ImplicitnessClass
) -> int:
    """Closed form for the maximum growth over all trees of order <= q."""
    q = Fraction(q)
    if cls is ImplicitnessClass.DETERMINISTIC:
        if q < 1 or q.denominator != 1:
            raise ValueError("deterministic class needs an integer order >= 1")
        if it is IterationKind.SIMPLE:
            return int(q)
        if it is IterationKind.MODIFIED_NEWTON:
            return int((q + 1) / 2 // 1)
        return _floor_log2(q + 1)
    if q < Fraction(1, 2):
        raise ValueError("order must be at least 1/2")
    if cls is ImplicitnessClass.GENERAL:
        if it is IterationKind.SIMPLE:
            return int(2 * q)
        if it is IterationKind.MODIFIED_NEWTON:
            return int((q + Fraction(1, 2)) // 1)
        return _floor_log2(q + Fraction(1, 2)) + 1
    # semi-implicit
    if it is IterationKind.SIMPLE:
        return int((q + Fraction(1, 2)) // 1)
    if it is IterationKind.MODIFIED_NEWTON:
        return int(Fraction(2, 3) * (q + 1) // 1)
    # any implicit tree of order <= q already forces at least one sweep
    return max(1, _floor_log2((q + 1) / 3) + 2)


def iterations_needed(
    p: int | float | Fraction,
    it: IterationKind,
    cls: ImplicitnessClass,
    zero_odd_moments: bool = True,
    predictor_gain: int = 0,
) -> int:
    """Sweeps needed for the iterated method to reach order p.

    With zero_odd_moments set (products of method weights of fractional
    total order have zero mean, true for every shipped scheme) the order
    argument is floor(p + 1/2); otherwise the raw half-integer p + 1/2.
    predictor_gain is the growth level already supplied by the predictor
    (0 for the trivial one).
    """
    p = Fraction(p)
    if p < Fraction(1, 2):
        raise ValueError("order must be at least 1/2")
    if predictor_gain < 0:
        raise ValueError("predictor gain must be nonnegative")
    arg = (p + Fraction(1, 2)) // 1 if zero_odd_moments else p + Fraction(1, 2)
    return max(0, max_growth(arg, it, cls) - predictor_gain)


def minimal_order_for_growth(
    k: int, it: IterationKind, cls: ImplicitnessClass
) -> Fraction:
    """Smallest tree order at which the growth value k is attained."""
    if k < 1:
        raise ValueError("growth level must be >= 1")
    table = {
        ImplicitnessClass.GENERAL: {
            IterationKind.SIMPLE: Fraction(k, 2),
            IterationKind.MODIFIED_NEWTON: Fraction(2 * k - 1, 2),
            IterationKind.FULL_NEWTON: Fraction(2**k - 1, 2),
        },
        ImplicitnessClass.SEMI_IMPLICIT: {
            IterationKind.SIMPLE: Fraction(2 * k - 1, 2),
            IterationKind.MODIFIED_NEWTON: Fraction(3 * k, 2) - 1,
            IterationKind.FULL_NEWTON: Fraction(3, 4) * 2**k - 1,
        },
        ImplicitnessClass.DETERMINISTIC: {
            IterationKind.SIMPLE: Fraction(k),
            IterationKind.MODIFIED_NEWTON: Fraction(2 * k - 1),
            IterationKind.FULL_NEWTON: Fraction(2**k - 1),
        },
    }
    return table[cls][it]


def iteration_table(
    orders: tuple[Fraction, ...] = ORDERS_TABLE, zero_odd_moments: bool = True
) -> dict[Fraction, dict[IterationKind, tuple[int, int]]]:
    """Sweep counts (general, semi-implicit) per order and iteration kind."""
    out: dict[Fraction, dict[IterationKind, tuple[int, int]]] = {}
    for p in orders:
        row = {}
        for it in IterationKind:
            row[it] = (
                iterations_needed(p, it, ImplicitnessClass.GENERAL, zero_odd_moments),
                iterations_needed(
                    p, it, ImplicitnessClass.SEMI_IMPLICIT, zero_odd_moments
                ),
            )
        out[p] = row
    return out
