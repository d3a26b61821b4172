"""Multicolored rooted trees and their combinatorics.

Trees carry one color per node: color 0 marks a deterministic (drift) node,
colors 1..m mark stochastic (diffusion) nodes for the m noise channels.
Children are kept in a canonical total order so that structurally equal trees
compare equal and hash identically, which makes trees usable as dictionary
keys throughout the weight-map algebra.

The module also provides the subtree/remainder decomposition of a tree
together with the integer multiplicities ``gamma`` that count how many
ordered-tree decompositions collapse onto each unordered class.  These
multiplicities are exactly the coefficients of the B-series composition law.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Iterator

_noise_dimension = 1


def noise_dimension() -> int:
    """Number of noise channels m; node colors must lie in 0..m."""
    return _noise_dimension


def set_noise_dimension(m: int) -> None:
    """Configure the number of noise channels (default 1)."""
    if m < 0:
        raise ValueError(f"noise dimension must be >= 0, got {m}")
    global _noise_dimension
    _noise_dimension = m


@dataclass(frozen=True)
class Tree:
    """A rooted tree with colored nodes, or the empty tree.

    The empty tree is the unique instance with ``color is None``; it never
    appears as a child.  Children are sorted canonically at construction, so
    two trees are equal iff they are isomorphic as colored rooted trees.
    """

    color: int | None
    children: tuple[Tree, ...] = ()

    def __post_init__(self) -> None:
        if self.color is None:
            if self.children:
                raise ValueError("empty tree cannot have children")
            return
        if not 0 <= self.color <= _noise_dimension:
            raise ValueError(
                f"node color {self.color} outside 0..{_noise_dimension}; "
                "use set_noise_dimension to allow more colors"
            )
        for child in self.children:
            if child.is_empty:
                raise ValueError("empty tree cannot appear as a child")
        ordered = tuple(sorted(self.children, key=sort_key))
        object.__setattr__(self, "children", ordered)

    @property
    def is_empty(self) -> bool:
        return self.color is None

    def __str__(self) -> str:
        return bracket(self)

    def __repr__(self) -> str:
        return f"Tree({bracket(self)!r})"


EMPTY = Tree(None)


def leaf(color: int) -> Tree:
    return Tree(color)


def node(color: int, children: Iterable[Tree] = ()) -> Tree:
    return Tree(color, tuple(children))


@dataclass(frozen=True)
class FTree:
    """A formal root holding a multiset of nonempty trees.

    Used for series of a smooth function applied to a numerical solution;
    only the child multiset matters, the root carries no color.
    """

    children: tuple[Tree, ...] = ()

    def __post_init__(self) -> None:
        for child in self.children:
            if child.is_empty:
                raise ValueError("empty tree cannot appear as a child")
        ordered = tuple(sorted(self.children, key=sort_key))
        object.__setattr__(self, "children", ordered)

    def __str__(self) -> str:
        return "[" + ",".join(bracket(c) for c in self.children) + "]f"


@dataclass(frozen=True)
class SubtreePair:
    """One term of the subtree decomposition of a tree.

    ``subtree`` shares the root of the decomposed tree (or is empty), and
    ``remainder`` is the multiset of dangling trees left over.  ``gamma``
    counts the ordered-tree decompositions that realize this class.
    """

    subtree: Tree
    remainder: tuple[Tree, ...]
    gamma: int

    def __post_init__(self) -> None:
        if self.gamma < 1:
            raise ValueError("gamma must be positive")


@lru_cache(maxsize=None)
def node_count(tree: Tree) -> int:
    if tree.is_empty:
        return 0
    return 1 + sum(node_count(c) for c in tree.children)


@lru_cache(maxsize=None)
def rho2(tree: Tree) -> int:
    """Twice the tree order; stored doubled so it is always an integer."""
    if tree.is_empty:
        return 0
    own = 2 if tree.color == 0 else 1
    return own + sum(rho2(c) for c in tree.children)


def rho(tree: Tree | FTree) -> Fraction:
    """Tree order: 1 per deterministic node, 1/2 per stochastic node."""
    if isinstance(tree, FTree):
        return Fraction(sum(rho2(c) for c in tree.children), 2)
    return Fraction(rho2(tree), 2)


@lru_cache(maxsize=None)
def encode(tree: Tree) -> str:
    """Level-sequence-with-colors string, stable across runs.

    Preorder traversal in canonical child order, one ``depth.color`` token
    per node.  The empty tree encodes as ``"e"``.
    """
    if tree.is_empty:
        return "e"

    tokens: list[str] = []

    def walk(t: Tree, depth: int) -> None:
        tokens.append(f"{depth}.{t.color}")
        for child in t.children:
            walk(child, depth + 1)

    walk(tree, 0)
    return "-".join(tokens)


@lru_cache(maxsize=None)
def sort_key(tree: Tree) -> tuple[int, int, int, str]:
    """Canonical child order: node count, order, root color, then encoding."""
    if tree.is_empty:
        return (0, 0, -1, "e")
    return (node_count(tree), rho2(tree), tree.color, encode(tree))


def bracket(tree: Tree) -> str:
    """Human-readable bracket form, e.g. ``[*1,[*1]1]0``."""
    if tree.is_empty:
        return "{}"
    if not tree.children:
        return f"*{tree.color}"
    inner = ",".join(bracket(c) for c in tree.children)
    return f"[{inner}]{tree.color}"


@lru_cache(maxsize=None)
def alpha(tree: Tree) -> Fraction:
    """Inverse of the automorphism-group order of the tree."""
    if tree.is_empty or not tree.children:
        return Fraction(1)
    value = Fraction(1)
    for child, mult in _grouped(tree.children):
        value *= alpha(child) ** mult / factorial(mult)
    return value


def _grouped(children: tuple[Tree, ...]) -> Iterator[tuple[Tree, int]]:
    """Iterate (child, multiplicity) over a canonically sorted child tuple."""
    i = 0
    while i < len(children):
        j = i
        while j < len(children) and children[j] == children[i]:
            j += 1
        yield children[i], j - i
        i = j


def as_rho2(order: int | float | Fraction) -> int:
    """Convert a half-integer order to its doubled integer form."""
    doubled = Fraction(order) * 2
    if doubled.denominator != 1:
        raise ValueError(f"order must be a half-integer, got {order}")
    return int(doubled)


def enumerate_trees(max_order: int | float | Fraction, num_colors: int = 2) -> list[Tree]:
    """All canonical nonempty trees with order <= max_order.

    Colors range over 0..num_colors-1.  The result is sorted by
    (order, canonical key), so grouping by order is a contiguous slice.
    """
    if num_colors < 1:
        raise ValueError("need at least one color")
    if num_colors - 1 > _noise_dimension:
        raise ValueError(
            f"num_colors={num_colors} needs noise dimension >= {num_colors - 1}; "
            "call set_noise_dimension first"
        )
    budget = max(as_rho2(max_order), 0)
    trees = [t for w in range(1, budget + 1) for t in _trees_of_weight(w, num_colors)]
    trees.sort(key=lambda t: (rho2(t), sort_key(t)))
    return trees


@lru_cache(maxsize=None)
def _trees_of_weight(weight2: int, num_colors: int) -> tuple[Tree, ...]:
    """All trees with doubled order exactly weight2."""
    out: list[Tree] = []
    for color in range(num_colors):
        own = 2 if color == 0 else 1
        rest = weight2 - own
        if rest < 0:
            continue
        pool = [t for w in range(1, rest + 1) for t in _trees_of_weight(w, num_colors)]
        for children in _forests(tuple(pool), rest, 0):
            out.append(Tree(color, children))
    return tuple(out)


def _forests(pool: tuple[Tree, ...], total2: int, start: int) -> Iterator[tuple[Tree, ...]]:
    """Multisets of trees from pool[start:] with doubled orders summing to total2."""
    if total2 == 0:
        yield ()
        return
    for i in range(start, len(pool)):
        w = rho2(pool[i])
        if w > total2:
            continue
        for rest in _forests(pool, total2 - w, i):
            yield (pool[i],) + rest


@lru_cache(maxsize=None)
def subtree_pairs(tree: Tree) -> tuple[SubtreePair, ...]:
    """The full subtree decomposition of a nonempty tree, with multiplicities.

    Includes the trivial pairs (tree, ()) and (empty, (tree,)).  gamma of a
    class equals the number of per-child-position assignments of sub-pairs
    that realize it, weighted by the child multiplicities; this is the
    ordered-tree multiplicity of the class.
    """
    if tree.is_empty:
        raise ValueError("empty tree has no subtree decomposition")
    acc: dict[tuple[tuple[Tree, ...], tuple[Tree, ...]], int] = {((), ()): 1}
    for child in tree.children:
        child_pairs = subtree_pairs(child)
        nxt: dict[tuple[tuple[Tree, ...], tuple[Tree, ...]], int] = {}
        for (kept, rem), g in acc.items():
            for p in child_pairs:
                kept2 = kept if p.subtree.is_empty else _insort(kept, (p.subtree,))
                rem2 = _insort(rem, p.remainder)
                key = (kept2, rem2)
                nxt[key] = nxt.get(key, 0) + g * p.gamma
        acc = nxt
    pairs = [
        SubtreePair(Tree(tree.color, kept), rem, g) for (kept, rem), g in acc.items()
    ]
    pairs.append(SubtreePair(EMPTY, (tree,), 1))
    pairs.sort(key=lambda p: (sort_key(p.subtree), tuple(sort_key(t) for t in p.remainder)))
    return tuple(pairs)


def single_remainder_pairs(tree: Tree) -> tuple[SubtreePair, ...]:
    """The pairs whose remainder holds exactly one tree."""
    return tuple(p for p in subtree_pairs(tree) if len(p.remainder) == 1)


def _insort(base: tuple[Tree, ...], extra: tuple[Tree, ...]) -> tuple[Tree, ...]:
    if not extra:
        return base
    return tuple(sorted(base + extra, key=sort_key))
