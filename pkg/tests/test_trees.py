from fractions import Fraction
from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdetaylor import trees as tr
from sdetaylor.trees import (
    EMPTY,
    SubtreePair,
    Tree,
    alpha,
    enumerate_trees,
    leaf,
    node,
    node_count,
    rho,
    single_remainder_pairs,
    subtree_pairs,
)

from oracles import automorphism_count, gamma_oracle

S = leaf(1)  # stochastic leaf
D = leaf(0)  # deterministic leaf


@pytest.fixture
def two_channels():
    tr.set_noise_dimension(2)
    yield
    tr.set_noise_dimension(1)


def test_enumerate_half_order():
    assert enumerate_trees(Fraction(1, 2)) == [S]
    assert enumerate_trees(0) == []


def test_enumerate_order_one():
    got = enumerate_trees(1)
    assert set(got) == {S, D, node(1, [S])}
    assert len(got) == 3


def test_enumerate_order_three_halves():
    got = enumerate_trees(1.5)
    extra = {node(1, [D]), node(1, [node(1, [S])]), node(1, [S, S]), node(0, [S])}
    assert set(got) == {S, D, node(1, [S])} | extra
    assert len(got) == 7


def test_enumeration_sorted_and_unique():
    got = enumerate_trees(Fraction(5, 2))
    assert len(set(got)) == len(got)
    orders = [rho(t) for t in got]
    assert orders == sorted(orders)
    assert all(rho(t) <= Fraction(5, 2) for t in got)


def test_rho_examples(two_channels):
    assert rho(EMPTY) == 0
    assert rho(node(1, [node(0, [leaf(2)])])) == 2
    assert rho(node(0, [S, node(1, [leaf(2), leaf(2)])])) == 3


def test_alpha_examples(two_channels):
    assert alpha(S) == 1
    assert alpha(D) == 1
    assert alpha(node(0, [S, S])) == Fraction(1, 2)
    assert alpha(node(0, [S, node(1, [leaf(2), leaf(2)])])) == Fraction(1, 2)


def test_alpha_matches_automorphism_counting():
    for t in enumerate_trees(Fraction(5, 2)):
        if node_count(t) <= 5:
            assert alpha(t) == Fraction(1, automorphism_count(t))


def test_color_rejected_beyond_noise_dimension():
    with pytest.raises(ValueError):
        leaf(2)


def test_color_allowed_after_reconfiguration(two_channels):
    assert leaf(2).color == 2


def test_leaf_pairs():
    got = subtree_pairs(S)
    assert set(got) == {SubtreePair(EMPTY, (S,), 1), SubtreePair(S, (), 1)}


def test_full_subtree_has_gamma_one():
    for t in enumerate_trees(2):
        (p,) = [p for p in subtree_pairs(t) if p.subtree == t]
        assert p.remainder == () and p.gamma == 1


def test_chain_with_three_leaves_gamma():
    # tree [*,*,[*,*]] with subtree [*,*] and remainder {*,*,*}
    t = node(1, [S, S, node(1, [S, S])])
    (p,) = [
        p
        for p in subtree_pairs(t)
        if p.subtree == node(1, [S, S]) and p.remainder == (S, S, S)
    ]
    oracle = gamma_oracle(t)[(node(1, [S, S]), (S, S, S))]
    assert p.gamma == oracle == 2
    # second decomposition of the same tree: remainder is the whole branch
    (q,) = [
        p
        for p in subtree_pairs(t)
        if p.subtree == node(1, [S, S]) and p.remainder == (node(1, [S, S]),)
    ]
    assert q.gamma == 1


def test_gamma_matches_ordered_tree_oracle():
    for t in enumerate_trees(Fraction(5, 2)):
        got = {(p.subtree, p.remainder): p.gamma for p in subtree_pairs(t)}
        assert got == gamma_oracle(t)


def test_node_counts_conserved_in_pairs():
    for t in enumerate_trees(3):
        for p in subtree_pairs(t):
            total = node_count(p.subtree) + sum(node_count(r) for r in p.remainder)
            assert total == node_count(t)
        assert all(len(p.remainder) == 1 for p in single_remainder_pairs(t))


def shuffled_copy(t: Tree, rng: Random) -> Tree:
    kids = [shuffled_copy(c, rng) for c in t.children]
    rng.shuffle(kids)
    return Tree(t.color, tuple(kids))


def test_canonicalization_is_insertion_order_invariant():
    rng = Random(7)
    for t in enumerate_trees(3):
        for _ in range(3):
            assert shuffled_copy(t, rng) == t


@st.composite
def random_trees(draw, depth=3):
    color = draw(st.integers(min_value=0, max_value=1))
    if depth == 0:
        return leaf(color)
    kids = draw(st.lists(random_trees(depth=depth - 1), max_size=3))
    return node(color, kids)


@given(random_trees())
@settings(max_examples=60, deadline=None)
def test_canonical_construction_idempotent(t):
    assert Tree(t.color, t.children) == t
    assert sorted(t.children, key=tr.sort_key) == list(t.children)


def test_empty_tree_constraints():
    with pytest.raises(ValueError):
        Tree(None, (S,))
    with pytest.raises(ValueError):
        node(1, [EMPTY])


def test_encoding_examples():
    assert tr.encode(S) == "0.1"
    assert tr.encode(node(0, [S])) == "0.0-1.1"
    assert tr.encode(EMPTY) == "e"
    assert str(node(0, [S, node(1, [S])])) == "[*1,[*1]1]0"
