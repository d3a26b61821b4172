from fractions import Fraction

import pytest

from sdetaylor.growth import (
    ImplicitnessClass,
    IterationKind,
    growth,
    iteration_table,
    iterations_needed,
    max_growth,
    minimal_order_for_growth,
    weak_growth,
)
from sdetaylor.trees import FTree, Tree, enumerate_trees, leaf, node, rho

S = leaf(1)
GEN = ImplicitnessClass.GENERAL
SEMI = ImplicitnessClass.SEMI_IMPLICIT
DET = ImplicitnessClass.DETERMINISTIC
SIMPLE = IterationKind.SIMPLE
MOD = IterationKind.MODIFIED_NEWTON
FULL = IterationKind.FULL_NEWTON

CHAIN3 = node(1, [node(1, [S])])
MID = node(1, [node(1, [S]), node(1, [node(1, [S]), S, S])])
DOUBLED = node(1, [node(1, [S, S]), node(1, [S, S])])

# Expected sweep counts per order: (simple, modified, full), each (general, semi)
TABLE_EXPECTED = {
    Fraction(1, 2): ((2, 1), (1, 1), (1, 1)),
    Fraction(1): ((2, 1), (1, 1), (1, 1)),
    Fraction(3, 2): ((4, 2), (2, 2), (2, 2)),
    Fraction(2): ((4, 2), (2, 2), (2, 2)),
    Fraction(5, 2): ((6, 3), (3, 2), (2, 2)),
    Fraction(3): ((6, 3), (3, 2), (2, 2)),
}


def test_growth_on_reference_trees():
    assert [growth(CHAIN3, it, GEN) for it in (SIMPLE, MOD, FULL)] == [3, 1, 1]
    assert [growth(MID, it, GEN) for it in (SIMPLE, MOD, FULL)] == [4, 3, 2]
    assert [growth(DOUBLED, it, GEN) for it in (SIMPLE, MOD, FULL)] == [3, 3, 3]


def test_growth_of_empty_tree_is_zero():
    from sdetaylor.trees import EMPTY

    assert growth(EMPTY, SIMPLE, GEN) == 0


def test_weak_growth():
    assert weak_growth(FTree(), SIMPLE, GEN) == 0
    assert weak_growth(FTree((S,)), SIMPLE, GEN) == 1
    assert weak_growth(FTree((MID, S)), MOD, GEN) == 3


def test_max_growth_examples():
    assert max_growth(3, SIMPLE, GEN) == 6
    assert max_growth(3, MOD, GEN) == 3
    assert max_growth(3, FULL, GEN) == 2


def test_iterations_needed_examples():
    assert iterations_needed(1, SIMPLE, GEN) == 2
    assert iterations_needed(1, SIMPLE, SEMI) == 1
    assert iterations_needed(3, FULL, GEN) == 2


def test_iteration_table_matches_published_counts():
    table = iteration_table()
    for p, (simple, mod, full) in TABLE_EXPECTED.items():
        assert table[p][SIMPLE] == simple
        assert table[p][MOD] == mod
        assert table[p][FULL] == full


def test_unflagged_argument_uses_half_integer_order():
    # without the moment flag the argument stays at p + 1/2
    assert iterations_needed(Fraction(1, 2), SIMPLE, GEN, zero_odd_moments=False) == 2
    assert iterations_needed(1, SIMPLE, GEN, zero_odd_moments=False) == 3
    assert iterations_needed(1, SIMPLE, GEN, predictor_gain=2) == 0


def test_minimal_order_examples():
    assert minimal_order_for_growth(3, SIMPLE, GEN) == Fraction(3, 2)
    assert minimal_order_for_growth(3, FULL, GEN) == Fraction(7, 2)
    assert minimal_order_for_growth(2, MOD, DET) == 3


def _enumerated(cls, q):
    if cls is DET:
        return enumerate_trees(q, num_colors=1)
    return [t for t in enumerate_trees(q) if rho(t) <= q]


@pytest.mark.parametrize("it", list(IterationKind))
@pytest.mark.parametrize("cls", list(ImplicitnessClass))
def test_closed_form_matches_enumeration(it, cls):
    for q2 in range(1, 9):
        q = Fraction(q2, 2)
        if cls is DET and q.denominator != 1:
            continue
        trees = _enumerated(cls, q)
        assert max_growth(q, it, cls) == max(growth(t, it, cls) for t in trees)


@pytest.mark.parametrize("it", list(IterationKind))
@pytest.mark.parametrize("cls", list(ImplicitnessClass))
def test_minimal_order_witnesses(it, cls):
    pool = _enumerated(cls, 4)
    for k in range(1, 5):
        q = minimal_order_for_growth(k, it, cls)
        if q > 4:
            continue
        hits = [t for t in pool if growth(t, it, cls) == k]
        assert hits, f"no tree of growth {k}"
        assert min(rho(t) for t in hits) == q


@pytest.mark.parametrize("it", list(IterationKind))
def test_growth_monotone_under_attaching_a_child(it):
    pool = enumerate_trees(Fraction(5, 2))
    small = enumerate_trees(1)
    for t in pool:
        base = growth(t, it, GEN)
        for extra in small:
            grown = Tree(t.color, t.children + (extra,))
            assert growth(grown, it, GEN) >= base


def test_semi_implicit_growth_dominated_by_general():
    for t in enumerate_trees(Fraction(5, 2)):
        for it in IterationKind:
            assert growth(t, it, SEMI) <= growth(t, it, GEN)


def test_deterministic_class_rejects_stochastic_nodes():
    with pytest.raises(ValueError):
        growth(S, SIMPLE, DET)
    with pytest.raises(ValueError):
        max_growth(Fraction(3, 2), SIMPLE, DET)
    with pytest.raises(ValueError):
        max_growth(0, SIMPLE, GEN)


def test_semi_full_newton_closed_form_small_orders():
    # the floor term is negative below order 2; the clamp keeps the value at 1
    assert max_growth(Fraction(1, 2), FULL, SEMI) == 1
    assert max_growth(1, FULL, SEMI) == 1
    assert max_growth(2, FULL, SEMI) == 2
