from fractions import Fraction
from random import Random

import pytest

from sdetaylor.algebra import (
    CutoffError,
    WeightMap,
    bind_increments,
    compose,
    exact_method_weights,
    generic_weights,
    inverse,
    iterate_full_newton,
    iterate_modified_newton,
    iterate_simple,
    psi_weight,
    star,
    unit_e,
)
from sdetaylor.growth import ImplicitnessClass, IterationKind, growth
from sdetaylor.poly import ONE, ZERO, Poly, Sym
from sdetaylor.trees import EMPTY, FTree, enumerate_trees, leaf, node

from oracles import random_weight_map

S = leaf(1)
D = leaf(0)
CHAIN2 = node(1, [S])

ITERATE = {
    IterationKind.SIMPLE: iterate_simple,
    IterationKind.MODIFIED_NEWTON: iterate_modified_newton,
    IterationKind.FULL_NEWTON: iterate_full_newton,
}


def ex_sym(t):
    return Poly.symbol(Sym.ex(t))


def im_sym(t):
    return Poly.symbol(Sym.im(t))


def test_unit_values():
    e = unit_e(2)
    assert e.value(EMPTY) == 1
    assert e.value(S) == 0


def test_unit_is_two_sided_identity():
    rng = Random(0)
    phi = random_weight_map(rng, 2)
    e = unit_e(2)
    assert compose(phi, e, 2).equal_up_to(phi, 2)
    assert compose(e, phi, 2).equal_up_to(phi, 2)


def test_compose_at_single_node():
    px = generic_weights("ex", 1)
    py = generic_weights("im", 1)
    got = compose(px, py, 1)
    # remainder term picks up the empty-subtree pair weighted by py(empty)=0
    assert got.value(S) == py.value(S)
    py1 = WeightMap.build(1, 2, ONE, lambda t: im_sym(t))
    got1 = compose(px, py1, 1)
    assert got1.value(S) == py1.value(S) + px.value(S)


def test_two_euler_steps_compose():
    h = Poly.symbol(Sym.inc("h"))
    dw = Poly.symbol(Sym.inc("dW"))
    ex = WeightMap.from_entries(1, 2, ONE, {S: dw})
    im = WeightMap.from_entries(1, 2, ZERO, {D: h})
    phi = exact_method_weights(ex, im, 1)
    two = compose(phi, phi, 1)
    assert two.value(D) == 2 * h
    assert two.value(S) == 2 * dw
    assert two.value(CHAIN2) == dw * dw


def test_inverse_examples():
    e = unit_e(2)
    assert inverse(e, 2).equal_up_to(e, 2)
    rng = Random(1)
    phi = random_weight_map(rng, 3)
    inv = inverse(phi, 3)
    assert inv.value(S) == -phi.value(S)
    assert compose(phi, inv, 3).equal_up_to(unit_e(3), 3)


def test_group_laws_randomized():
    rng = Random(2)
    e = unit_e(3)
    for _ in range(5):
        x = random_weight_map(rng, 3)
        y = random_weight_map(rng, 3)
        z = random_weight_map(rng, 3, empty=rng.randint(2, 5))
        assert compose(x, inverse(x, 3), 3).equal_up_to(e, 3)
        left = compose(compose(x, y, 3), z, 3)
        right = compose(x, compose(y, z, 3), 3)
        assert left.equal_up_to(right, 3)


def test_compose_linear_in_second_operand():
    rng = Random(3)
    x = random_weight_map(rng, Fraction(5, 2))
    y1 = random_weight_map(rng, Fraction(5, 2), empty=0)
    y2 = random_weight_map(rng, Fraction(5, 2), empty=2)
    lhs = compose(x, _lincomb(y1, 3, y2, -2), Fraction(5, 2))
    rhs = _lincomb(
        compose(x, y1, Fraction(5, 2)), 3, compose(x, y2, Fraction(5, 2)), -2
    )
    assert lhs.equal_up_to(rhs, Fraction(5, 2))


def _lincomb(a: WeightMap, ca, b: WeightMap, cb) -> WeightMap:
    return WeightMap(
        a.cutoff2,
        a.num_colors,
        a.empty_value * ca + b.empty_value * cb,
        {t: a.value(t) * ca + b.value(t) * cb for t in a.table},
    )


def test_star_examples():
    x0 = random_weight_map(Random(4), 2, empty=0)
    y = random_weight_map(Random(5), 2, empty=3)
    got = star(x0, y, 2)
    assert got.value(EMPTY) == 0
    assert got.value(S) == y.value(EMPTY) * x0.value(S)
    # the unit acts as identity through the extension formula
    assert star(unit_e(2), y, 2).equal_up_to(y, 2)


def test_star_bilinear():
    rng = Random(6)
    c = Fraction(5, 2)
    x1, x2 = random_weight_map(rng, c, empty=0), random_weight_map(rng, c, empty=1)
    y1, y2 = random_weight_map(rng, c), random_weight_map(rng, c, empty=0)
    assert star(_lincomb(x1, 2, x2, 5), y1, c).equal_up_to(
        _lincomb(star(x1, y1, c), 2, star(x2, y1, c), 5), c
    )
    assert star(x1, _lincomb(y1, -1, y2, 7), c).equal_up_to(
        _lincomb(star(x1, y1, c), -1, star(x1, y2, c), 7), c
    )


def test_exact_weights_explicit_scheme():
    ex = generic_weights("ex", 2)
    im = WeightMap.build(2, 2, ZERO, lambda t: ZERO)
    phi = exact_method_weights(ex, im, 2)
    assert phi.equal_up_to(ex, 2)


def test_exact_weights_single_node():
    ex = generic_weights("ex", 2)
    im = generic_weights("im", 2)
    phi = exact_method_weights(ex, im, 2)
    assert phi.value(S) == ex.value(S) + im.value(S)
    # two-node chain picks up the nested correction
    expect = (
        ex.value(CHAIN2)
        + im.value(CHAIN2)
        + im.value(S) * (ex.value(S) + im.value(S))
    )
    assert phi.value(CHAIN2) == expect


def test_milstein_family_drift_weight():
    from sdetaylor.schemes import make_scheme

    s = make_scheme("milstein", alpha=Fraction(1, 3), beta=Fraction(1, 4))
    phi = exact_method_weights(s.symbolic_ex, s.symbolic_im, 2)
    assert phi.value(D) == Poly.symbol(Sym.inc("h"))


@pytest.mark.parametrize("kind", list(IterationKind))
def test_iterate_explicit_scheme_converges_immediately(kind):
    ex = generic_weights("ex", 2)
    im = WeightMap.build(2, 2, ZERO, lambda t: ZERO)
    pred = generic_weights("pred", 2)
    nxt = ITERATE[kind](pred, ex, im, 2)
    assert nxt.equal_up_to(ex, 2)


@pytest.mark.parametrize("kind", list(IterationKind))
def test_first_sweep_from_trivial_predictor(kind):
    ex = generic_weights("ex", 2)
    im = generic_weights("im", 2)
    phi1 = ITERATE[kind](unit_e(2), ex, im, 2)
    for t in (S, D):
        assert phi1.value(t) == ex.value(t) + im.value(t)
    phi = exact_method_weights(ex, im, 2)
    if kind is IterationKind.SIMPLE:
        # plain sweep misses the nested two-node correction
        assert phi1.value(CHAIN2) == ex.value(CHAIN2) + im.value(CHAIN2)
        assert phi1.value(CHAIN2) != phi.value(CHAIN2)
    else:
        # Newton sweeps resolve unbranched trees immediately
        assert phi1.value(CHAIN2) == phi.value(CHAIN2)


@pytest.mark.parametrize("kind", list(IterationKind))
def test_exact_weights_are_fixed_point(kind):
    cutoff = 2
    ex = generic_weights("ex", cutoff)
    im = generic_weights("im", cutoff)
    phi = exact_method_weights(ex, im, cutoff)
    assert ITERATE[kind](phi, ex, im, cutoff).equal_up_to(phi, cutoff)


@pytest.mark.parametrize("kind", list(IterationKind))
@pytest.mark.parametrize("semi", [False, True])
def test_growth_predicts_exactness_small(kind, semi):
    cutoff = Fraction(3, 2)
    cls = ImplicitnessClass.SEMI_IMPLICIT if semi else ImplicitnessClass.GENERAL
    ex = generic_weights("ex", cutoff)
    im = generic_weights("im", cutoff, semi_implicit=semi)
    phi = exact_method_weights(ex, im, cutoff)
    current = unit_e(cutoff)
    for k in range(4):
        for t in enumerate_trees(cutoff):
            assert (current.value(t) == phi.value(t)) == (growth(t, kind, cls) <= k)
        current = ITERATE[kind](current, ex, im, cutoff)


def test_generic_predictor_enters_second_order_terms():
    ex = generic_weights("ex", 1)
    im = generic_weights("im", 1)
    pred = generic_weights("pred", 1)
    phi1 = iterate_simple(pred, ex, im, 1)
    assert Sym.pred(S) in phi1.value(CHAIN2).symbols()


def test_psi_weight():
    phi = generic_weights("ex", 2)
    assert psi_weight(phi, FTree()) == 1
    assert psi_weight(phi, FTree((S,))) == phi.value(S)
    assert psi_weight(phi, FTree((S, S))) == phi.value(S) * phi.value(S)


def test_cutoff_is_enforced():
    phi = random_weight_map(Random(7), 1)
    with pytest.raises(CutoffError):
        phi.value(node(1, [S, S]))
    with pytest.raises(CutoffError):
        compose(phi, phi, 2)
    with pytest.raises(ValueError):
        compose(random_weight_map(Random(8), 1, empty=0), phi, 1)


def test_bind_increments_evaluates_tables():
    h = Sym.inc("h")
    ex = WeightMap.from_entries(1, 2, ONE, {D: Poly.symbol(h) * Fraction(3, 4)})
    got = bind_increments(ex, {h: 0.5})
    assert got[D] == 0.375 and got[S] == 0.0
