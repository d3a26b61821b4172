"""Concrete one-step Taylor schemes as symbolic-weight/numeric-evaluator pairs.

Each scheme carries two faces that must agree: an exact symbolic weight
table over trees (coefficients are polynomials in the step's random
increments) and vectorized numpy evaluators for its explicit part, implicit
part, and the implicit part's state Jacobian.  The agreement is testable:
summing alpha(tree) * weight * elementary differential over the table must
reproduce the evaluators at machine precision.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .algebra import WeightMap, exact_method_weights
from .growth import ImplicitnessClass
from .poly import ONE, ZERO, Poly, Sym
from .problems import SDEProblem
from .trees import Tree, alpha, leaf, node, rho2

H = Poly.symbol(Sym.inc("h"))
DW = Poly.symbol(Sym.inc("dW"))
I11 = Poly.symbol(Sym.inc("I11"))
I10 = Poly.symbol(Sym.inc("I10"))
I01 = Poly.symbol(Sym.inc("I01"))
I111 = Poly.symbol(Sym.inc("I111"))

# Tree shorthands for the weight tables (colors: 0 drift, 1 diffusion).
D_ = leaf(0)
S_ = leaf(1)
T_SS = node(1, [S_])          # g1' g1
T_SD = node(0, [S_])          # g0' g1
T_DS = node(1, [D_])          # g1' g0
T_DD = node(0, [D_])          # g0' g0
T_SSD = node(0, [S_, S_])     # g0''(g1, g1)
T_SSS = node(1, [S_, S_])     # g1''(g1, g1)
T_DSS = node(1, [D_, S_])     # g1''(g0, g1)
CH3 = node(1, [T_SS])         # g1' g1' g1
T_SD_S = node(1, [T_SD])      # g1' g0' g1
T_DS_S = node(1, [T_DS])      # g1' g1' g0
CH4 = node(1, [CH3])          # g1' g1' g1' g1
T_SSS_S = node(1, [T_SSS])    # g1' g1''(g1, g1)
T_BR = node(1, [T_SS, S_])    # g1''(g1' g1, g1)
T_TRIPLE = node(1, [S_, S_, S_])  # g1'''(g1, g1, g1)


@dataclass(frozen=True)
class StochasticIncrements:
    """One step's random variables.

    Only h, dW, and I10 are free; the rest satisfy the pathwise identities
    I11 = (dW^2 - h)/2, I01 = h dW - I10, I111 = (dW^3 - 3 h dW)/6.
    Fields may be scalars or equally shaped arrays.
    """

    h: float
    dW: float | np.ndarray
    I10: float | np.ndarray
    I11: float | np.ndarray
    I01: float | np.ndarray
    I111: float | np.ndarray

    @classmethod
    def from_brownian(cls, h, dW, I10=0.0) -> StochasticIncrements:
        dW = np.asarray(dW, dtype=float) if not np.isscalar(dW) else dW
        return cls(
            h=h,
            dW=dW,
            I10=I10,
            I11=(dW**2 - h) / 2,
            I01=h * dW - I10,
            I111=(dW**3 - 3 * h * dW) / 6,
        )

    def bindings(self) -> dict[Sym, float | np.ndarray]:
        return {
            Sym.inc("h"): self.h,
            Sym.inc("dW"): self.dW,
            Sym.inc("I10"): self.I10,
            Sym.inc("I11"): self.I11,
            Sym.inc("I01"): self.I01,
            Sym.inc("I111"): self.I111,
        }


def increment_identity_residuals(inc: StochasticIncrements) -> tuple:
    """Residuals of the three pathwise identities (all zero for sampled data)."""
    return (
        inc.I11 - (inc.dW**2 - inc.h) / 2,
        inc.I01 + inc.I10 - inc.h * inc.dW,
        inc.I111 - (inc.dW**3 - 3 * inc.h * inc.dW) / 6,
    )


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    """A Taylor scheme: metadata, symbolic weights, and numeric evaluators."""

    name: str
    order: Fraction
    convergence: str  # "strong" or "weak"
    implicitness: ImplicitnessClass
    max_derivative_order: int
    symbolic_ex: WeightMap
    symbolic_im: WeightMap
    explicit_fn: Callable
    implicit_fn: Callable
    jacobian_fn: Callable
    zero_odd_moments: bool = True

    @property
    def is_explicit(self) -> bool:
        return all(v.is_zero() for v in self.symbolic_im.table.values())


def eval_explicit_part(s: SchemeSpec, prob: SDEProblem, y, inc) -> np.ndarray:
    """The part of the step evaluated at the current state (includes y itself)."""
    return s.explicit_fn(prob, np.asarray(y, dtype=float), inc)


def eval_implicit_part(s: SchemeSpec, prob: SDEProblem, y, inc) -> np.ndarray:
    """The part of the step evaluated at the next state."""
    return s.implicit_fn(prob, np.asarray(y, dtype=float), inc)


def implicit_jacobian(s: SchemeSpec, prob: SDEProblem, y, inc) -> np.ndarray:
    """State Jacobian of the implicit part, shape (..., d, d)."""
    return s.jacobian_fn(prob, np.asarray(y, dtype=float), inc)


# tensor contraction helpers; derivative tensors are symmetric in their
# trailing argument axes


def mv(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def mm(a, b):
    return np.einsum("...ij,...jk->...ik", a, b)


def d2_vec(t, a, b):
    return np.einsum("...ijk,...j,...k->...i", t, a, b)


def d3_vec(t, a, b, c):
    return np.einsum("...ijkl,...j,...k,...l->...i", t, a, b, c)


def d2_dot(t, v):
    """Matrix (..., i, m) = sum_k t[..., i, m, k] v[..., k]."""
    return np.einsum("...imk,...k->...im", t, v)


def d3_dot2(t, a, b):
    """Matrix (..., i, m) = sum_kl t[..., i, m, k, l] a[..., k] b[..., l]."""
    return np.einsum("...imkl,...k,...l->...im", t, a, b)


def _drift_implicit_block(prob, y, h):
    """h g0 - h^2/2 (g0' g0 + g0''(g1,g1)/2), shared by two of the schemes."""
    g0 = prob.coefficient(0)(y)
    g1 = prob.coefficient(1)(y)
    d1g0 = prob.derivative(0, 1)(y)
    d2g0 = prob.derivative(0, 2)(y)
    return h * g0 - 0.5 * h**2 * (mv(d1g0, g0) + 0.5 * d2_vec(d2g0, g1, g1))


def _drift_implicit_block_jacobian(prob, y, h):
    g0 = prob.coefficient(0)(y)
    g1 = prob.coefficient(1)(y)
    d1g0 = prob.derivative(0, 1)(y)
    d1g1 = prob.derivative(1, 1)(y)
    d2g0 = prob.derivative(0, 2)(y)
    d3g0 = prob.derivative(0, 3)(y)
    d_g0g0 = d2_dot(d2g0, g0) + mm(d1g0, d1g0)
    d_g0pp = d3_dot2(d3g0, g1, g1) + 2 * np.einsum(
        "...ijk,...k,...jm->...im", d2g0, g1, d1g1
    )
    return h * d1g0 - 0.5 * h**2 * (d_g0g0 + 0.5 * d_g0pp)


def _milstein(alpha_p: Fraction, beta_p: Fraction, name: str) -> SchemeSpec:
    a, b = float(alpha_p), float(beta_p)

    ex = {
        D_: H * (1 - alpha_p),
        S_: DW * (1 - beta_p),
        T_SS: I11 - DW * DW * beta_p,
    }
    im = {D_: H * alpha_p, S_: DW * beta_p}

    def explicit(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        return (
            y
            + inc.h * (1 - a) * g0
            + _col(inc.dW * (1 - b)) * g1
            + _col(inc.I11 - b * inc.dW**2) * mv(d1g1, g1)
        )

    def implicit(prob, y, inc):
        out = inc.h * a * prob.coefficient(0)(y)
        if b:
            out = out + _col(inc.dW * b) * prob.coefficient(1)(y)
        return out

    def jacobian(prob, y, inc):
        out = inc.h * a * prob.derivative(0, 1)(y)
        if b:
            out = out + _col2(inc.dW * b) * prob.derivative(1, 1)(y)
        return out

    implicitness = (
        ImplicitnessClass.SEMI_IMPLICIT if beta_p == 0 else ImplicitnessClass.GENERAL
    )
    return SchemeSpec(
        name=name,
        order=Fraction(1),
        convergence="strong",
        implicitness=implicitness,
        max_derivative_order=1,
        symbolic_ex=_table(ex),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _col(x):
    """Broadcast a per-path scalar against state vectors (..., d)."""
    return np.asarray(x)[..., None] if np.ndim(x) else x


def _col2(x):
    """Broadcast a per-path scalar against matrices (..., d, d)."""
    return np.asarray(x)[..., None, None] if np.ndim(x) else x


def _euler(theta_p: Fraction, name: str) -> SchemeSpec:
    th = float(theta_p)
    ex = {D_: H * (1 - theta_p), S_: DW}
    im = {D_: H * theta_p}

    def explicit(prob, y, inc):
        return (
            y
            + inc.h * (1 - th) * prob.coefficient(0)(y)
            + _col(inc.dW) * prob.coefficient(1)(y)
        )

    def implicit(prob, y, inc):
        return inc.h * th * prob.coefficient(0)(y)

    def jacobian(prob, y, inc):
        return inc.h * th * prob.derivative(0, 1)(y)

    return SchemeSpec(
        name=name,
        order=Fraction(1, 2),
        convergence="strong",
        implicitness=ImplicitnessClass.SEMI_IMPLICIT,
        max_derivative_order=1,
        symbolic_ex=_table(ex),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _im_scheme() -> SchemeSpec:
    """Fully implicit first-order scheme: every term sits at the next state."""
    im = {D_: H, S_: DW, T_SS: -(I11 + H)}

    def explicit(prob, y, inc):
        return y

    def implicit(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        return (
            inc.h * g0 + _col(inc.dW) * g1 - _col(inc.I11 + inc.h) * mv(d1g1, g1)
        )

    def jacobian(prob, y, inc):
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g1 = prob.derivative(1, 2)(y)
        d_g1g1 = d2_dot(d2g1, g1) + mm(d1g1, d1g1)
        return inc.h * d1g0 + _col2(inc.dW) * d1g1 - _col2(inc.I11 + inc.h) * d_g1g1

    return SchemeSpec(
        name="im",
        order=Fraction(1),
        convergence="strong",
        implicitness=ImplicitnessClass.GENERAL,
        max_derivative_order=2,
        symbolic_ex=_table({}),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _sikp() -> SchemeSpec:
    """Drift-implicit strong order 1.5 Taylor scheme."""
    half = Fraction(1, 2)
    ex = {
        S_: DW,
        T_SS: I11,
        T_SD: -I01,
        T_DS: I01,
        T_SSS: I01 + I111 * 2,
        CH3: I111,
    }
    im = {D_: H, T_DD: H * H * -half, T_SSD: H * H * -half}

    def explicit(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g1 = prob.derivative(1, 2)(y)
        g1g1 = mv(d1g1, g1)
        return (
            y
            + _col(inc.dW) * g1
            + _col(inc.I11) * g1g1
            - _col(inc.I01) * mv(d1g0, g1)
            + _col(inc.I01) * (mv(d1g1, g0) + 0.5 * d2_vec(d2g1, g1, g1))
            + _col(inc.I111) * (mv(d1g1, g1g1) + d2_vec(d2g1, g1, g1))
        )

    def implicit(prob, y, inc):
        return _drift_implicit_block(prob, y, inc.h)

    def jacobian(prob, y, inc):
        return _drift_implicit_block_jacobian(prob, y, inc.h)

    return SchemeSpec(
        name="sikp",
        order=Fraction(3, 2),
        convergence="strong",
        implicitness=ImplicitnessClass.SEMI_IMPLICIT,
        max_derivative_order=3,
        symbolic_ex=_table(ex),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _siw() -> SchemeSpec:
    """Drift-implicit weak order 2 Taylor scheme with Gaussian increments."""
    half = Fraction(1, 2)
    ex = {
        S_: DW,
        T_SS: I11,
        T_SD: H * DW * -half,
        T_DS: H * DW * half,
        T_SSS: H * DW * half,
    }
    im = {D_: H, T_DD: H * H * -half, T_SSD: H * H * -half}

    def explicit(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g1 = prob.derivative(1, 2)(y)
        return (
            y
            + _col(inc.dW) * g1
            + _col(inc.I11) * mv(d1g1, g1)
            + _col(0.5 * inc.dW * inc.h)
            * (-mv(d1g0, g1) + mv(d1g1, g0) + 0.5 * d2_vec(d2g1, g1, g1))
        )

    def implicit(prob, y, inc):
        return _drift_implicit_block(prob, y, inc.h)

    def jacobian(prob, y, inc):
        return _drift_implicit_block_jacobian(prob, y, inc.h)

    return SchemeSpec(
        name="siw",
        order=Fraction(2),
        convergence="weak",
        implicitness=ImplicitnessClass.SEMI_IMPLICIT,
        max_derivative_order=3,
        symbolic_ex=_table(ex),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _fit() -> SchemeSpec:
    """Fully implicit strong order 1.5 Taylor scheme.

    Half of every leading term sits at the next state; the long tail of
    current-state corrections restores order 1.5.
    """
    half = Fraction(1, 2)
    q = Fraction(1, 4)
    ex = {
        S_: DW * half,
        D_: H * half,
        T_SS: -(H + I11 * half),
        T_DS: (I01 - I10) * half,
        T_SD: (I01 - I10) * -half,
        T_SSS: I01 - H * DW * Fraction(7, 2) - I111 * 4,
        CH3: -(H * DW * Fraction(3, 2) + I111 * 2),
        T_DD: H * H * -q,
        T_DSS: -(H * H),
        T_SD_S: H * H * -q,
        T_DS_S: H * H * Fraction(-3, 4),
        T_SSD: H * H * -q,
        CH4: H * H * -q,
        T_SSS_S: H * H * Fraction(-5, 4),
        T_BR: H * H * Fraction(-7, 4),
        T_TRIPLE: H * H * Fraction(-9, 2),
    }
    im = {
        S_: DW * half,
        D_: H * half,
        T_SS: (I11 + H) * half,
        T_DD: H * H * q,
        T_SSD: H * H * q,
    }

    def explicit(prob, y, inc):
        h, dW = inc.h, inc.dW
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g0 = prob.derivative(0, 2)(y)
        d2g1 = prob.derivative(1, 2)(y)
        d3g1 = prob.derivative(1, 3)(y)
        g1g1 = mv(d1g1, g1)
        g1g0 = mv(d1g1, g0)
        g0g1 = mv(d1g0, g1)
        return (
            y
            + _col(0.5 * dW) * g1
            + 0.5 * h * g0
            - _col(h + 0.5 * inc.I11) * g1g1
            + _col(0.5 * (inc.I01 - inc.I10)) * g1g0
            - _col(0.5 * (inc.I01 - inc.I10)) * g0g1
            + _col(0.5 * inc.I01 - 1.75 * h * dW - 2 * inc.I111) * d2_vec(d2g1, g1, g1)
            - _col(1.5 * h * dW + 2 * inc.I111) * mv(d1g1, g1g1)
            - 0.25 * h**2 * mv(d1g0, g0)
            - h**2 * d2_vec(d2g1, g0, g1)
            - 0.25 * h**2 * mv(d1g1, g0g1)
            - 0.75 * h**2 * mv(d1g1, g1g0)
            - 0.125 * h**2 * d2_vec(d2g0, g1, g1)
            - 0.25 * h**2 * mv(d1g1, mv(d1g1, g1g1))
            - 0.625 * h**2 * mv(d1g1, d2_vec(d2g1, g1, g1))
            - 1.75 * h**2 * d2_vec(d2g1, g1g1, g1)
            - 0.75 * h**2 * d3_vec(d3g1, g1, g1, g1)
        )

    def implicit(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g0 = prob.derivative(0, 2)(y)
        return (
            _col(0.5 * inc.dW) * g1
            + 0.5 * inc.h * g0
            + _col(0.5 * (inc.I11 + inc.h)) * mv(d1g1, g1)
            + 0.25 * inc.h**2 * mv(d1g0, g0)
            + 0.125 * inc.h**2 * d2_vec(d2g0, g1, g1)
        )

    def jacobian(prob, y, inc):
        g0 = prob.coefficient(0)(y)
        g1 = prob.coefficient(1)(y)
        d1g0 = prob.derivative(0, 1)(y)
        d1g1 = prob.derivative(1, 1)(y)
        d2g0 = prob.derivative(0, 2)(y)
        d2g1 = prob.derivative(1, 2)(y)
        d3g0 = prob.derivative(0, 3)(y)
        d_g1g1 = d2_dot(d2g1, g1) + mm(d1g1, d1g1)
        d_g0g0 = d2_dot(d2g0, g0) + mm(d1g0, d1g0)
        d_g0pp = d3_dot2(d3g0, g1, g1) + 2 * np.einsum(
            "...ijk,...k,...jm->...im", d2g0, g1, d1g1
        )
        return (
            _col2(0.5 * inc.dW) * d1g1
            + 0.5 * inc.h * d1g0
            + _col2(0.5 * (inc.I11 + inc.h)) * d_g1g1
            + 0.25 * inc.h**2 * d_g0g0
            + 0.125 * inc.h**2 * d_g0pp
        )

    return SchemeSpec(
        name="fit",
        order=Fraction(3, 2),
        convergence="strong",
        implicitness=ImplicitnessClass.GENERAL,
        max_derivative_order=3,
        symbolic_ex=_table(ex),
        symbolic_im=_table(im, empty=ZERO),
        explicit_fn=explicit,
        implicit_fn=implicit,
        jacobian_fn=jacobian,
    )


def _table(entries: dict[Tree, Poly], empty: Poly = ONE, cutoff=2) -> WeightMap:
    return WeightMap.from_entries(cutoff, 2, empty, entries)


_MILSTEIN_RE = re.compile(r"^milstein\(([^,]+),([^)]+)\)$")


def make_scheme(kind: str, **params) -> SchemeSpec:
    """Build a scheme by name.

    Names: euler-explicit, euler-semi, euler(theta=...), milstein(alpha=...,
    beta=...), sim (= milstein alpha 1, beta 0), im, sikp, siw, fit.
    """
    if kind == "euler":
        theta = _unit_param(params.pop("theta", 0))
        _no_extras(params)
        return _euler(theta, f"euler({theta})")
    if kind == "euler-explicit":
        _no_extras(params)
        return _euler(Fraction(0), kind)
    if kind == "euler-semi":
        _no_extras(params)
        return _euler(Fraction(1), kind)
    if kind == "milstein":
        a = _unit_param(params.pop("alpha", 0))
        b = _unit_param(params.pop("beta", 0))
        _no_extras(params)
        return _milstein(a, b, f"milstein({a},{b})")
    if kind == "sim":
        _no_extras(params)
        return _milstein(Fraction(1), Fraction(0), "sim")
    builders = {"im": _im_scheme, "sikp": _sikp, "siw": _siw, "fit": _fit}
    if kind in builders:
        _no_extras(params)
        return builders[kind]()
    raise ValueError(f"unknown scheme {kind!r}")


def parse_scheme(text: str) -> SchemeSpec:
    """Parse a CLI scheme name, e.g. 'sikp' or 'milstein(0.5,0)'."""
    m = _MILSTEIN_RE.match(text.replace(" ", ""))
    if m:
        return make_scheme(
            "milstein", alpha=Fraction(m.group(1)), beta=Fraction(m.group(2))
        )
    return make_scheme(text)


def _unit_param(value) -> Fraction:
    v = Fraction(value)
    if not 0 <= v <= 1:
        raise ValueError(f"parameter {value} outside [0, 1]")
    return v


def _no_extras(params: dict) -> None:
    if params:
        raise ValueError(f"unexpected parameters {sorted(params)}")


def elementary_differential(prob: SDEProblem, tree: Tree, x: np.ndarray) -> np.ndarray:
    """Nested derivative of the problem coefficients structured by the tree."""
    x = np.asarray(x, dtype=float)
    if tree.is_empty:
        return x
    kids = [elementary_differential(prob, c, x) for c in tree.children]
    if not kids:
        return prob.coefficient(tree.color)(x)
    letters = "jklm"
    spec = (
        "...i"
        + letters[: len(kids)]
        + ","
        + ",".join("..." + letters[i] for i in range(len(kids)))
        + "->...i"
    )
    deriv = prob.derivative(tree.color, len(kids))(x)
    return np.einsum(spec, deriv, *kids)


def bseries_sum(
    prob: SDEProblem,
    weights: WeightMap,
    inc: StochasticIncrements,
    x: np.ndarray,
    cutoff=2,
) -> np.ndarray:
    """Evaluate sum alpha(tree) * weight(tree)(inc) * F(tree)(x) up to cutoff."""
    from .trees import as_rho2

    cutoff2 = as_rho2(cutoff)
    bindings = inc.bindings()
    total = weights.empty_value.evaluate(bindings) * np.asarray(x, dtype=float)
    for tree, value in weights.table.items():
        if rho2(tree) > cutoff2 or value.is_zero():
            continue
        w = value.evaluate(bindings)
        total = total + float(alpha(tree)) * _col(w) * elementary_differential(
            prob, tree, x
        )
    return total


def one_step_bseries_check(
    s: SchemeSpec, prob: SDEProblem, x, inc: StochasticIncrements, cutoff=2
) -> float:
    """Distance between the converged one-step solution and the truncated
    series with the scheme's exact one-step weights."""
    from .growth import IterationKind
    from .solvers import SolveConfig, solve_step

    phi = exact_method_weights(s.symbolic_ex, s.symbolic_im, cutoff)
    converged = solve_step(
        s,
        prob,
        x,
        inc,
        SolveConfig(method=IterationKind.FULL_NEWTON, tol=1e-14, max_iters=200),
    )
    series = bseries_sum(prob, phi, inc, x, cutoff)
    return float(np.linalg.norm(converged - series))
