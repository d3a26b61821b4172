"""Exact sparse multivariate polynomials over the rationals.

The indeterminates are weight symbols attached to trees (explicit-part,
implicit-part, predictor weights) plus the named one-step random increments.
A polynomial maps canonical monomials to exact coefficients; coefficients
stay plain ints whenever possible and fall back to Fraction otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .trees import Tree, bracket, sort_key

INCREMENT_NAMES = ("h", "dW", "I11", "I10", "I01", "I111")

_KIND_LABEL = {"ex": "Ex", "im": "Im", "pred": "P", "inc": ""}


@dataclass(frozen=True)
class Sym:
    """A single indeterminate: a tree-indexed weight or a named increment."""

    kind: str
    key: Tree | str

    def __post_init__(self) -> None:
        if self.kind not in _KIND_LABEL:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if self.kind == "inc":
            if self.key not in INCREMENT_NAMES:
                raise ValueError(f"unknown increment name {self.key!r}")
        elif not isinstance(self.key, Tree) or self.key.is_empty:
            raise ValueError("tree-indexed symbols need a nonempty tree key")

    @classmethod
    def ex(cls, tree: Tree) -> Sym:
        return cls("ex", tree)

    @classmethod
    def im(cls, tree: Tree) -> Sym:
        return cls("im", tree)

    @classmethod
    def pred(cls, tree: Tree) -> Sym:
        return cls("pred", tree)

    @classmethod
    def inc(cls, name: str) -> Sym:
        return cls("inc", name)

    def _order(self):
        if self.kind == "inc":
            return (0, INCREMENT_NAMES.index(self.key), "")
        return (1 if self.kind == "ex" else 2 if self.kind == "im" else 3,) + sort_key(
            self.key
        )

    def __str__(self) -> str:
        if self.kind == "inc":
            return str(self.key)
        return f"{_KIND_LABEL[self.kind]}({bracket(self.key)})"


Monomial = tuple[tuple[Sym, int], ...]

Scalar = int | Fraction


def _mul_monomials(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    merged: dict[Sym, int] = dict(a)
    for sym, exp in b:
        merged[sym] = merged.get(sym, 0) + exp
    return tuple(sorted(merged.items(), key=lambda it: it[0]._order()))


class Poly:
    """Sparse polynomial with exact rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        self.terms: dict[Monomial, Scalar] = {
            m: c for m, c in (terms or {}).items() if c != 0
        }

    @classmethod
    def zero(cls) -> Poly:
        return cls()

    @classmethod
    def const(cls, value: Scalar | float) -> Poly:
        c = value if isinstance(value, int) else Fraction(value)
        return cls({(): c})

    @classmethod
    def symbol(cls, sym: Sym) -> Poly:
        return cls({((sym, 1),): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or set(self.terms) == {()}

    def const_value(self) -> Scalar:
        if not self.is_const():
            raise ValueError(f"{self} is not constant")
        return self.terms.get((), 0)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Poly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == Poly.const(other).terms
        return NotImplemented

    __hash__ = None  # mutable container semantics

    def __add__(self, other: Poly | Scalar) -> Poly:
        other = _coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        res = Poly.__new__(Poly)
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self) -> Poly:
        res = Poly.__new__(Poly)
        res.terms = {m: -c for m, c in self.terms.items()}
        return res

    def __sub__(self, other: Poly | Scalar) -> Poly:
        return self + (-_coerce(other))

    def __rsub__(self, other: Poly | Scalar) -> Poly:
        return _coerce(other) + (-self)

    def __mul__(self, other: Poly | Scalar | float) -> Poly:
        if isinstance(other, (int, Fraction, float)):
            c = other if isinstance(other, int) else Fraction(other)
            if c == 0:
                return Poly.zero()
            res = Poly.__new__(Poly)
            res.terms = {m: v * c for m, v in self.terms.items()}
            return res
        out: dict[Monomial, Scalar] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = _mul_monomials(ma, mb)
                s = out.get(m, 0) + ca * cb
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        res = Poly.__new__(Poly)
        res.terms = out
        return res

    __rmul__ = __mul__

    def __pow__(self, exp: int) -> Poly:
        if exp < 0:
            raise ValueError("negative powers not supported")
        out = Poly.const(1)
        for _ in range(exp):
            out = out * self
        return out

    def symbols(self) -> set[Sym]:
        return {sym for m in self.terms for sym, _ in m}

    def evaluate(self, bindings: Mapping[Sym, float]) -> float:
        """Evaluate numerically; every symbol present must be bound."""
        total = 0.0
        for m, c in self.terms.items():
            val = float(c)
            for sym, exp in m:
                if sym not in bindings:
                    raise KeyError(f"unbound symbol {sym}")
                val *= bindings[sym] ** exp
            total += val
        return total

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: tuple(s._order() + (e,) for s, e in m)):
            c = self.terms[m]
            factors = [f"{s}^{e}" if e > 1 else str(s) for s, e in m]
            body = "*".join(factors)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append(f"-{body}")
            else:
                parts.append(f"{c}*{body}")
        return " + ".join(parts).replace("+ -", "- ")


def _coerce(value: Poly | Scalar) -> Poly:
    if isinstance(value, Poly):
        return value
    return Poly.const(value)


def poly_product(factors: Iterable[Poly]) -> Poly:
    out = Poly.const(1)
    for f in factors:
        if f.is_zero():
            return Poly.zero()
        out = out * f
    return out


ONE = Poly.const(1)
ZERO = Poly.zero()
