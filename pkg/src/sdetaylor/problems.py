"""The shipped SDE test problems with analytic derivatives up to third order.

Every problem is autonomous with one noise channel.  Coefficient evaluators
are vectorized over leading batch axes: states have shape (..., d), an
order-k derivative tensor has shape (..., d, d, ..., d) with k trailing state
axes and is symmetric in them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class SDEProblem:
    """An autonomous SDE dX = g0(X) dt + g1(X) dW with analytic derivatives.

    exact_path(t, w) maps terminal time and Brownian value to the strong
    solution where one is known in closed form.  weak_functional and
    exact_expectation describe a payoff f with known E f(X(t)).
    """

    name: str
    dim: int
    x0: np.ndarray
    coeffs: tuple[Callable, Callable]
    derivs: tuple[tuple[Callable, ...], tuple[Callable, ...]]
    exact_path: Callable | None = None
    weak_functional: Callable | None = None
    exact_expectation: Callable | None = None

    def coefficient(self, channel: int) -> Callable:
        return self.coeffs[channel]

    def derivative(self, channel: int, order: int) -> Callable:
        """Derivative tensor evaluator of the given order (0 = the coefficient)."""
        if order == 0:
            return self.coeffs[channel]
        table = self.derivs[channel]
        if not 1 <= order <= len(table):
            raise ValueError(
                f"{self.name} provides derivatives up to order {len(table)}, "
                f"requested {order}"
            )
        return table[order - 1]


def _zeros_like_state(y: np.ndarray, extra_axes: int) -> np.ndarray:
    d = y.shape[-1]
    return np.zeros(y.shape[:-1] + (d,) * (extra_axes + 1))


def _sym_set(out: np.ndarray, comp: int, args: tuple[int, ...], val) -> None:
    """Assign a derivative entry symmetrically in the argument axes."""
    for p in set(permutations(args)):
        out[(Ellipsis, comp) + p] = val


def gbm(mu: float = -3.0, sigma: float = 3.0**0.5, x0: float = 1.0) -> SDEProblem:
    """Scalar linear SDE dX = mu X dt + sigma X dW with lognormal solution."""

    def g0(y):
        return mu * y

    def g1(y):
        return sigma * y

    def const_jac(c):
        def jac(y):
            out = _zeros_like_state(y, 1)
            out[..., 0, 0] = c
            return out

        return jac

    def zero2(y):
        return _zeros_like_state(y, 2)

    def zero3(y):
        return _zeros_like_state(y, 3)

    def exact_path(t, w):
        return np.asarray(x0 * np.exp((mu - 0.5 * sigma**2) * t + sigma * w))[..., None]

    return SDEProblem(
        name="gbm",
        dim=1,
        x0=np.array([x0]),
        coeffs=(g0, g1),
        derivs=((const_jac(mu), zero2, zero3), (const_jac(sigma), zero2, zero3)),
        exact_path=exact_path,
    )


def van_der_pol(mu: float = 10.0, theta: float = 1.0, x0=(2.0, 0.0)) -> SDEProblem:
    """Stochastic Van der Pol oscillator; stiff for large mu, no closed solution."""

    def g0(y):
        u, v = y[..., 0], y[..., 1]
        return np.stack([v, mu * (1 - u**2) * v - u], axis=-1)

    def d1g0(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 1)
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = -2 * mu * u * v - 1.0
        out[..., 1, 1] = mu * (1 - u**2)
        return out

    def d2g0(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 2)
        _sym_set(out, 1, (0, 0), -2 * mu * v)
        _sym_set(out, 1, (0, 1), -2 * mu * u)
        return out

    def d3g0(y):
        out = _zeros_like_state(y, 3)
        _sym_set(out, 1, (0, 0, 1), -2 * mu)
        return out

    def g1(y):
        u, v = y[..., 0], y[..., 1]
        return np.stack([np.zeros_like(u), theta * (1 - u**2) * v], axis=-1)

    def d1g1(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 1)
        out[..., 1, 0] = -2 * theta * u * v
        out[..., 1, 1] = theta * (1 - u**2)
        return out

    def d2g1(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 2)
        _sym_set(out, 1, (0, 0), -2 * theta * v)
        _sym_set(out, 1, (0, 1), -2 * theta * u)
        return out

    def d3g1(y):
        out = _zeros_like_state(y, 3)
        _sym_set(out, 1, (0, 0, 1), -2 * theta)
        return out

    return SDEProblem(
        name="vdp",
        dim=2,
        x0=np.asarray(x0, dtype=float),
        coeffs=(g0, g1),
        derivs=((d1g0, d2g0, d3g0), (d1g1, d2g1, d3g1)),
    )


def scalar_nonlinear() -> SDEProblem:
    """dX = (X/2 + sqrt(X^2+1)) dt + sqrt(X^2+1) dW, solved by sinh(t + W(t)).

    Ships the cubic payoff in arsinh X whose expectation is t^3 - 3t^2 + 2t.
    """

    def g0(y):
        x = y[..., 0]
        return (0.5 * x + np.sqrt(x**2 + 1))[..., None]

    def g1(y):
        x = y[..., 0]
        return np.sqrt(x**2 + 1)[..., None]

    def d1(shift):
        def fn(y):
            x = y[..., 0]
            return (shift + x / np.sqrt(x**2 + 1))[..., None, None]

        return fn

    def d2(y):
        x = y[..., 0]
        return ((x**2 + 1) ** -1.5)[..., None, None, None]

    def d3(y):
        x = y[..., 0]
        return (-3 * x * (x**2 + 1) ** -2.5)[..., None, None, None, None]

    def exact_path(t, w):
        return np.sinh(t + np.asarray(w))[..., None]

    def weak_functional(y):
        z = np.arcsinh(y[..., 0])
        return z**3 - 6 * z**2 + 8 * z

    def exact_expectation(t):
        return t**3 - 3 * t**2 + 2 * t

    return SDEProblem(
        name="nonlinear1d",
        dim=1,
        x0=np.array([0.0]),
        coeffs=(g0, g1),
        derivs=((d1(0.5), d2, d3), (d1(0.0), d2, d3)),
        exact_path=exact_path,
        weak_functional=weak_functional,
        exact_expectation=exact_expectation,
    )


def coupled_2d() -> SDEProblem:
    """Two-dimensional nonlinear system with a single driving noise.

    Drift (u/2 + sqrt(u^2+v^2+1), u/2 + sqrt(v^2+1)), diffusion
    (sin u + 2 sin v, cos u + 3 cos v); no closed-form solution.
    """

    def g0(y):
        u, v = y[..., 0], y[..., 1]
        s = np.sqrt(u**2 + v**2 + 1)
        t = np.sqrt(v**2 + 1)
        return np.stack([0.5 * u + s, 0.5 * u + t], axis=-1)

    def d1g0(y):
        u, v = y[..., 0], y[..., 1]
        s = np.sqrt(u**2 + v**2 + 1)
        t = np.sqrt(v**2 + 1)
        out = _zeros_like_state(y, 1)
        out[..., 0, 0] = 0.5 + u / s
        out[..., 0, 1] = v / s
        out[..., 1, 0] = 0.5
        out[..., 1, 1] = v / t
        return out

    def d2g0(y):
        u, v = y[..., 0], y[..., 1]
        s = np.sqrt(u**2 + v**2 + 1)
        t = np.sqrt(v**2 + 1)
        out = _zeros_like_state(y, 2)
        _sym_set(out, 0, (0, 0), (v**2 + 1) / s**3)
        _sym_set(out, 0, (0, 1), -u * v / s**3)
        _sym_set(out, 0, (1, 1), (u**2 + 1) / s**3)
        _sym_set(out, 1, (1, 1), 1 / t**3)
        return out

    def d3g0(y):
        u, v = y[..., 0], y[..., 1]
        s = np.sqrt(u**2 + v**2 + 1)
        t = np.sqrt(v**2 + 1)
        out = _zeros_like_state(y, 3)
        _sym_set(out, 0, (0, 0, 0), -3 * (v**2 + 1) * u / s**5)
        _sym_set(out, 0, (0, 0, 1), 2 * v / s**3 - 3 * (v**2 + 1) * v / s**5)
        _sym_set(out, 0, (0, 1, 1), -u / s**3 + 3 * u * v**2 / s**5)
        _sym_set(out, 0, (1, 1, 1), -3 * (u**2 + 1) * v / s**5)
        _sym_set(out, 1, (1, 1, 1), -3 * v / t**5)
        return out

    def g1(y):
        u, v = y[..., 0], y[..., 1]
        return np.stack([np.sin(u) + 2 * np.sin(v), np.cos(u) + 3 * np.cos(v)], axis=-1)

    def d1g1(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 1)
        out[..., 0, 0] = np.cos(u)
        out[..., 0, 1] = 2 * np.cos(v)
        out[..., 1, 0] = -np.sin(u)
        out[..., 1, 1] = -3 * np.sin(v)
        return out

    def d2g1(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 2)
        _sym_set(out, 0, (0, 0), -np.sin(u))
        _sym_set(out, 0, (1, 1), -2 * np.sin(v))
        _sym_set(out, 1, (0, 0), -np.cos(u))
        _sym_set(out, 1, (1, 1), -3 * np.cos(v))
        return out

    def d3g1(y):
        u, v = y[..., 0], y[..., 1]
        out = _zeros_like_state(y, 3)
        _sym_set(out, 0, (0, 0, 0), -np.cos(u))
        _sym_set(out, 0, (1, 1, 1), -2 * np.cos(v))
        _sym_set(out, 1, (0, 0, 0), np.sin(u))
        _sym_set(out, 1, (1, 1, 1), 3 * np.sin(v))
        return out

    return SDEProblem(
        name="nonlinear2d",
        dim=2,
        x0=np.zeros(2),
        coeffs=(g0, g1),
        derivs=((d1g0, d2g0, d3g0), (d1g1, d2g1, d3g1)),
    )


_BUILDERS = {
    "gbm": gbm,
    "vdp": van_der_pol,
    "nonlinear1d": scalar_nonlinear,
    "nonlinear2d": coupled_2d,
}


def problem_names() -> tuple[str, ...]:
    return tuple(_BUILDERS)


def get_problem(name: str, **params) -> SDEProblem:
    """Build a shipped problem by CLI name."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_BUILDERS)}")
    return builder(**params)
