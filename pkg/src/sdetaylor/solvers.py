"""One-step solves of the implicit update equation and whole-path integration.

A step of an implicit scheme is y1 = explicit(y0) + implicit(y1).  The three
sweep kinds differ in the linear correction: none (simple iteration), the
implicit part's Jacobian frozen at the step start (modified Newton), or
refreshed at the current iterate (full Newton).  Everything is vectorized
over a batch of paths; states are arrays of shape (..., d) with d <= 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .growth import IterationKind
from .problems import SDEProblem
from .schemes import SchemeSpec, eval_explicit_part, eval_implicit_part, implicit_jacobian

PIVOT_TOL = 1e-14
EXPLOSION_LIMIT = 1e10


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    """How to resolve one implicit step.

    Exactly one of `iterations` (fixed sweep count from the trivial
    predictor) or `tol` (sweep until the update norm drops below tol) must
    be set.
    """

    method: IterationKind = IterationKind.SIMPLE
    iterations: int | None = None
    tol: float | None = None
    max_iters: int = 50

    def __post_init__(self) -> None:
        if (self.iterations is None) == (self.tol is None):
            raise ValueError("set exactly one of iterations or tol")
        if self.iterations is not None and self.iterations < 0:
            raise ValueError("iteration count must be >= 0")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tolerance must be positive")


def solve_linear(a: np.ndarray, b: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Solve a x = b for stacked d x d systems, d <= 2, by pivoted elimination.

    Pivot magnitudes below PIVOT_TOL on `active` rows raise SolverError;
    inactive rows may hold NaN and simply propagate it.
    """
    d = a.shape[-1]
    if d == 1:
        piv = a[..., 0, 0]
        _check_pivot(piv, active)
        return b / piv[..., None]
    if d != 2:
        raise SolverError(f"linear solve supports d <= 2, got d = {d}")
    a00, a01 = a[..., 0, 0], a[..., 0, 1]
    a10, a11 = a[..., 1, 0], a[..., 1, 1]
    b0, b1 = b[..., 0], b[..., 1]
    with np.errstate(invalid="ignore"):
        swap = np.abs(a10) > np.abs(a00)
    p00 = np.where(swap, a10, a00)
    p01 = np.where(swap, a11, a01)
    q0 = np.where(swap, b1, b0)
    r00 = np.where(swap, a00, a10)
    r01 = np.where(swap, a01, a11)
    s0 = np.where(swap, b0, b1)
    _check_pivot(p00, active)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = r00 / p00
        u = r01 - m * p01
        _check_pivot(u, active)
        x1 = (s0 - m * q0) / u
        x0 = (q0 - p01 * x1) / p00
    return np.stack([x0, x1], axis=-1)


def _check_pivot(piv: np.ndarray, active: np.ndarray | None) -> None:
    vals = np.abs(np.atleast_1d(piv))
    mask = np.isfinite(vals) if active is None else np.atleast_1d(active)
    bad = mask & ~(vals > PIVOT_TOL)
    if np.any(bad):
        raise SolverError("singular linear system: pivot below threshold")


def solve_step(
    scheme: SchemeSpec,
    prob: SDEProblem,
    y: np.ndarray,
    inc,
    cfg: SolveConfig,
    active: np.ndarray | None = None,
) -> np.ndarray:
    """Advance one step from y with the configured iteration.

    Fixed mode runs exactly cfg.iterations sweeps from the trivial predictor
    (zero sweeps return y itself).  Tolerance mode returns the first iterate
    whose update norm is at most cfg.tol and raises ConvergenceError when
    max_iters sweeps do not get there.
    """
    y = np.asarray(y, dtype=float)
    bex = eval_explicit_part(scheme, prob, y, inc)
    eye = np.eye(y.shape[-1])
    frozen_jac = None
    if cfg.method is IterationKind.MODIFIED_NEWTON:
        frozen_jac = implicit_jacobian(scheme, prob, y, inc)

    def sweep(current: np.ndarray) -> np.ndarray:
        rhs = bex + eval_implicit_part(scheme, prob, current, inc)
        if cfg.method is IterationKind.SIMPLE:
            return rhs
        jac = (
            frozen_jac
            if cfg.method is IterationKind.MODIFIED_NEWTON
            else implicit_jacobian(scheme, prob, current, inc)
        )
        return solve_linear(eye - jac, rhs - _apply(jac, current), active)

    current = y
    if cfg.iterations is not None:
        for _ in range(cfg.iterations):
            current = sweep(current)
        return current
    for _ in range(cfg.max_iters):
        nxt = sweep(current)
        if _update_norm(nxt, current, active) <= cfg.tol:
            return nxt
        current = nxt
    raise ConvergenceError(f"no convergence within {cfg.max_iters} sweeps")


def _apply(jac: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", jac, v)


def _update_norm(a: np.ndarray, b: np.ndarray, active: np.ndarray | None) -> float:
    diff = np.linalg.norm(a - b, axis=-1)
    if active is not None:
        diff = np.where(active, diff, 0.0)
    return float(np.max(diff)) if diff.ndim else float(diff)


@dataclass
class PathResult:
    """Outcome of integrating a batch of paths on a fixed grid.

    Aborted paths hold NaN states from their abort step onward; abort_step
    is -1 for paths that completed.
    """

    final: np.ndarray
    aborted: np.ndarray
    abort_step: np.ndarray
    trajectory: np.ndarray | None = None

    @property
    def num_aborted(self) -> int:
        return int(np.count_nonzero(self.aborted))


def integrate_path(
    scheme: SchemeSpec,
    prob: SDEProblem,
    x0: np.ndarray,
    increments,
    cfg: SolveConfig,
    record: bool = False,
) -> PathResult:
    """Step the scheme across the whole grid of `increments`.

    `increments` supplies num_steps and step(n) -> per-step random variables
    for a batch of paths.  States blowing past EXPLOSION_LIMIT or going
    non-finite abort their path (the step index is recorded) while the rest
    of the batch continues.
    """
    x0 = np.asarray(x0, dtype=float)
    batch = (increments.batch_size,) if increments.batch_size is not None else ()
    state = np.broadcast_to(x0, batch + x0.shape[-1:]).copy()
    flat = np.atleast_2d(state)
    alive = np.ones(flat.shape[0], dtype=bool)
    abort_step = np.full(flat.shape[0], -1, dtype=int)
    frames = [state.copy()] if record else None

    for n in range(increments.num_steps):
        inc = increments.step(n)
        with np.errstate(over="ignore", invalid="ignore"):
            state = solve_step(scheme, prob, state, inc, cfg, active=alive)
        flat = np.atleast_2d(state)
        with np.errstate(invalid="ignore"):
            bad = ~np.all(np.isfinite(flat), axis=-1) | (
                np.max(np.abs(flat), axis=-1, initial=0.0) > EXPLOSION_LIMIT
            )
        newly = alive & bad
        if np.any(newly):
            abort_step[newly] = n
            alive &= ~bad
            flat[~alive] = np.nan
            state = flat.reshape(state.shape)
        if record:
            frames.append(state.copy())

    return PathResult(
        final=state,
        aborted=~alive,
        abort_step=abort_step,
        trajectory=np.stack(frames) if record else None,
    )
