"""Monte Carlo machinery: coupled increments, convergence runs, stability.

Randomness is organized as counter-based streams: a Philox generator keyed
by (seed, batch index) drives each fixed-size batch of paths, so results are
bit-identical for any worker count.  All step sizes of one experiment are
served by a single fine grid per batch; coarser levels are exact
aggregations of it, realizing the same Brownian path at every resolution.
"""

from __future__ import annotations

import csv
import io
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .growth import IterationKind
from .problems import SDEProblem, get_problem
from .schemes import SchemeSpec, StochasticIncrements, parse_scheme
from .solvers import PathResult, SolveConfig, integrate_path

_METHOD_NAMES = {
    "simple": IterationKind.SIMPLE,
    "modified": IterationKind.MODIFIED_NEWTON,
    "full": IterationKind.FULL_NEWTON,
}


class ExperimentError(RuntimeError):
    pass


def iteration_kind(method: str | IterationKind) -> IterationKind:
    if isinstance(method, IterationKind):
        return method
    try:
        return _METHOD_NAMES[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_METHOD_NAMES)}")


@dataclass
class PathIncrements:
    """Per-step Brownian data for a batch of paths at one resolution.

    Only the increments dW and the time-integrals I10 are stored; the other
    iterated integrals are recomputed from them through the pathwise
    identities, which keeps aggregation across resolutions exact.
    """

    h: float
    dW: np.ndarray  # (batch, steps)
    I10: np.ndarray  # (batch, steps)

    @property
    def batch_size(self) -> int:
        return self.dW.shape[0]

    @property
    def num_steps(self) -> int:
        return self.dW.shape[1]

    def step(self, n: int) -> StochasticIncrements:
        return StochasticIncrements.from_brownian(self.h, self.dW[:, n], self.I10[:, n])

    def terminal_brownian(self) -> np.ndarray:
        return self.dW.sum(axis=1)


def philox_generator(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_increments(rng: np.random.Generator, h: float) -> StochasticIncrements:
    """One step's random variables: dW ~ N(0, h), I10 jointly Gaussian with
    variance h^3/3 and covariance h^2/2 against dW; the rest by identity."""
    if h <= 0:
        raise ValueError("step size must be positive")
    z1, z2 = rng.standard_normal(2)
    dw = np.sqrt(h) * z1
    i10 = h**1.5 * (0.5 * z1 + z2 / (2 * np.sqrt(3.0)))
    return StochasticIncrements.from_brownian(h, dw, i10)


def sample_path_increments(
    seed: int, stream: int, batch: int, steps: int, h: float
) -> PathIncrements:
    if h <= 0:
        raise ValueError("step size must be positive")
    z = philox_generator(seed, stream).standard_normal((2, batch, steps))
    dw = np.sqrt(h) * z[0]
    i10 = h**1.5 * (0.5 * z[0] + z[1] / (2 * np.sqrt(3.0)))
    return PathIncrements(h, dw, i10)


def aggregate(fine: PathIncrements, factor: int) -> PathIncrements:
    """Coarsen by an integer factor, reproducing the same Brownian path.

    Per coarse block: dW adds up, and I10 adds up after shifting each fine
    piece by its block-relative Brownian offset; the remaining integrals
    follow from the identities once dW and I10 are known.
    """
    if factor < 1 or fine.num_steps % factor:
        raise ValueError(f"factor {factor} does not divide {fine.num_steps} steps")
    if factor == 1:
        return fine
    m, n = fine.dW.shape
    dwb = fine.dW.reshape(m, n // factor, factor)
    i10b = fine.I10.reshape(m, n // factor, factor)
    prefix = np.cumsum(dwb, axis=2) - dwb  # Brownian offset at each fine step start
    return PathIncrements(
        fine.h * factor,
        dwb.sum(axis=2),
        (i10b + fine.h * prefix).sum(axis=2),
    )


def estimate_order(hs: Sequence[float], errors: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares slope/intercept of log2(error) against log2(h), plus the
    root-mean-square fit residual."""
    if len(hs) != len(errors) or len(hs) < 2:
        raise ValueError("need at least two (h, error) points")
    if any(h <= 0 for h in hs) or any(e <= 0 for e in errors):
        raise ValueError("step sizes and errors must be positive")
    x = np.log2(np.asarray(hs, dtype=float))
    y = np.log2(np.asarray(errors, dtype=float))
    xbar, ybar = x.mean(), y.mean()
    slope = float(((x - xbar) * (y - ybar)).sum() / ((x - xbar) ** 2).sum())
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    return slope, intercept, float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class ReferenceConfig:
    """Reference solution for problems without a closed form: the same path
    integrated by a trusted scheme on a grid `refine` times finer."""

    scheme: str = "sikp"
    method: str = "simple"
    iterations: int = 2
    refine: int = 10


@dataclass
class ExperimentResult:
    kind: str
    scheme: str
    problem: str
    method: str
    iterations: int
    step_sizes: tuple[float, ...]
    errors: tuple[float, ...]
    stderrs: tuple[float, ...]
    num_paths: int
    seed: int
    slope: float
    intercept: float
    residual: float
    aborted: tuple[int, ...]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["h", "error", "stderr", "M", "scheme", "method", "iters", "seed"])
        for h, err, se in zip(self.step_sizes, self.errors, self.stderrs):
            writer.writerow(
                [repr(h), repr(err), repr(se), self.num_paths, self.scheme,
                 self.method, self.iterations, self.seed]
            )
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            f.write(self.to_csv_text())
        with open(_plot_path(path), "w") as f:
            f.write(_plot_script(path, self))

    @classmethod
    def from_csv_text(cls, text: str) -> ExperimentResult:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        hs = tuple(float(r["h"]) for r in rows)
        errors = tuple(float(r["error"]) for r in rows)
        stderrs = tuple(float(r["stderr"]) for r in rows)
        slope, intercept, residual = estimate_order(hs, errors)
        first = rows[0]
        return cls(
            kind="",
            scheme=first["scheme"],
            problem="",
            method=first["method"],
            iterations=int(first["iters"]),
            step_sizes=hs,
            errors=errors,
            stderrs=stderrs,
            num_paths=int(first["M"]),
            seed=int(first["seed"]),
            slope=slope,
            intercept=intercept,
            residual=residual,
            aborted=(0,) * len(hs),
        )

    @classmethod
    def from_csv(cls, path: str) -> ExperimentResult:
        with open(path) as f:
            return cls.from_csv_text(f.read())


def _plot_path(csv_path: str) -> str:
    base = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return base + ".gnuplot"


def _plot_script(csv_path: str, result: ExperimentResult) -> str:
    return (
        "set datafile separator ','\n"
        "set logscale xy 2\n"
        "set xlabel 'step size h'\n"
        "set ylabel 'error'\n"
        f"set title '{result.scheme} {result.method} k={result.iterations} "
        f"(slope {result.slope:.3f})'\n"
        f"fitted(x) = 2**{result.intercept!r} * x**{result.slope!r}\n"
        f"plot '{csv_path}' using 1:2:3 skip 1 with yerrorlines title 'measured', \\\n"
        "     fitted(x) title 'fit'\n"
    )


@dataclass(frozen=True)
class _StrongTask:
    scheme: str
    problem: str
    method: str
    iterations: int
    exponents: tuple[int, ...]
    final_time: float
    seed: int
    batch_size: int
    reference: ReferenceConfig | None
    weak: bool = False


def _grid_layout(task: _StrongTask) -> tuple[float, int, dict[int, int]]:
    """Fine step size, fine step count, and per-exponent aggregation factor."""
    refine = task.reference.refine if task.reference else 1
    emax = max(task.exponents)
    h_fine = 2.0**-emax / refine
    n_fine = round(task.final_time / h_fine)
    if abs(n_fine * h_fine - task.final_time) > 1e-12:
        raise ExperimentError("final time must be a multiple of the finest step")
    factors = {e: 2 ** (emax - e) * refine for e in task.exponents}
    return h_fine, n_fine, factors


def _run_batch(task: _StrongTask, batch_index: int, batch: int):
    """Per-level (error sum, squared sum, live count, aborted count) for one
    batch of paths; levels are aggregated views of one fine sample."""
    scheme = parse_scheme(task.scheme)
    prob = get_problem(task.problem)
    cfg = SolveConfig(method=iteration_kind(task.method), iterations=task.iterations)
    h_fine, n_fine, factors = _grid_layout(task)
    fine = sample_path_increments(task.seed, batch_index, batch, n_fine, h_fine)

    ref_finals: dict[int, np.ndarray] = {}
    if task.reference is None and not task.weak:
        if prob.exact_path is None:
            raise ExperimentError(
                f"problem {prob.name} has no closed-form solution; "
                "supply a ReferenceConfig"
            )
        target = prob.exact_path(task.final_time, fine.terminal_brownian())
    elif task.reference is not None:
        ref = task.reference
        ref_scheme = parse_scheme(ref.scheme)
        ref_cfg = SolveConfig(
            method=iteration_kind(ref.method), iterations=ref.iterations
        )
        for e in task.exponents:
            incs = aggregate(fine, factors[e] // ref.refine)
            ref_finals[e] = integrate_path(
                ref_scheme, prob, prob.x0, incs, ref_cfg
            ).final

    out = []
    for e in task.exponents:
        incs = aggregate(fine, factors[e])
        res = integrate_path(scheme, prob, prob.x0, incs, cfg)
        ok = ~res.aborted
        if task.weak:
            values = np.where(ok, prob.weak_functional(res.final), 0.0)
        else:
            level_target = ref_finals.get(e, None)
            if level_target is None:
                level_target = target
            diff = np.linalg.norm(res.final - level_target, axis=-1)
            values = np.where(ok, diff, 0.0)
        out.append(
            (
                float(values.sum()),
                float((values**2).sum()),
                int(ok.sum()),
                int(res.num_aborted),
            )
        )
    return out


def _worker(args):
    return _run_batch(*args)


def _run_all_batches(task: _StrongTask, num_paths: int, workers: int):
    if num_paths % task.batch_size:
        raise ExperimentError("batch size must divide the number of paths")
    num_batches = num_paths // task.batch_size
    arg_list = [(task, i, task.batch_size) for i in range(num_batches)]
    if workers <= 1:
        partials = [_worker(a) for a in arg_list]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            partials = list(pool.map(_worker, arg_list))
    # merge per level in fixed batch order so sums do not depend on workers
    levels = len(task.exponents)
    sums = [0.0] * levels
    sqs = [0.0] * levels
    count = [0] * levels
    aborted = [0] * levels
    for part in partials:
        for i, (s, q, n, a) in enumerate(part):
            sums[i] += s
            sqs[i] += q
            count[i] += n
            aborted[i] += a
    return sums, sqs, count, aborted


def _finish(task, num_paths, seed, sums, sqs, count, aborted, center=None):
    hs, errors, stderrs = [], [], []
    for i, e in enumerate(task.exponents):
        n = count[i]
        if aborted[i] > 0.001 * num_paths:
            raise ExperimentError(
                f"{aborted[i]} of {num_paths} paths aborted at h=2^-{e}"
            )
        mean = sums[i] / n
        var = max(sqs[i] / n - mean * mean, 0.0) * n / max(n - 1, 1)
        se = float(np.sqrt(var / n))
        err = abs(mean - center) if center is not None else mean
        hs.append(2.0**-e)
        errors.append(err)
        stderrs.append(se)
    slope, intercept, residual = estimate_order(hs, errors)
    return ExperimentResult(
        kind="weak" if task.weak else "strong",
        scheme=task.scheme,
        problem=task.problem,
        method=task.method,
        iterations=task.iterations,
        step_sizes=tuple(hs),
        errors=tuple(errors),
        stderrs=tuple(stderrs),
        num_paths=num_paths,
        seed=seed,
        slope=slope,
        intercept=intercept,
        residual=residual,
        aborted=tuple(aborted),
    )


def strong_convergence_experiment(
    scheme: str,
    problem: str = "nonlinear1d",
    method: str = "simple",
    iterations: int = 1,
    *,
    exponents: Sequence[int] = (6, 7, 8, 9, 10),
    num_paths: int = 2000,
    final_time: float = 1.0,
    seed: int = 42,
    workers: int = 1,
    batch_size: int = 500,
    reference: ReferenceConfig | None = None,
    csv_path: str | None = None,
) -> ExperimentResult:
    """Mean pathwise endpoint error against the step size.

    Step sizes run over 2^-e for the given exponents; all levels and the
    reference (closed form, or a finer trusted scheme) share each sampled
    Brownian path.  The fitted log-log slope estimates the strong order.
    """
    task = _StrongTask(
        scheme=scheme,
        problem=problem,
        method=method,
        iterations=iterations,
        exponents=tuple(sorted(exponents, reverse=True)),
        final_time=final_time,
        seed=seed,
        batch_size=min(batch_size, num_paths),
        reference=reference,
    )
    prob = get_problem(problem)
    if prob.exact_path is None and reference is None:
        raise ExperimentError(
            f"problem {problem} needs a ReferenceConfig (no closed-form solution)"
        )
    sums, sqs, count, aborted = _run_all_batches(task, num_paths, workers)
    result = _finish(task, num_paths, seed, sums, sqs, count, aborted)
    if csv_path:
        result.write_csv(csv_path)
    return result


def weak_convergence_experiment(
    scheme: str,
    problem: str = "nonlinear1d",
    method: str = "simple",
    iterations: int = 1,
    *,
    exponents: Sequence[int] = (1, 2, 3, 4),
    num_paths: int = 1_000_000,
    final_time: float = 1.0,
    seed: int = 42,
    workers: int = 1,
    batch_size: int = 250_000,
    csv_path: str | None = None,
) -> ExperimentResult:
    """Bias |E f(Y_N) - E f(X(T))| against the step size.

    The error per level is the absolute deviation of the Monte Carlo mean of
    the problem's payoff from its closed-form expectation, with the
    estimator's standard error reported alongside.
    """
    prob = get_problem(problem)
    if prob.weak_functional is None or prob.exact_expectation is None:
        raise ExperimentError(f"problem {problem} has no weak functional")
    task = _StrongTask(
        scheme=scheme,
        problem=problem,
        method=method,
        iterations=iterations,
        exponents=tuple(sorted(exponents, reverse=True)),
        final_time=final_time,
        seed=seed,
        batch_size=min(batch_size, num_paths),
        reference=None,
        weak=True,
    )
    sums, sqs, count, aborted = _run_all_batches(task, num_paths, workers)
    center = prob.exact_expectation(final_time)
    result = _finish(task, num_paths, seed, sums, sqs, count, aborted, center=center)
    if csv_path:
        result.write_csv(csv_path)
    return result


def ms_stability_factor(scheme: str, mu: complex, sigma: complex, h: float) -> float:
    """Per-step growth factor of E|Y|^2 for the linear test equation.

    Explicit Euler multiplies the second moment by |1 + h mu|^2 + h |sigma|^2
    per step; the drift-implicit variant by (1 + h |sigma|^2) / |1 - h mu|^2.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    mu, sigma = complex(mu), complex(sigma)
    if scheme == "euler-explicit":
        return abs(1 + h * mu) ** 2 + h * abs(sigma) ** 2
    if scheme == "euler-semi":
        denom = abs(1 - h * mu) ** 2
        if denom == 0:
            raise ZeroDivisionError("1 - h*mu vanishes; factor undefined")
        return (1 + h * abs(sigma) ** 2) / denom
    raise ValueError(f"stability factor defined for the Euler family, not {scheme!r}")


def mc_stability_growth(
    scheme: str,
    mu: float,
    sigma: float,
    h: float,
    num_paths: int = 100_000,
    num_steps: int = 20,
    seed: int = 42,
) -> tuple[float, float]:
    """Monte Carlo estimate (value, stderr) of the per-step growth factor of
    E|Y|^2, pooling the independent step ratios across the whole grid."""
    spec = parse_scheme(scheme)
    prob = get_problem("gbm", mu=mu, sigma=sigma)
    method = (
        IterationKind.SIMPLE if scheme == "euler-explicit" else IterationKind.FULL_NEWTON
    )
    cfg = SolveConfig(method=method, iterations=1)
    incs = sample_path_increments(seed, 0, num_paths, num_steps, h)
    res = integrate_path(spec, prob, prob.x0, incs, cfg, record=True)
    traj = res.trajectory[..., 0]  # (steps+1, paths)
    ratios = (traj[1:] ** 2 / traj[:-1] ** 2).ravel()
    est = float(ratios.mean())
    se = float(ratios.std(ddof=1) / np.sqrt(ratios.size))
    return est, se


def van_der_pol_demo(
    h: float = 0.05,
    mu: float = 10.0,
    theta: float = 1.0,
    final_time: float = 16.0,
    seed: int = 42,
) -> dict[str, PathResult]:
    """Integrate one Van der Pol path with the explicit and drift-implicit
    first-order schemes on the same Brownian path."""
    prob = get_problem("vdp", mu=mu, theta=theta)
    n = round(final_time / h)
    incs = sample_path_increments(seed, 0, 1, n, h)
    explicit = integrate_path(
        parse_scheme("milstein(0,0)"),
        prob,
        prob.x0,
        incs,
        SolveConfig(method=IterationKind.SIMPLE, iterations=1),
        record=True,
    )
    semi = integrate_path(
        parse_scheme("milstein(1,0)"),
        prob,
        prob.x0,
        incs,
        SolveConfig(method=IterationKind.FULL_NEWTON, tol=1e-10, max_iters=100),
        record=True,
    )
    return {"explicit": explicit, "semi-implicit": semi}
