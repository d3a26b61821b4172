"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's own recursions: the gamma oracle
enumerates node subsets of an ordered tree, the automorphism oracle tries
all node permutations, and the increment oracle simulates iterated
integrals on a fine grid.  They are slow but obviously correct.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from sdetaylor.trees import EMPTY, Tree, sort_key


def flatten(tree: Tree) -> tuple[list[int | None], list[int]]:
    """Ordered-tree form: preorder parent array and color array."""
    parents: list[int | None] = []
    colors: list[int] = []

    def walk(t: Tree, parent: int | None) -> None:
        idx = len(parents)
        parents.append(parent)
        colors.append(t.color)
        for child in t.children:
            walk(child, idx)

    walk(tree, None)
    return parents, colors


def _rebuild(parents, colors, keep: set[int], root: int) -> Tree:
    kids = [
        _rebuild(parents, colors, keep, i)
        for i, p in enumerate(parents)
        if p == root and i in keep
    ]
    return Tree(colors[root], tuple(kids))


def gamma_oracle(tree: Tree) -> dict[tuple[Tree, tuple[Tree, ...]], int]:
    """Count, per unordered (subtree, remainder) class, the root-containing
    connected node subsets of the ordered tree realizing it; plus the empty
    selection."""
    parents, colors = flatten(tree)
    n = len(parents)
    counts: dict[tuple[Tree, tuple[Tree, ...]], int] = {}

    full = _rebuild(parents, colors, set(range(n)), 0)
    counts[(EMPTY, (full,))] = 1

    for mask in range(1 << n):
        keep = {i for i in range(n) if mask >> i & 1}
        if 0 not in keep:
            continue
        if any(parents[i] not in keep for i in keep if i != 0):
            continue
        sub = _rebuild(parents, colors, keep, 0)
        dangling = [
            _rebuild(parents, colors, set(range(n)), i)
            for i in range(n)
            if i not in keep and parents[i] in keep
        ]
        rem = tuple(sorted(dangling, key=sort_key))
        key = (sub, rem)
        counts[key] = counts.get(key, 0) + 1
    return counts


def automorphism_count(tree: Tree) -> int:
    """Number of node permutations preserving root, parenthood, and colors."""
    parents, colors = flatten(tree)
    n = len(parents)
    count = 0
    for perm in permutations(range(n)):
        if perm[0] != 0:
            continue
        if any(colors[perm[i]] != colors[i] for i in range(n)):
            continue
        ok = all(perm[parents[i]] == parents[perm[i]] for i in range(1, n))
        if ok:
            count += 1
    return count


def fine_grid_increments(rng: np.random.Generator, h: float, samples: int, substeps: int):
    """Simulate (dW, I10, I11, I111) over one step by refining the Brownian
    path to `substeps` pieces and evaluating the iterated integrals as
    left-point sums.  Returns arrays of shape (samples,)."""
    dt = h / substeps
    dw = np.sqrt(dt) * rng.standard_normal((samples, substeps))
    w_left = np.cumsum(dw, axis=1) - dw  # W at left endpoints, relative to start
    t_left = dt * np.arange(substeps)
    i10 = (w_left * dt).sum(axis=1)
    i11 = (w_left * dw).sum(axis=1)
    i11_run = 0.5 * (w_left**2 - t_left)  # Ito integral of W dW up to each left endpoint
    i111 = (i11_run * dw).sum(axis=1)
    return dw.sum(axis=1), i10, i11, i111


def central_difference_jacobian(fn, y: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of fn: (d,) -> (d,)."""
    d = y.shape[-1]
    out = np.empty((fn(y).shape[-1], d))
    for j in range(d):
        step = np.zeros(d)
        step[j] = eps
        out[:, j] = (fn(y + step) - fn(y - step)) / (2 * eps)
    return out


def random_weight_map(rng, cutoff, num_colors=2, empty=1):
    """Weight map with uniform random small rational constants."""
    from fractions import Fraction

    from sdetaylor.algebra import WeightMap
    from sdetaylor.poly import Poly

    def fn(tree):
        return Poly.const(Fraction(rng.randint(-9, 9), rng.randint(1, 9)))

    return WeightMap.build(cutoff, num_colors, Poly.const(Fraction(empty)), fn)
