"""Shared builders for randomized test corpora."""

from __future__ import annotations

import numpy as np

from doobkit import (
    AdaptedProcess,
    Filtration,
    FiniteSpace,
    ModelSpec,
    Partition,
    TimeGrid,
    build_finite_model,
    cond_exp,
)


def tree(steps: int, process: str = "walk-squared", std: float = 1.0):
    """(filtration, process) for a uniform binary tree."""
    return build_finite_model(
        ModelSpec("binary-tree", {"steps": steps, "process": process, "step_std": std})
    )


def random_filtration(rng: np.random.Generator, n_atoms: int, n_steps: int) -> Filtration:
    """Random refining partition chain on a random strictly positive space."""
    probs = rng.uniform(0.2, 1.0, size=n_atoms)
    space = FiniteSpace(probs / probs.sum())
    labels = np.zeros(n_atoms, dtype=np.int64)
    parts = [Partition(labels)]
    for _ in range(n_steps):
        # random binary splits; refinement holds by construction
        labels = labels * 2 + (rng.random(n_atoms) < 0.5)
        parts.append(Partition(labels))
    grid = TimeGrid(np.linspace(0.0, 1.0, n_steps + 1))
    return Filtration(space, grid, tuple(parts))


def random_martingale(f: Filtration, rng: np.random.Generator) -> AdaptedProcess:
    """Closed martingale of a random terminal variable."""
    terminal = rng.standard_normal(f.space.atom_count)
    rows = np.stack([cond_exp(f.space, terminal, p) for p in f.partitions])
    return AdaptedProcess(f, rows)


def random_predictable_increasing(f: Filtration, rng: np.random.Generator) -> AdaptedProcess:
    """Nondecreasing, starts at 0, each increment known one step ahead."""
    n = f.space.atom_count
    rows = np.zeros((f.n_times, n))
    for k in range(f.n_times - 1):
        rows[k + 1] = rows[k] + cond_exp(f.space, np.abs(rng.standard_normal(n)), f.partitions[k])
    return AdaptedProcess(f, rows)


def random_submartingale_with_compensator(f: Filtration, rng: np.random.Generator):
    """(x, a): x = martingale + a with a random predictable increasing a, so
    the Doob compensator of x is exactly a (uniqueness)."""
    a = random_predictable_increasing(f, rng)
    m = random_martingale(f, rng)
    return m + a, a


def submartingale_corpus(seed: int = 20260814):
    """(label, filtration, process, known_compensator_or_None) tuples
    spanning the families the decomposition must handle; at least 20."""
    rng = np.random.default_rng(seed)
    corpus = []
    for steps in (1, 2, 3, 4, 5, 6, 8, 10, 12):
        f, x = tree(steps, "walk-squared")
        profile = np.repeat(np.arange(steps + 1, dtype=np.float64)[:, None], 1 << steps, axis=1)
        corpus.append((f"walk-squared-{steps}", f, x, AdaptedProcess(f, profile)))
        f2, x2 = tree(steps, "walk-abs")
        corpus.append((f"walk-abs-{steps}", f2, x2, None))
    for steps in (4, 6):
        f, x = tree(steps, "walk")
        zero = AdaptedProcess(f, np.zeros_like(x.values))
        corpus.append((f"walk-{steps}", f, x, zero))
    for steps, power in ((4, 1), (4, 2)):
        f, x = tree(steps, "drift")
        values = np.repeat((f.grid.times**power)[:, None], f.space.atom_count, axis=1)
        drift = AdaptedProcess(f, values)
        corpus.append((f"drift-t^{power}-{steps}", f, drift, drift))
    for steps in (3, 5, 7):
        f, _ = tree(steps, "walk")
        x, a = random_submartingale_with_compensator(f, rng)
        corpus.append((f"random-drift-{steps}", f, x, a))
    return corpus
