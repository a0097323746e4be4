"""Grid-refinement studies of discrete compensators.

As a grid refines, the compensator's mean profile E(A_t) stabilizes; this
module evaluates the profile on a chain of strictly nested grids, compares
consecutive profiles at their shared (coarse) times, and condenses the
deltas into a verdict.  Lattice model kinds evaluate profiles in closed
form, so their deltas are zero up to rounding; Monte Carlo kinds estimate
profiles from one batch per grid, every batch reusing the study seed so the
comparison rides on common random numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModelError, ValidationError
from .mc import CondExpEstimator, estimate_compensator, simulate
from .models import (
    ModelSpec,
    dyadic_grid,
    increment_mean_profile,
    target_compensator,
)
from .process import TimeGrid

__all__ = [
    "EXACT_TOL",
    "ConvergenceReport",
    "GridResult",
    "RefinementStudy",
    "common_time_indices",
    "compensator_convergence",
    "dyadic_grids",
    "report_convergence",
]

EXACT_TOL = 1e-10


def dyadic_grids(depth_min: int, depth_max: int) -> list[TimeGrid]:
    """Grids with 2**d steps for d in depth_min..depth_max (all times are
    exact dyadics, so nesting is exact)."""
    if not (isinstance(depth_min, int) and isinstance(depth_max, int)):
        raise DomainError("depths must be integers")
    if not 0 <= depth_min <= depth_max <= 20:
        raise DomainError(
            f"depths must satisfy 0 <= min <= max <= 20; got {depth_min}..{depth_max}"
        )
    return [dyadic_grid(d) for d in range(depth_min, depth_max + 1)]


def common_time_indices(coarse: TimeGrid, fine: TimeGrid) -> np.ndarray:
    """Positions of the coarse times inside the fine grid; the coarse grid
    must be a strict subset."""
    if fine.n_times <= coarse.n_times:
        raise ValidationError("grids must be strictly nested (each refines the previous)")
    idx = np.searchsorted(fine.times, coarse.times)
    idx = np.minimum(idx, fine.n_times - 1)
    if not np.array_equal(fine.times[idx], coarse.times):
        raise ValidationError("grids are not nested: some coarse times are missing")
    return idx


@dataclass(frozen=True, eq=False)
class GridResult:
    """The compensator mean profile on one grid."""

    grid: TimeGrid
    depth: int | None
    profile: np.ndarray
    profile_se: np.ndarray | None
    target_dev: float | None

    @property
    def terminal_mean(self) -> float:
        return float(self.profile[-1])

    @property
    def terminal_se(self) -> float:
        return 0.0 if self.profile_se is None else float(self.profile_se[-1])


@dataclass(frozen=True, eq=False)
class RefinementStudy:
    """Profiles across nested grids plus consecutive-profile deltas.

    ``l1_deltas[i]`` is the mean absolute difference between profiles i and
    i+1 at the coarse grid's times; ``delta_noise[i]`` is the matching
    standard-error scale (zero for closed-form profiles).
    """

    model: ModelSpec
    results: tuple[GridResult, ...]
    l1_deltas: np.ndarray
    delta_noise: np.ndarray


def _infer_depth(grid: TimeGrid) -> int | None:
    n = grid.n_steps
    if n & (n - 1) == 0 and np.array_equal(grid.times, np.arange(n + 1) / n):
        return int(n).bit_length() - 1
    return None


def compensator_convergence(
    model: ModelSpec,
    grids,
    path_count: int | None = None,
    seed: int | None = None,
    estimator: CondExpEstimator | None = None,
) -> RefinementStudy:
    """Evaluate the compensator profile of ``model`` on each grid.

    Lattice kinds use their closed-form increment means; ``mc-*`` kinds need
    ``path_count`` and ``seed`` and estimate the profile (default
    estimator: analytic).
    """
    grids = list(grids)
    if not grids:
        raise ValidationError("need at least one grid")
    if not model.is_grid_parameterized:
        raise ModelError(
            f"kind {model.kind!r} is tied to a fixed grid and cannot be refined"
        )
    for coarse, fine in zip(grids, grids[1:]):
        common_time_indices(coarse, fine)

    results: list[GridResult] = []
    for grid in grids:
        if model.is_mc:
            if path_count is None or seed is None:
                raise ValidationError("Monte Carlo refinement needs path_count and seed")
            est = estimate_compensator(
                simulate(model, grid, path_count, seed),
                estimator or CondExpEstimator.analytic(),
            )
            profile, se = est.a_mean, est.a_se
        else:
            means = increment_mean_profile(model, grid)
            profile = np.concatenate([[0.0], np.cumsum(means)])
            se = None
        target = target_compensator(model, grid.times)
        dev = None if target is None else float(np.max(np.abs(profile - target)))
        results.append(
            GridResult(grid=grid, depth=_infer_depth(grid), profile=profile,
                       profile_se=se, target_dev=dev)
        )

    deltas = np.zeros(max(len(results) - 1, 0))
    noise = np.zeros_like(deltas)
    for i in range(len(results) - 1):
        coarse, fine = results[i], results[i + 1]
        idx = common_time_indices(coarse.grid, fine.grid)
        deltas[i] = float(np.mean(np.abs(coarse.profile - fine.profile[idx])))
        if coarse.profile_se is not None:
            noise[i] = float(np.mean(coarse.profile_se + fine.profile_se[idx]))
    return RefinementStudy(
        model=model, results=tuple(results), l1_deltas=deltas, delta_noise=noise
    )


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """One row per grid plus the overall verdict."""

    verdict: str
    rows: tuple[dict, ...]


def report_convergence(study: RefinementStudy) -> ConvergenceReport:
    """Verdicts: 'single grid' (nothing to compare), 'converged (exact)'
    (all deltas at rounding level), 'decreasing' (deltas shrink within
    3-sigma noise), else 'inconclusive'."""
    deltas = study.l1_deltas
    if deltas.size == 0:
        verdict = "single grid"
    elif float(np.max(deltas)) <= EXACT_TOL:
        verdict = "converged (exact)"
    else:
        noise = study.delta_noise
        shrinking = all(
            deltas[i + 1] <= deltas[i] + 3.0 * (noise[i] + noise[i + 1]) + 1e-12
            for i in range(deltas.size - 1)
        )
        verdict = "decreasing" if shrinking else "inconclusive"
    rows = []
    for i, r in enumerate(study.results):
        rows.append(
            {
                "depth": r.depth,
                "grid_size": r.grid.n_times,
                "terminal_mean": r.terminal_mean,
                "delta_prev": float(deltas[i - 1]) if i > 0 else None,
                "target_dev": r.target_dev,
            }
        )
    return ConvergenceReport(verdict=verdict, rows=tuple(rows))
