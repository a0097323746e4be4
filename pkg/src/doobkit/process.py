"""Time grids on [0, 1], filtrations, adapted processes, stopping times.

A process is a (time x atom) matrix over a filtration of refining
partitions; adaptedness means row ``k`` is constant on the blocks of
partition ``k``.  Martingale/submartingale checks and crossing times are
pointwise-exact up to the stated tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DimensionError,
    MeasurabilityError,
    MonotonicityError,
    ValidationError,
)
from .measure import FiniteSpace, Partition, as_values, cond_exp, refines

# Stored values are exact, so measurability is checked at float-parsing slack;
# martingale-type identities involve arithmetic and get the looser default.
MEAS_ATOL = 1e-12
DEFAULT_TOL = 1e-10

__all__ = [
    "DEFAULT_TOL",
    "MEAS_ATOL",
    "AdaptedProcess",
    "Filtration",
    "StoppingTime",
    "TimeGrid",
    "crossing_time",
    "is_martingale",
    "is_submartingale",
    "martingale_violation",
    "measurability_violation",
    "submartingale_violation",
    "value_at",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times starting at 0.0 and ending at 1.0."""

    times: np.ndarray

    def __post_init__(self) -> None:
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise DimensionError("a time grid needs at least the two endpoints 0 and 1")
        if not np.all(np.isfinite(t)):
            raise ValidationError("grid times must be finite")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValidationError("grid must start at 0.0 and end at 1.0 exactly")
        if np.any(np.diff(t) <= 0.0):
            raise ValidationError("grid times must be strictly increasing")
        object.__setattr__(self, "times", _readonly(t))

    @property
    def n_times(self) -> int:
        return self.times.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1

    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.times, other.times)

    def __hash__(self) -> int:
        return hash(self.times.tobytes())

    @classmethod
    def uniform(cls, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValidationError("a grid needs at least one step")
        return cls(np.arange(n_steps + 1) / n_steps)


@dataclass(frozen=True, eq=False)
class Filtration:
    """One partition per grid time, each refined by the next."""

    space: FiniteSpace
    grid: TimeGrid
    partitions: tuple[Partition, ...]

    def __post_init__(self) -> None:
        parts = tuple(self.partitions)
        if len(parts) != self.grid.n_times:
            raise DimensionError(
                f"need one partition per grid time ({self.grid.n_times}); got {len(parts)}"
            )
        for k, p in enumerate(parts):
            if p.atom_count != self.space.atom_count:
                raise DimensionError(f"partition {k} lives on a different atom set")
        for k in range(len(parts) - 1):
            if not refines(parts[k], parts[k + 1]):
                raise ValidationError(f"partition {k + 1} does not refine partition {k}")
        object.__setattr__(self, "partitions", parts)

    @property
    def n_times(self) -> int:
        return self.grid.n_times

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Filtration):
            return NotImplemented
        return (
            np.array_equal(self.space.probs, other.space.probs)
            and self.grid == other.grid
            and self.partitions == other.partitions
        )

    def __hash__(self) -> int:
        return hash((self.space.probs.tobytes(), self.grid, self.partitions))


def measurability_violation(partition: Partition, values: np.ndarray) -> float:
    """Largest spread of ``values`` within any block (0 iff measurable)."""
    lo, hi = _kernels.group_min_max(values, partition.block_of, partition.block_count)
    return float(np.max(hi - lo))


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """A (time x atom) value matrix whose row ``k`` is measurable w.r.t.
    the filtration's partition ``k``."""

    filtration: Filtration
    values: np.ndarray

    def __post_init__(self) -> None:
        f = self.filtration
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        want = (f.n_times, f.space.atom_count)
        if v.shape != want:
            raise DimensionError(f"values must have shape {want}; got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("process values must be finite")
        for k in range(f.n_times):
            gap = measurability_violation(f.partitions[k], v[k])
            if gap > MEAS_ATOL:
                raise MeasurabilityError(
                    f"row {k} is not measurable for partition {k} (block spread {gap:.3e})"
                )
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def _binop(self, other: "AdaptedProcess", sign: float) -> "AdaptedProcess":
        if not isinstance(other, AdaptedProcess):
            return NotImplemented
        if self.filtration != other.filtration:
            raise DimensionError("processes live on different filtrations")
        return AdaptedProcess(self.filtration, self.values + sign * other.values)

    def __add__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        return self._binop(other, 1.0)

    def __sub__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        return self._binop(other, -1.0)

    def __mul__(self, scalar: float) -> "AdaptedProcess":
        return AdaptedProcess(self.filtration, self.values * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class StoppingTime:
    """A grid index per atom such that {time == k} is decidable at time k."""

    filtration: Filtration
    time_index_of: np.ndarray

    def __post_init__(self) -> None:
        f = self.filtration
        idx = np.ascontiguousarray(self.time_index_of, dtype=np.int64)
        if idx.shape != (f.space.atom_count,):
            raise DimensionError("need one time index per atom")
        if idx.min() < 0 or idx.max() >= f.n_times:
            raise DimensionError(f"time indices must lie in 0..{f.n_times - 1}")
        for k in range(f.n_times):
            gap = measurability_violation(f.partitions[k], (idx == k).astype(np.float64))
            if gap > 0.0:
                raise MeasurabilityError(
                    f"{{time == {k}}} is not decidable by partition {k}"
                )
        object.__setattr__(self, "time_index_of", _readonly(idx))


def _drift_gaps(x: AdaptedProcess) -> np.ndarray:
    """Per (step, atom): E(x_{k+1} | partition_k) - x_k."""
    f = x.filtration
    out = np.empty((x.n_times - 1, f.space.atom_count))
    for k in range(x.n_times - 1):
        out[k] = cond_exp(f.space, x.values[k + 1], f.partitions[k]) - x.values[k]
    return out


def martingale_violation(x: AdaptedProcess) -> float:
    """max_k max_atom |E(x_{k+1}|F_k) - x_k| (0 for a one-time process)."""
    if x.n_times == 1:
        return 0.0
    return float(np.max(np.abs(_drift_gaps(x))))


def submartingale_violation(x: AdaptedProcess) -> float:
    """Largest amount by which E(x_{k+1}|F_k) falls below x_k (0 if none)."""
    if x.n_times == 1:
        return 0.0
    return float(max(np.max(-_drift_gaps(x)), 0.0) + 0.0)


def is_martingale(x: AdaptedProcess, tol: float = DEFAULT_TOL) -> bool:
    return martingale_violation(x) <= tol


def is_submartingale(x: AdaptedProcess, tol: float = DEFAULT_TOL) -> bool:
    return submartingale_violation(x) <= tol


def crossing_time(a: AdaptedProcess, level: float, tol: float = DEFAULT_TOL) -> StoppingTime:
    """Largest grid index whose value is still <= ``level`` (0 if none).

    ``a`` must be nondecreasing along each atom's path; the result is a valid
    stopping time whenever ``a`` is predictable, and construction re-checks
    decidability either way.
    """
    drop = float(np.max(np.maximum(-np.diff(a.values, axis=0), 0.0), initial=0.0))
    if drop > tol:
        raise MonotonicityError(f"path decreases by {drop:.3e} (tolerance {tol:g})")
    idx = _kernels.crossing_indices(a.values, level)
    return StoppingTime(a.filtration, idx)


def value_at(x: AdaptedProcess, when: StoppingTime) -> np.ndarray:
    """The random variable x_when: each atom's value at its stopping index."""
    if x.filtration != when.filtration:
        raise DimensionError("process and stopping time live on different filtrations")
    return x.values[when.time_index_of, np.arange(x.values.shape[1])]
