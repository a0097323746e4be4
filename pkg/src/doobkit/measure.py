"""Finite probability spaces, partitions, and exact conditional expectation.

On a finite space with strictly positive atom weights every sub-sigma-algebra
is generated by a unique partition of the atoms, conditional expectation is a
blockwise probability-weighted average, and almost-sure statements become
pointwise statements about atoms.  Random variables are plain float64 vectors
indexed by atom; :func:`as_values` validates them at API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, ValidationError

# Atom probabilities must sum to 1 within this; measurability of stored
# values is exact up to the same float-parsing slack.
PROB_TOL = 1e-12

__all__ = [
    "PROB_TOL",
    "FiniteSpace",
    "Partition",
    "as_values",
    "cond_exp",
    "expect",
    "refines",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Atoms ``0..n-1`` carrying strictly positive probabilities summing to 1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise DimensionError("probs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
            raise ValidationError("atom probabilities must be finite and strictly positive")
        total = float(p.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(
                f"atom probabilities must sum to 1 within {PROB_TOL:g}; got {total!r}"
            )
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def atom_count(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "FiniteSpace":
        if n <= 0:
            raise ValidationError("a finite space needs at least one atom")
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class Partition:
    """A partition of the atoms, i.e. a sub-sigma-algebra.

    ``block_of[atom]`` is the block label; labels are canonicalized to
    ``0..block_count-1`` in order of first occurrence, so two partitions are
    equal iff they group the atoms identically.
    """

    block_of: np.ndarray
    block_count: int = field(init=False)

    def __post_init__(self) -> None:
        raw = np.ascontiguousarray(self.block_of, dtype=np.int64)
        if raw.ndim != 1 or raw.size == 0:
            raise DimensionError("block_of must be a nonempty 1-d integer vector")
        uniq, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
        rank = np.empty(uniq.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(uniq.size)
        object.__setattr__(self, "block_of", _readonly(rank[inverse]))
        object.__setattr__(self, "block_count", int(uniq.size))

    @property
    def atom_count(self) -> int:
        return self.block_of.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.block_count == other.block_count and np.array_equal(
            self.block_of, other.block_of
        )

    def __hash__(self) -> int:
        return hash((self.block_count, self.block_of.tobytes()))

    def blocks(self) -> list[np.ndarray]:
        """Atom indices of each block, in canonical block order."""
        order = np.argsort(self.block_of, kind="stable")
        counts = np.bincount(self.block_of, minlength=self.block_count)
        return np.split(order, np.cumsum(counts)[:-1])

    @classmethod
    def trivial(cls, atom_count: int) -> "Partition":
        return cls(np.zeros(atom_count, dtype=np.int64))

    @classmethod
    def discrete(cls, atom_count: int) -> "Partition":
        return cls(np.arange(atom_count, dtype=np.int64))

    @classmethod
    def from_blocks(cls, blocks, atom_count: int | None = None) -> "Partition":
        """Build from explicit blocks; they must cover each atom exactly once."""
        blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
        if atom_count is None:
            atom_count = int(sum(b.size for b in blocks))
        labels = np.full(atom_count, -1, dtype=np.int64)
        for i, b in enumerate(blocks):
            if b.size and (b.min() < 0 or b.max() >= atom_count):
                raise DimensionError(f"block {i} references atoms outside 0..{atom_count - 1}")
            if np.any(labels[b] != -1):
                raise ValidationError(f"block {i} overlaps an earlier block")
            labels[b] = i
        if np.any(labels == -1):
            raise ValidationError("blocks do not cover every atom")
        return cls(labels)


def refines(coarse: Partition, fine: Partition) -> bool:
    """True iff every block of ``fine`` lies inside a single block of ``coarse``."""
    if coarse.atom_count != fine.atom_count:
        raise DimensionError("partitions live on different atom sets")
    lo, hi = _kernels.group_min_max(
        coarse.block_of.astype(np.float64), fine.block_of, fine.block_count
    )
    return bool(np.all(lo == hi))


def as_values(space: FiniteSpace, x) -> np.ndarray:
    """Validate ``x`` as a random variable on ``space`` (finite float64 vector)."""
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != space.atom_count:
        raise DimensionError(
            f"random variable must be a vector of length {space.atom_count}; got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ValidationError("random variable values must be finite")
    return v


def _event_mask(space: FiniteSpace, event) -> np.ndarray:
    e = np.asarray(sorted(event) if isinstance(event, (set, frozenset)) else event)
    if e.dtype == np.bool_:
        if e.shape != (space.atom_count,):
            raise DimensionError("boolean event mask must have one entry per atom")
        return e
    if e.size == 0:
        return np.zeros(space.atom_count, dtype=bool)
    e = e.astype(np.int64)
    if e.ndim != 1 or e.min() < 0 or e.max() >= space.atom_count:
        raise DimensionError("event atoms must be indices into 0..atom_count-1")
    mask = np.zeros(space.atom_count, dtype=bool)
    mask[e] = True
    return mask


def expect(space: FiniteSpace, x, event=None) -> float:
    """E(x), or E(x; event) when an event (atom set / boolean mask) is given."""
    v = as_values(space, x)
    if event is None:
        return float(space.probs @ v)
    mask = _event_mask(space, event)
    return float(space.probs[mask] @ v[mask])


def cond_exp(space: FiniteSpace, x, partition: Partition) -> np.ndarray:
    """E(x | partition): the probability-weighted average on each block,
    expanded back to a vector over atoms."""
    v = as_values(space, x)
    if partition.atom_count != space.atom_count:
        raise DimensionError("partition lives on a different atom set")
    return _kernels.group_mean_expand(v, space.probs, partition.block_of, partition.block_count)
