"""NumPy implementations of the grouped-reduction kernels.

This is the fallback backend; ``doobkit._kernels`` prefers the compiled
extension when it imports.  Both backends expose the same four primitives
over atom-indexed arrays and must agree to the last bit modulo summation
order (tested against each other):

``group_sum``
    per-block sums of a vector or matrix of per-atom values
``group_mean_expand``
    blockwise weighted means broadcast back to the atoms
``group_min_max``
    per-block minimum and maximum of a vector
``crossing_indices``
    per column of a row-monotone matrix, the largest row index whose value
    is at or below a level (0 if none is)

Inputs are coerced/validated by the wrappers in ``doobkit._kernels``; here
``values`` is float64 and C-contiguous, ``block_of`` is int64 with entries
in ``[0, block_count)``.
"""

from __future__ import annotations

import numpy as np


def group_sum(values: np.ndarray, block_of: np.ndarray, block_count: int) -> np.ndarray:
    if values.ndim == 1:
        return np.bincount(block_of, weights=values, minlength=block_count)
    # np.add.at scatters in atom order, so per-cell rounding matches the
    # compiled backend's sequential loop bit for bit.
    out = np.zeros((block_count, values.shape[1]))
    np.add.at(out, block_of, values)
    return out


def group_mean_expand(
    values: np.ndarray,
    weights: np.ndarray,
    block_of: np.ndarray,
    block_count: int,
) -> np.ndarray:
    wsum = np.bincount(block_of, weights=weights, minlength=block_count)
    if values.ndim == 1:
        wval = np.bincount(block_of, weights=weights * values, minlength=block_count)
        return (wval / wsum)[block_of]
    wval = group_sum(values * weights[:, None], block_of, block_count)
    return (wval / wsum[:, None])[block_of]


def group_min_max(
    values: np.ndarray, block_of: np.ndarray, block_count: int
) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(block_count, np.inf)
    hi = np.full(block_count, -np.inf)
    np.minimum.at(lo, block_of, values)
    np.maximum.at(hi, block_of, values)
    return lo, hi


def crossing_indices(matrix: np.ndarray, level: float) -> np.ndarray:
    counts = (matrix <= level).sum(axis=0)
    return np.maximum(counts - 1, 0).astype(np.int64)
