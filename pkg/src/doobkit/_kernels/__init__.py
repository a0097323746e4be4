"""Kernel backend selection.

The four grouped-reduction primitives here are the hot inner loops of the
whole package (every conditional expectation, measurability check, and
crossing time funnels through them).  A compiled extension is preferred when
it was built; ``DOOBKIT_PURE_PYTHON=1`` forces the NumPy fallback.  The
wrappers coerce dtypes so both backends see float64/int64 contiguous arrays.

Empty blocks are allowed for ``group_sum`` / ``group_min_max`` (sum 0, range
(+inf, -inf)); ``group_mean_expand`` requires every block to carry positive
weight, which partitions of a finite space guarantee.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("DOOBKIT_PURE_PYTHON"):
    from . import _py as _impl

    BACKEND = "python"
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _py as _impl

        BACKEND = "python"

__all__ = [
    "BACKEND",
    "crossing_indices",
    "group_mean_expand",
    "group_min_max",
    "group_sum",
]


def _floats(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _blocks(block_of) -> np.ndarray:
    return np.ascontiguousarray(block_of, dtype=np.int64)


def group_sum(values, block_of, block_count: int) -> np.ndarray:
    return _impl.group_sum(_floats(values), _blocks(block_of), int(block_count))


def group_mean_expand(values, weights, block_of, block_count: int) -> np.ndarray:
    return _impl.group_mean_expand(
        _floats(values), _floats(weights), _blocks(block_of), int(block_count)
    )


def group_min_max(values, block_of, block_count: int) -> tuple[np.ndarray, np.ndarray]:
    return _impl.group_min_max(_floats(values), _blocks(block_of), int(block_count))


def crossing_indices(matrix, level: float) -> np.ndarray:
    return _impl.crossing_indices(_floats(matrix), float(level))
