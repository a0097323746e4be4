"""Quantitative uniform-integrability diagnostics for compensators.

For a submartingale x with compensator a and a level k > 0 these bounds
control the tail of the terminal compensator value: the Markov bound
P(a_1 >= k) <= E(x_1 - x_0)/k, and a five-term chain that dominates the
tail mass E(a_1; a_1 >= 2k) by a stopped quantity 2 E(x_1 - x_{tau_k})
restricted to {a_1 >= k}, where tau_k is the last time the compensator is
still <= k.  The chain's final term epsilon(k) is nonincreasing in k and
vanishes once k dominates a_1, which is the quantitative content of uniform
integrability on a finite space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .doob import doob_decompose
from .errors import ConsistencyError, DimensionError, DomainError
from .measure import expect
from .process import DEFAULT_TOL, AdaptedProcess, crossing_time, value_at

__all__ = [
    "TailBound",
    "TailReport",
    "epsilon_profile",
    "markov_bound",
    "tail_bound",
]

CHAIN_LABELS = (
    "tail mass E(a1; a1 >= 2k)",
    "clipped excess on tail 2E(a1 - min(a1,k); a1 >= 2k)",
    "clipped excess 2E(a1 - min(a1,k))",
    "stopped excess 2E(a1 - a_tau)",
    "stopped increment on tail 2E(x1 - x_tau; a1 >= k)",
)


def _check_level(k: float) -> float:
    k = float(k)
    if not np.isfinite(k) or k <= 0.0:
        raise DomainError(f"level must be a positive finite number; got {k!r}")
    return k


def _check_pair(x: AdaptedProcess, a: AdaptedProcess) -> None:
    if x.filtration != a.filtration:
        raise DimensionError("process and compensator live on different filtrations")


def _check_compensator(x: AdaptedProcess, a: AdaptedProcess, tol: float) -> None:
    gap = float(np.max(np.abs(doob_decompose(x, tol).a.values - a.values)))
    if gap > tol:
        raise ConsistencyError(
            f"a is not the compensator of x (max deviation {gap:.3e}, tolerance {tol:g})"
        )


def markov_bound(x: AdaptedProcess, a: AdaptedProcess, k: float) -> tuple[float, float]:
    """(P(a_1 >= k), E(x_1 - x_0)/k); lhs <= rhs when a compensates x."""
    k = _check_level(k)
    _check_pair(x, a)
    space = x.filtration.space
    lhs = expect(space, np.ones(space.atom_count), a.values[-1] >= k)
    rhs = expect(space, x.values[-1] - x.values[0]) / k
    return lhs, rhs


@dataclass(frozen=True)
class TailBound:
    """The five-term chain at one level; ``chain`` is nondecreasing and its
    last two entries agree exactly (optional stopping)."""

    level: float
    chain: np.ndarray

    @property
    def tail_lhs(self) -> float:
        return float(self.chain[0])

    @property
    def tail_rhs(self) -> float:
        return float(self.chain[4])

    @property
    def epsilon(self) -> float:
        return float(self.chain[3])


def tail_bound(
    x: AdaptedProcess, a: AdaptedProcess, k: float, tol: float = DEFAULT_TOL
) -> TailBound:
    """Evaluate the five-term chain at level ``k``.

    ``a`` must be the compensator of ``x`` within ``tol``
    (:class:`ConsistencyError` otherwise) so that the stopped terms really
    bound the tail.
    """
    k = _check_level(k)
    _check_pair(x, a)
    _check_compensator(x, a, tol)
    return _tail_bound_unchecked(x, a, k, tol)


def _tail_bound_unchecked(
    x: AdaptedProcess, a: AdaptedProcess, k: float, tol: float
) -> TailBound:
    space = x.filtration.space
    a1 = a.values[-1]
    x1 = x.values[-1]
    on_2k = a1 >= 2.0 * k
    on_k = a1 >= k
    tau = crossing_time(a, k, tol)
    clipped = a1 - np.minimum(a1, k)
    chain = np.array(
        [
            expect(space, a1, on_2k),
            2.0 * expect(space, clipped, on_2k),
            2.0 * expect(space, clipped),
            2.0 * expect(space, a1 - value_at(a, tau)),
            2.0 * expect(space, x1 - value_at(x, tau), on_k),
        ]
    )
    return TailBound(level=k, chain=chain)


@dataclass(frozen=True, eq=False)
class TailReport:
    """Markov and tail-chain numbers across a grid of levels."""

    levels: np.ndarray
    chain: np.ndarray  # (n_levels, 5)
    markov_lhs: np.ndarray
    markov_rhs: np.ndarray

    @property
    def tail_lhs(self) -> np.ndarray:
        return self.chain[:, 0]

    @property
    def tail_rhs(self) -> np.ndarray:
        return self.chain[:, 4]

    @property
    def epsilon(self) -> np.ndarray:
        return self.chain[:, 3]

    def violations(self) -> dict[str, float]:
        """Worst slack of each claimed inequality (0 when all hold)."""
        chain_steps = np.diff(self.chain, axis=1)
        eps_steps = np.diff(self.epsilon) if self.levels.size > 1 else np.zeros(0)
        return {
            "chain_nondecreasing": float(max(np.max(-chain_steps), 0.0) + 0.0),
            "markov": float(max(np.max(self.markov_lhs - self.markov_rhs), 0.0) + 0.0),
            "epsilon_nonincreasing": float(max(np.max(eps_steps, initial=0.0), 0.0) + 0.0),
            "epsilon_nonnegative": float(max(np.max(-self.epsilon), 0.0) + 0.0),
        }


def epsilon_profile(
    x: AdaptedProcess,
    a: AdaptedProcess,
    levels,
    tol: float = DEFAULT_TOL,
) -> TailReport:
    """Tail bounds and Markov bounds for strictly increasing positive levels."""
    lv = np.ascontiguousarray(levels, dtype=np.float64)
    if lv.ndim != 1 or lv.size == 0:
        raise DomainError("levels must be a nonempty 1-d vector")
    if not np.all(np.isfinite(lv)) or lv[0] <= 0.0 or np.any(np.diff(lv) <= 0.0):
        raise DomainError("levels must be positive and strictly increasing")
    _check_pair(x, a)
    _check_compensator(x, a, tol)
    bounds = [_tail_bound_unchecked(x, a, k, tol) for k in lv]
    marks = [markov_bound(x, a, k) for k in lv]
    return TailReport(
        levels=lv,
        chain=np.stack([b.chain for b in bounds]),
        markov_lhs=np.array([m[0] for m in marks]),
        markov_rhs=np.array([m[1] for m in marks]),
    )
