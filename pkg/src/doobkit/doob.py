"""Discrete Doob decomposition and the verification predicates around it.

A submartingale x splits uniquely as x = a + m with a predictable
nondecreasing (the compensator, a_0 = 0) and m a martingale; the compensator
increment over step k is E(x_{k+1} - x_k | F_k).  Besides the decomposition
itself this module checks predictability, naturality (the left-endpoint
pairing against every bounded martingale), uniqueness, and runs the
randomized predictable-iff-natural audit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    MalformedDecompositionError,
    MonotonicityError,
    NotMartingaleError,
    NotSubmartingaleError,
    ValidationError,
)
from .measure import as_values, cond_exp, expect
from .process import (
    DEFAULT_TOL,
    AdaptedProcess,
    Filtration,
    martingale_violation,
    measurability_violation,
    submartingale_violation,
)

__all__ = [
    "Decomposition",
    "DoleansDadeReport",
    "basis_element",
    "check_uniqueness",
    "doleans_dade_audit",
    "doob_decompose",
    "is_natural",
    "is_predictable",
    "martingale_part",
    "natural_pairing",
    "naturality_violation",
    "predictability_violation",
]


def predictability_violation(a: AdaptedProcess) -> float:
    """Largest block spread of a_{k+1} over partition k (and of a_0 over
    partition 0); zero iff ``a`` is predictable."""
    f = a.filtration
    worst = measurability_violation(f.partitions[0], a.values[0])
    for k in range(a.n_times - 1):
        worst = max(worst, measurability_violation(f.partitions[k], a.values[k + 1]))
    return worst


def is_predictable(a: AdaptedProcess, tol: float = DEFAULT_TOL) -> bool:
    return predictability_violation(a) <= tol


def _monotone_drop(a: AdaptedProcess) -> float:
    if a.n_times == 1:
        return 0.0
    return float(max(np.max(-np.diff(a.values, axis=0)), 0.0) + 0.0)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """A candidate pair (a, m); see :meth:`violations` for the invariants."""

    a: AdaptedProcess
    m: AdaptedProcess

    def __post_init__(self) -> None:
        if self.a.filtration != self.m.filtration:
            raise DimensionError("a and m live on different filtrations")

    @property
    def x(self) -> AdaptedProcess:
        return self.a + self.m

    def violations(self) -> dict[str, float]:
        """Max violation of each structural invariant (all 0 for a genuine
        decomposition): a starts at 0, is nondecreasing and predictable, and
        m is a martingale."""
        return {
            "starts_at_zero": float(np.max(np.abs(self.a.values[0]))),
            "nondecreasing": _monotone_drop(self.a),
            "predictable": predictability_violation(self.a),
            "martingale": martingale_violation(self.m),
        }

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        bad = {k: v for k, v in self.violations().items() if v > tol}
        if bad:
            worst = max(bad, key=bad.get)
            raise MalformedDecompositionError(
                f"invariant '{worst}' violated by {bad[worst]:.3e} (tolerance {tol:g})"
            )


def doob_decompose(x: AdaptedProcess, tol: float = DEFAULT_TOL) -> Decomposition:
    """Split a submartingale into compensator and martingale part.

    The compensator is accumulated forward: a_{k+1} = a_k +
    E(x_{k+1} - x_k | F_k).  Raises :class:`NotSubmartingaleError` when some
    conditional drift is negative beyond ``tol``.
    """
    gap = submartingale_violation(x)
    if gap > tol:
        raise NotSubmartingaleError(
            f"conditional drift falls below 0 by {gap:.3e} (tolerance {tol:g})"
        )
    f = x.filtration
    rows = np.zeros_like(x.values)
    for k in range(x.n_times - 1):
        step = cond_exp(f.space, x.values[k + 1] - x.values[k], f.partitions[k])
        rows[k + 1] = rows[k] + step
    a = AdaptedProcess(f, rows)
    return Decomposition(a, AdaptedProcess(f, x.values - rows))


def martingale_part(x: AdaptedProcess, a_terminal) -> AdaptedProcess:
    """The martingale m_k = E(x_last - a_terminal | F_k) directly, without
    accumulating the compensator first."""
    f = x.filtration
    target = x.values[-1] - as_values(f.space, a_terminal)
    rows = np.stack([cond_exp(f.space, target, f.partitions[k]) for k in range(x.n_times)])
    return AdaptedProcess(f, rows)


def basis_element(filtration: Filtration, atom: int) -> AdaptedProcess:
    """The closed martingale n_k = E(1_atom | F_k).

    Ranging ``atom`` over all atoms gives a spanning family: a process is
    natural iff the pairing identity holds against each of these.
    """
    n = filtration.space.atom_count
    if not 0 <= atom < n:
        raise DimensionError(f"atom must lie in 0..{n - 1}")
    e = np.zeros(n)
    e[atom] = 1.0
    rows = [cond_exp(filtration.space, e, p) for p in filtration.partitions]
    return AdaptedProcess(filtration, np.stack(rows))


def _check_pairing_inputs(n: AdaptedProcess, a: AdaptedProcess, tol: float) -> None:
    if n.filtration != a.filtration:
        raise DimensionError("martingale and integrator live on different filtrations")
    gap = martingale_violation(n)
    if gap > tol:
        raise NotMartingaleError(f"pairing requires a martingale; violation {gap:.3e}")
    drop = _monotone_drop(a)
    if drop > tol:
        raise MonotonicityError(f"integrator decreases by {drop:.3e} (tolerance {tol:g})")


def natural_pairing(n: AdaptedProcess, a: AdaptedProcess, tol: float = DEFAULT_TOL) -> float:
    """The left-endpoint pairing sum_k E(n_k (a_{k+1} - a_k))."""
    _check_pairing_inputs(n, a, tol)
    f = n.filtration
    total = 0.0
    for k in range(a.n_times - 1):
        total += expect(f.space, n.values[k] * (a.values[k + 1] - a.values[k]))
    return total


def naturality_violation(a: AdaptedProcess, tol: float = DEFAULT_TOL) -> float:
    """Largest pairing defect |pairing(n, a) - E(n_last a_last)| over the
    closed-martingale basis.

    For the basis element of atom w the pairing collapses to
    p_w * sum_k E(a_{k+1} - a_k | F_k)(w) and the right side to
    p_w * a_last(w), so one conditional-expectation sweep evaluates every
    basis pairing at once; tests cross-check this against the literal
    per-element loop.
    """
    drop = _monotone_drop(a)
    if drop > tol:
        raise MonotonicityError(f"integrator decreases by {drop:.3e} (tolerance {tol:g})")
    start = float(np.max(np.abs(a.values[0])))
    if start > tol:
        raise ValidationError(f"integrator must start at 0; max |a_0| = {start:.3e}")
    f = a.filtration
    dual = np.zeros(f.space.atom_count)
    for k in range(a.n_times - 1):
        dual += cond_exp(f.space, a.values[k + 1] - a.values[k], f.partitions[k])
    return float(np.max(np.abs(f.space.probs * (dual - a.values[-1]))))


def is_natural(a: AdaptedProcess, tol: float = DEFAULT_TOL) -> bool:
    """True iff the pairing identity holds against every bounded martingale
    (equivalently, against the closed-martingale basis) within ``tol``."""
    return naturality_violation(a, tol) <= tol


def check_uniqueness(
    x: AdaptedProcess,
    first: Decomposition,
    second: Decomposition,
    tol: float = DEFAULT_TOL,
) -> bool:
    """Validate both decompositions against ``x`` and report whether they
    agree.  Structural violations raise; honest disagreement returns False."""
    for label, d in (("first", first), ("second", second)):
        try:
            d.validate(tol)
        except MalformedDecompositionError as err:
            raise MalformedDecompositionError(f"{label} decomposition: {err}") from None
        gap = float(np.max(np.abs(d.a.values + d.m.values - x.values)))
        if gap > tol:
            raise MalformedDecompositionError(
                f"{label} decomposition does not sum back to x (max gap {gap:.3e})"
            )
    return float(np.max(np.abs(first.a.values - second.a.values))) <= tol


@dataclass(frozen=True)
class DoleansDadeReport:
    """2x2 contingency table of (predictable?, natural?) over audit trials."""

    trials: int
    predictable_natural: int
    predictable_not_natural: int
    not_predictable_natural: int
    not_predictable_not_natural: int

    @property
    def off_diagonal(self) -> int:
        return self.predictable_not_natural + self.not_predictable_natural

    def table(self) -> np.ndarray:
        return np.array(
            [
                [self.predictable_natural, self.predictable_not_natural],
                [self.not_predictable_natural, self.not_predictable_not_natural],
            ],
            dtype=np.int64,
        )


def doleans_dade_audit(
    filtration: Filtration,
    trials: int,
    rng_seed: int,
    tol: float = DEFAULT_TOL,
) -> DoleansDadeReport:
    """Classify random nondecreasing adapted processes as predictable and as
    natural; the two labels must coincide.

    Trial t draws from ``default_rng((rng_seed, t))``, so any trial can be
    replayed in isolation.  Each increment is a per-atom |standard normal|
    averaged onto partition k (predictable step) or partition k+1 (merely
    adapted step), a fair coin choosing per step.
    """
    if trials < 1:
        raise ValidationError("need at least one trial")
    f = filtration
    space, parts = f.space, f.partitions
    counts = np.zeros((2, 2), dtype=np.int64)
    for t in range(trials):
        rng = np.random.default_rng((rng_seed, t))
        rows = np.zeros((f.n_times, space.atom_count))
        for k in range(f.n_times - 1):
            raw = np.abs(rng.standard_normal(space.atom_count))
            project_to = parts[k] if rng.integers(0, 2) == 0 else parts[k + 1]
            rows[k + 1] = rows[k] + cond_exp(space, raw, project_to)
        a = AdaptedProcess(f, rows)
        pred = is_predictable(a, tol)
        nat = is_natural(a, tol)
        counts[0 if pred else 1, 0 if nat else 1] += 1
    return DoleansDadeReport(
        trials=trials,
        predictable_natural=int(counts[0, 0]),
        predictable_not_natural=int(counts[0, 1]),
        not_predictable_natural=int(counts[1, 0]),
        not_predictable_not_natural=int(counts[1, 1]),
    )
