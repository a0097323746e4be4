"""Monte Carlo path simulation and cross-sectional compensator estimation.

Path generation is counter-based for reproducibility: a batch is filled in
fixed chunks of :data:`CHUNK_PATHS` rows, chunk c drawing from
``default_rng((seed, c))`` with one flat draw per variate kind reshaped
row-major.  Path i therefore depends only on (model, grid, seed, i) — never
on the total path count or scheduling — and re-running any configuration
reproduces every byte.

Estimated compensators accumulate fitted conditional increment means along
each path.  ``a_se`` is the standard error of the *mean* profile: estimators
fitted in-batch telescope (occupancy-weighted bin means and
intercept-bearing regressions both preserve cross-sectional means, so the
mean estimated compensator equals mean(x_t - x_0) exactly) and inherit that
mean's sampling error; for the analytic estimator the accumulated drifts
are independent across paths and the usual cross-path standard error
applies.

Custom models plug in as drivers: any object with
``simulate_chunk(rng, grid, rows, seed, path_offset) -> (rows, n_times)``
array is accepted by :func:`simulate`, and an optional
``increment_mean(k, grid, states)`` enables the analytic estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, ModelError, ValidationError
from .models import ModelSpec
from .process import TimeGrid

__all__ = [
    "CHUNK_PATHS",
    "CompensatorEstimate",
    "CondExpEstimator",
    "PathBatch",
    "ResidualTestReport",
    "estimate_compensator",
    "residual_martingale_test",
    "resolve_driver",
    "simulate",
    "split_batch",
]

CHUNK_PATHS = 4096

# Exponential gaps drawn per path before the (practically unreachable)
# per-path top-up kicks in; sized so P(Poisson(rate) exceeds it) < 1e-40.
def _poisson_base_draws(rate: float) -> int:
    return int(np.ceil(rate + 12.0 * np.sqrt(rate + 1.0) + 30.0))


class _PoissonDriver:
    """Unit-jump counting process with exponential inter-arrival times."""

    def __init__(self, rate: float) -> None:
        self.rate = float(rate)
        self.model_id = f"mc-poisson(rate={self.rate!r})"

    def simulate_chunk(self, rng, grid: TimeGrid, rows: int, seed: int, path_offset: int):
        times = grid.times
        n_draws = _poisson_base_draws(self.rate)
        gaps = rng.exponential(1.0 / self.rate, size=rows * n_draws).reshape(rows, n_draws)
        arrivals = np.cumsum(gaps, axis=1)
        # bin b of occ counts arrivals in (t_{b-1}, t_b]; N(t_j) is then the
        # prefix sum.  Arrivals past the horizon land in column n_times.
        idx = np.searchsorted(times, arrivals, side="left")
        occ = np.zeros((rows, grid.n_times + 1))
        np.add.at(occ, (np.repeat(np.arange(rows), n_draws), idx.ravel()), 1.0)
        counts = np.cumsum(occ[:, : grid.n_times], axis=1)
        for r in np.flatnonzero(arrivals[:, -1] <= times[-1]):
            counts[r] = self._full_row(arrivals[r], times, seed, path_offset + r)
        return counts

    def _full_row(self, base: np.ndarray, times: np.ndarray, seed: int, path_index: int):
        """Extend one path's arrivals past the horizon with a per-path
        stream, keeping the row independent of its chunk mates."""
        arrivals = base
        round_no = 0
        while arrivals[-1] <= times[-1]:
            sub = np.random.default_rng((seed, int(path_index), round_no))
            more = arrivals[-1] + np.cumsum(sub.exponential(1.0 / self.rate, size=32))
            arrivals = np.concatenate([arrivals, more])
            round_no += 1
        return (arrivals[None, :] <= times[:, None]).sum(axis=1).astype(np.float64)

    def increment_mean(self, k: int, grid: TimeGrid, states: np.ndarray) -> np.ndarray:
        return np.full_like(states, self.rate * (grid.times[k + 1] - grid.times[k]))


class _GaussianWalkSquaredDriver:
    """Square of a Gaussian random walk with per-step variance dt."""

    model_id = "mc-gaussian-walk-squared"

    def simulate_chunk(self, rng, grid: TimeGrid, rows: int, seed: int, path_offset: int):
        scale = np.sqrt(grid.steps())
        z = rng.standard_normal(rows * grid.n_steps).reshape(rows, grid.n_steps)
        walk = np.cumsum(z * scale[None, :], axis=1)
        out = np.empty((rows, grid.n_times))
        out[:, 0] = 0.0
        out[:, 1:] = walk * walk
        return out

    def increment_mean(self, k: int, grid: TimeGrid, states: np.ndarray) -> np.ndarray:
        # E((W + z)^2 - W^2 | W) = Var z = dt, independent of the state
        return np.full_like(states, grid.times[k + 1] - grid.times[k])


def resolve_driver(model):
    """Map a ModelSpec (mc-* kinds) or a driver-like object to a driver."""
    if isinstance(model, ModelSpec):
        if model.kind == "mc-poisson":
            return _PoissonDriver(model.parameters["rate"])
        if model.kind == "mc-gaussian-walk-squared":
            return _GaussianWalkSquaredDriver()
        raise ModelError(
            f"kind {model.kind!r} is not a Monte Carlo model; expand its path space instead"
        )
    if hasattr(model, "simulate_chunk"):
        return model
    raise ModelError("model must be a ModelSpec or provide simulate_chunk(...)")


@dataclass(frozen=True, eq=False)
class PathBatch:
    """(paths x times) sample matrix plus everything needed to regenerate it."""

    model: object
    grid: TimeGrid
    paths: np.ndarray
    seed: int
    label: str = "full"

    def __post_init__(self) -> None:
        p = np.ascontiguousarray(self.paths, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != self.grid.n_times:
            raise DimensionError(
                f"paths must be (n_paths, {self.grid.n_times}); got {p.shape}"
            )
        if not np.isfinite(p).all():
            raise ValidationError("path values must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "paths", p)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def model_id(self) -> str:
        driver = resolve_driver(self.model)
        return getattr(driver, "model_id", type(driver).__name__)

    def tofile(self, path) -> None:
        """Flat binary dump: row-major little-endian float64."""
        self.paths.astype("<f8").tofile(path)


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValidationError(f"seed must be a nonnegative integer; got {seed!r}")
    return int(seed)


def simulate(model, grid: TimeGrid, path_count: int, seed: int, label: str = "full") -> PathBatch:
    """Draw a reproducible batch; see the module docstring for the stream
    layout guarantees."""
    driver = resolve_driver(model)
    seed = _check_seed(seed)
    if path_count < 0:
        raise ValidationError("path_count must be nonnegative")
    paths = np.empty((path_count, grid.n_times))
    for chunk, start in enumerate(range(0, path_count, CHUNK_PATHS)):
        rows = min(CHUNK_PATHS, path_count - start)
        rng = np.random.default_rng((seed, chunk))
        got = np.asarray(driver.simulate_chunk(rng, grid, rows, seed, start), dtype=np.float64)
        if got.shape != (rows, grid.n_times):
            raise ModelError(
                f"driver returned shape {got.shape}; expected {(rows, grid.n_times)}"
            )
        paths[start : start + rows] = got
    return PathBatch(model=model, grid=grid, paths=paths, seed=seed, label=label)


def split_batch(batch: PathBatch) -> tuple[PathBatch, PathBatch]:
    """First half for fitting, second half held out."""
    n = batch.n_paths
    if n < 2:
        raise ValidationError("need at least 2 paths to split")
    half = n // 2

    def make(rows: np.ndarray, tag: str) -> PathBatch:
        return PathBatch(
            model=batch.model, grid=batch.grid, paths=rows, seed=batch.seed,
            label=f"{batch.label}/{tag}",
        )

    return make(batch.paths[:half], "fit"), make(batch.paths[half:], "test")


@dataclass(frozen=True)
class CondExpEstimator:
    """How to estimate E(x_{k+1} - x_k | x_k) cross-sectionally."""

    kind: str
    bins: int | None = None
    degree: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "analytic":
            if self.bins is not None or self.degree is not None:
                raise ValidationError("analytic estimator takes no bins/degree")
        elif self.kind == "binning":
            if not isinstance(self.bins, int) or self.bins < 1 or self.degree is not None:
                raise ValidationError("binning estimator needs bins >= 1 and no degree")
        elif self.kind == "regression":
            if not isinstance(self.degree, int) or not 0 <= self.degree <= 6 or self.bins is not None:
                raise ValidationError("regression estimator needs degree in 0..6 and no bins")
        else:
            raise ValidationError(
                f"estimator kind must be analytic, binning or regression; got {self.kind!r}"
            )

    @classmethod
    def analytic(cls) -> "CondExpEstimator":
        return cls("analytic")

    @classmethod
    def binning(cls, bins: int) -> "CondExpEstimator":
        return cls("binning", bins=bins)

    @classmethod
    def regression(cls, degree: int) -> "CondExpEstimator":
        return cls("regression", degree=degree)

    @classmethod
    def parse(cls, text: str) -> "CondExpEstimator":
        """'analytic' | 'binning:<bins>' | 'regression:<degree>'."""
        name, _, arg = text.partition(":")
        try:
            if name == "analytic" and not arg:
                return cls.analytic()
            if name == "binning":
                return cls.binning(int(arg))
            if name == "regression":
                return cls.regression(int(arg))
        except ValueError:
            pass
        raise ValidationError(
            f"cannot parse estimator {text!r}; expected analytic, binning:<bins> or regression:<degree>"
        )

    @property
    def label(self) -> str:
        if self.kind == "binning":
            return f"binning:{self.bins}"
        if self.kind == "regression":
            return f"regression:{self.degree}"
        return "analytic"


class _AnalyticStep:
    """Closed-form increment mean; carries no estimation noise."""

    degenerate = False

    def __init__(self, driver, k: int, grid: TimeGrid) -> None:
        self._driver, self._k, self._grid = driver, k, grid

    def predict(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(self._driver.increment_mean(self._k, self._grid, states), dtype=np.float64)


class _BinnedStep:
    """Quantile-binned conditional mean with per-bin mean variances."""

    def __init__(self, states: np.ndarray, y: np.ndarray, bins: int) -> None:
        n = y.size
        g_mean = float(y.mean())
        g_var = float(y.var(ddof=1)) if n > 1 else 0.0
        if np.ptp(states) == 0.0:
            # all-identical design: fall back to the global mean and flag it
            self.degenerate = True
            self.edges = np.array([states[0], states[0]])
            self.means = np.array([g_mean])
            self.mean_vars = np.array([g_var / n])
            return
        self.degenerate = False
        self.edges = np.unique(np.quantile(states, np.linspace(0.0, 1.0, bins + 1)))
        nb = self.edges.size - 1
        idx = self.bin_index(states)
        counts = np.bincount(idx, minlength=nb)
        occupied = counts > 0
        safe = np.maximum(counts, 1)
        means = np.bincount(idx, weights=y, minlength=nb) / safe
        sq = np.bincount(idx, weights=y * y, minlength=nb)
        var = (sq - counts * means * means) / np.maximum(counts - 1, 1)
        var = np.maximum(var, 0.0)
        # empty or single-point bins inherit the global statistics
        means[~occupied] = g_mean
        var[counts < 2] = g_var
        self.means = means
        self.mean_vars = var / safe

    def bin_index(self, states: np.ndarray) -> np.ndarray:
        nb = max(self.edges.size - 1, 1)
        return np.clip(np.searchsorted(self.edges, states, side="right") - 1, 0, nb - 1)

    def predict(self, states: np.ndarray) -> np.ndarray:
        return self.means[self.bin_index(states)]


class _PolyStep:
    """Least-squares polynomial in the standardized state, with the
    coefficient covariance kept for error propagation."""

    def __init__(self, states: np.ndarray, y: np.ndarray, degree: int) -> None:
        n = y.size
        self.center = float(states.mean())
        spread = float(states.std())
        self.degenerate = spread == 0.0
        self.scale = spread if spread > 0.0 else 1.0
        self.order = 1 if self.degenerate else degree + 1
        phi = self.design(states)
        coefs, *_ = np.linalg.lstsq(phi, y, rcond=None)
        resid = y - phi @ coefs
        dof = max(n - self.order, 1)
        sigma2 = float(resid @ resid) / dof
        self.coefs = coefs
        self.cov = sigma2 * np.linalg.pinv(phi.T @ phi)

    def design(self, states: np.ndarray) -> np.ndarray:
        return np.vander((states - self.center) / self.scale, self.order, increasing=True)

    def predict(self, states: np.ndarray) -> np.ndarray:
        return self.design(states) @ self.coefs


@dataclass(eq=False)
class CompensatorEstimate:
    """Fitted per-step increment means plus the accumulated mean profile."""

    grid: TimeGrid
    estimator: CondExpEstimator
    a_mean: np.ndarray
    a_se: np.ndarray
    degenerate_steps: tuple[int, ...]
    monotone_flagged: bool
    steps: list

    def increment_mean(self, k: int, states: np.ndarray) -> np.ndarray:
        return self.steps[k].predict(np.asarray(states, dtype=np.float64))

    def accumulate(self, batch: PathBatch) -> np.ndarray:
        """Per-path estimated compensator on a batch over the same grid."""
        if batch.grid != self.grid:
            raise DimensionError("batch grid differs from the estimate's grid")
        out = np.zeros_like(batch.paths)
        for k, fit in enumerate(self.steps):
            out[:, k + 1] = out[:, k] + fit.predict(batch.paths[:, k])
        return out


def estimate_compensator(batch: PathBatch, estimator: CondExpEstimator) -> CompensatorEstimate:
    """Fit the per-step conditional increment means on ``batch`` and
    accumulate them into a compensator estimate."""
    paths = batch.paths
    n, n_times = paths.shape
    if n < 2:
        raise ValidationError("need at least 2 paths to estimate")
    steps: list = []
    if estimator.kind == "analytic":
        driver = resolve_driver(batch.model)
        if not hasattr(driver, "increment_mean"):
            raise ModelError(f"model {batch.model_id!r} has no analytic increment mean")
        steps = [_AnalyticStep(driver, k, batch.grid) for k in range(n_times - 1)]
    else:
        inc = np.diff(paths, axis=1)
        for k in range(n_times - 1):
            if estimator.kind == "binning":
                steps.append(_BinnedStep(paths[:, k], inc[:, k], estimator.bins))
            else:
                steps.append(_PolyStep(paths[:, k], inc[:, k], estimator.degree))

    acc = np.zeros_like(paths)
    for k, fit in enumerate(steps):
        acc[:, k + 1] = acc[:, k] + fit.predict(paths[:, k])
    a_mean = acc.mean(axis=0)
    if estimator.kind == "analytic":
        a_se = acc.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        base = paths - paths[:, :1]
        a_se = base.std(axis=0, ddof=1) / np.sqrt(n)
    slack = 3.0 * (a_se[1:] + a_se[:-1]) + 1e-12
    flagged = bool(np.any(np.diff(a_mean) < -slack))
    return CompensatorEstimate(
        grid=batch.grid,
        estimator=estimator,
        a_mean=a_mean,
        a_se=a_se,
        degenerate_steps=tuple(k for k, s in enumerate(steps) if s.degenerate),
        monotone_flagged=flagged,
        steps=steps,
    )


@dataclass(eq=False)
class ResidualTestReport:
    """Per-step t statistics of residual increments regressed on lagged
    states; all coefficients should be insignificant when the estimated
    compensator captures the drift."""

    times: np.ndarray
    t_stats: tuple[np.ndarray, ...]
    max_abs_t: float
    n_stats: int
    lags: int


def _step_tstats(design: np.ndarray, resid: np.ndarray, extra_cov) -> np.ndarray:
    n, p = design.shape
    gram_inv = np.linalg.pinv(design.T @ design)
    projector = gram_inv @ design.T
    beta = projector @ resid
    noise = resid - design @ beta
    sigma2 = float(noise @ noise) / max(n - p, 1)
    cov = sigma2 * gram_inv
    if extra_cov is not None:
        cov = cov + extra_cov(projector)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return np.where(se > 0.0, beta / np.where(se > 0.0, se, 1.0), 0.0)


def residual_martingale_test(
    batch: PathBatch,
    estimator,
    lags: int = 1,
    split: bool = True,
) -> ResidualTestReport:
    """Check that increments minus estimated drift have no explainable mean.

    ``estimator`` is either a :class:`CondExpEstimator` (fitted here; with
    ``split`` the fit uses the first half and the test the held-out second
    half) or an already-fitted :class:`CompensatorEstimate` (tested on the
    whole ``batch``).  Each step regresses the residual increment on an
    intercept plus the last ``lags`` states; t statistics account for the
    estimator's own sampling noise, propagated through the regression.
    """
    if lags < 0:
        raise ValidationError("lags must be nonnegative")
    if isinstance(estimator, CompensatorEstimate):
        estimate, test = estimator, batch
    elif isinstance(estimator, CondExpEstimator):
        if split:
            fit_half, test = split_batch(batch)
            estimate = estimate_compensator(fit_half, estimator)
        else:
            estimate, test = estimate_compensator(batch, estimator), batch
    else:
        raise ValidationError("estimator must be a CondExpEstimator or CompensatorEstimate")
    if test.grid != estimate.grid:
        raise DimensionError("batch grid differs from the estimate's grid")

    paths = test.paths
    n, n_times = paths.shape
    stats: list[np.ndarray] = []
    for k in range(n_times - 1):
        resid = paths[:, k + 1] - paths[:, k] - estimate.increment_mean(k, paths[:, k])
        cols = [np.ones(n)]
        for j in range(min(lags, k + 1)):
            col = paths[:, k - j]
            if np.ptp(col) > 0.0:
                cols.append(col)
        design = np.column_stack(cols)
        extra = _estimator_noise_term(estimate.steps[k], paths[:, k])
        stats.append(_step_tstats(design, resid, extra))
    max_abs = max((float(np.max(np.abs(s))) for s in stats), default=0.0)
    return ResidualTestReport(
        times=test.grid.times[:-1].copy(),
        t_stats=tuple(stats),
        max_abs_t=max_abs,
        n_stats=int(sum(s.size for s in stats)),
        lags=lags,
    )


def _estimator_noise_term(fit, states: np.ndarray):
    """Covariance contribution of the fitted drift's own noise to the
    regression coefficients, as a function of the OLS projector."""
    if isinstance(fit, _BinnedStep):
        idx = fit.bin_index(states).astype(np.int64)
        nb = fit.means.size

        def term(projector: np.ndarray) -> np.ndarray:
            # column sums of the projector per bin; the contribution is
            # sum_b mean_vars[b] * outer(g_b, g_b) = G diag(mean_vars) G^T
            g = _kernels.group_sum(projector.T, idx, nb).T
            return (g * fit.mean_vars[None, :]) @ g.T

        return term
    if isinstance(fit, _PolyStep):
        phi = fit.design(states)

        def term(projector: np.ndarray) -> np.ndarray:
            m = projector @ phi
            return m @ fit.cov @ m.T

        return term
    return None
