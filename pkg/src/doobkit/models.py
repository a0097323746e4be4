"""Declarative model specifications and their finite instantiations.

A :class:`ModelSpec` names a stochastic model plus an optional known
compensator form.  Lattice kinds (``binary-tree``, ``recombining-lattice``,
``poisson-lattice``) can be expanded into an exact finite filtered path
space; the ``mc-*`` kinds exist only through simulation (see
:mod:`doobkit.mc`); ``explicit`` carries a full finite model inline.

Path-space expansion is exponential in the number of steps and is reserved
for small grids (:data:`MAX_TREE_STEPS`, :data:`MAX_PATH_ATOMS`); larger
grids go through the closed-form increment-mean profiles or Monte Carlo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ResourceError
from .measure import FiniteSpace, Partition
from .process import AdaptedProcess, Filtration, TimeGrid

__all__ = [
    "KINDS",
    "MAX_PATH_ATOMS",
    "MAX_TREE_STEPS",
    "ModelSpec",
    "build_finite_model",
    "dump_model",
    "dyadic_grid",
    "increment_mean_profile",
    "load_model",
    "model_from_dict",
    "poisson_step_support",
    "target_compensator",
]

KINDS = (
    "binary-tree",
    "recombining-lattice",
    "poisson-lattice",
    "mc-poisson",
    "mc-gaussian-walk-squared",
    "explicit",
)
TREE_PROCESSES = ("walk", "walk-squared", "walk-abs", "drift")
LATTICE_PROCESSES = ("scaled-walk-squared", "drift")
COMPENSATOR_FORMS = ("identity-time", "linear")

MAX_TREE_STEPS = 12
MAX_PATH_ATOMS = 1 << 17

# Per-step Poisson supports are truncated where the tail mass drops below
# this and renormalized; tight enough that truncation never shows up at the
# 1e-10 tolerances used downstream.
POISSON_TAIL_MASS = 1e-15
_MAX_POISSON_SUPPORT = 512

_GRID_PARAMETERIZED = ("recombining-lattice", "poisson-lattice", "mc-poisson", "mc-gaussian-walk-squared")
_MC_KINDS = ("mc-poisson", "mc-gaussian-walk-squared")

_ALLOWED_PARAMETERS = {
    "binary-tree": {"steps", "process", "step_std"},
    "recombining-lattice": {"process", "depth"},
    "poisson-lattice": {"rate", "depth"},
    "mc-poisson": {"rate"},
    "mc-gaussian-walk-squared": set(),
    "explicit": {"probs", "times", "partitions", "values"},
}


def _require_number(parameters: dict, key: str, *, positive: bool = False) -> float:
    try:
        v = float(parameters[key])
    except KeyError:
        raise ModelError(f"missing required parameter {key!r}") from None
    except (TypeError, ValueError):
        raise ModelError(f"parameter {key!r} must be a number") from None
    if not np.isfinite(v) or (positive and v <= 0.0):
        raise ModelError(f"parameter {key!r} must be {'positive and ' if positive else ''}finite")
    return v


def _require_int(parameters: dict, key: str, lo: int, hi: int, default=None) -> int:
    if key not in parameters:
        if default is None:
            raise ModelError(f"missing required parameter {key!r}")
        return default
    v = parameters[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelError(f"parameter {key!r} must be an integer")
    if not lo <= v <= hi:
        raise ModelError(f"parameter {key!r} must lie in {lo}..{hi}; got {v}")
    return v


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A validated model description; see the module docstring for kinds."""

    kind: str
    parameters: dict = field(default_factory=dict)
    known_compensator: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.parameters, dict):
            raise ModelError("parameters must be an object")
        extra = set(self.parameters) - _ALLOWED_PARAMETERS[self.kind]
        if extra:
            raise ModelError(
                f"unknown parameter(s) {sorted(extra)} for kind {self.kind!r}"
            )
        self._validate_parameters()
        self._validate_compensator()

    def _validate_parameters(self) -> None:
        p = self.parameters
        if self.kind == "binary-tree":
            _require_int(p, "steps", 1, MAX_TREE_STEPS)
            process = p.get("process", "walk-squared")
            if process not in TREE_PROCESSES:
                raise ModelError(f"process must be one of {TREE_PROCESSES}; got {process!r}")
            if "step_std" in p:
                _require_number(p, "step_std", positive=True)
        elif self.kind == "recombining-lattice":
            process = p.get("process", "scaled-walk-squared")
            if process not in LATTICE_PROCESSES:
                raise ModelError(f"process must be one of {LATTICE_PROCESSES}; got {process!r}")
            _require_int(p, "depth", 0, 20, default=3)
        elif self.kind == "poisson-lattice":
            _require_number(p, "rate", positive=True)
            _require_int(p, "depth", 0, 20, default=2)
        elif self.kind == "mc-poisson":
            _require_number(p, "rate", positive=True)
        elif self.kind == "explicit":
            for key in ("probs", "times", "partitions", "values"):
                if key not in p:
                    raise ModelError(f"explicit model missing {key!r}")

    def _validate_compensator(self) -> None:
        c = self.known_compensator
        if c is None:
            return
        if not isinstance(c, dict) or "form" not in c:
            raise ModelError('known_compensator must be an object with a "form" key')
        form = c["form"]
        if form not in COMPENSATOR_FORMS:
            raise ModelError(f"known_compensator form must be one of {COMPENSATOR_FORMS}")
        extra = set(c) - {"form", "rate"}
        if extra:
            raise ModelError(f"unknown known_compensator key(s) {sorted(extra)}")
        if form == "linear":
            _require_number(c, "rate")
        elif "rate" in c:
            raise ModelError('identity-time takes no "rate"')

    @property
    def is_mc(self) -> bool:
        return self.kind in _MC_KINDS

    @property
    def is_grid_parameterized(self) -> bool:
        return self.kind in _GRID_PARAMETERIZED

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameters": dict(self.parameters),
            "known_compensator": dict(self.known_compensator)
            if self.known_compensator is not None
            else None,
        }


def model_from_dict(d: dict) -> ModelSpec:
    if not isinstance(d, dict):
        raise ModelError("model file must contain a JSON object")
    extra = set(d) - {"kind", "parameters", "known_compensator"}
    if extra:
        raise ModelError(f"unknown top-level key(s) {sorted(extra)}")
    if "kind" not in d:
        raise ModelError('model file missing "kind"')
    return ModelSpec(
        kind=d["kind"],
        parameters=d.get("parameters") or {},
        known_compensator=d.get("known_compensator"),
    )


def load_model(path) -> ModelSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ModelError(f"cannot read model file: {err}") from None
    except json.JSONDecodeError as err:
        raise ModelError(f"model file is not valid JSON (line {err.lineno}, column {err.colno}): {err.msg}") from None
    return model_from_dict(raw)


def dump_model(spec: ModelSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"


def dyadic_grid(depth: int) -> TimeGrid:
    """The uniform grid with 2**depth steps; times j/2**depth are exact."""
    if not 0 <= depth <= 20:
        raise ModelError(f"depth must lie in 0..20; got {depth}")
    n = 1 << depth
    return TimeGrid(np.arange(n + 1) / n)


def default_grid(spec: ModelSpec) -> TimeGrid:
    """The grid a finite model is built on when none is supplied."""
    if spec.kind == "binary-tree":
        return TimeGrid.uniform(spec.parameters["steps"])
    if spec.kind in ("recombining-lattice", "poisson-lattice"):
        return dyadic_grid(spec.parameters.get("depth", 3 if spec.kind == "recombining-lattice" else 2))
    if spec.kind == "explicit":
        return TimeGrid(np.asarray(spec.parameters["times"], dtype=np.float64))
    raise ModelError(f"kind {spec.kind!r} has no default grid; supply one explicitly")


def poisson_step_support(rate: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Support 0..J and renormalized probabilities of a truncated Poisson
    step count with mean rate*dt."""
    mean = rate * dt
    probs = [float(np.exp(-mean))]
    while 1.0 - sum(probs) > POISSON_TAIL_MASS:
        j = len(probs)
        probs.append(probs[-1] * mean / j)
        if j > _MAX_POISSON_SUPPORT:
            raise ModelError(f"poisson step mean {mean:g} needs too large a support")
    p = np.array(probs)
    return np.arange(p.size, dtype=np.float64), p / p.sum()


def _binary_tree_paths(grid: TimeGrid, step_stds: np.ndarray) -> tuple[Filtration, np.ndarray]:
    """Uniform path space over all 2**n_steps sign sequences; returns the
    filtration of prefix partitions and the walk matrix S (n_times, atoms)."""
    steps = grid.n_steps
    if steps > MAX_TREE_STEPS:
        raise ResourceError(
            f"path enumeration is reserved for grids of at most {MAX_TREE_STEPS} steps; got {steps}"
        )
    n = 1 << steps
    atoms = np.arange(n, dtype=np.int64)
    space = FiniteSpace.uniform(n)
    partitions = tuple(Partition(atoms >> (steps - k)) for k in range(steps + 1))
    walk = np.zeros((steps + 1, n))
    for k in range(steps):
        signs = 1.0 - 2.0 * ((atoms >> (steps - 1 - k)) & 1)
        walk[k + 1] = walk[k] + step_stds[k] * signs
    return Filtration(space, grid, partitions), walk


def _poisson_paths(rate: float, grid: TimeGrid) -> tuple[Filtration, np.ndarray]:
    supports = [poisson_step_support(rate, dt) for dt in grid.steps()]
    radices = np.array([p.size for _, p in supports], dtype=np.int64)
    total = int(np.prod(radices.astype(object)))
    if total > MAX_PATH_ATOMS:
        raise ResourceError(
            f"poisson path space needs {total} atoms (budget {MAX_PATH_ATOMS}); "
            "use a coarser grid or the mc-poisson kind"
        )
    atoms = np.arange(total, dtype=np.int64)
    # digit of step k is the k-th most significant, so time-k prefixes are
    # contiguous atom ranges
    strides = np.concatenate([np.cumprod(radices[::-1])[::-1][1:], [1]]).astype(np.int64)
    digits = (atoms[None, :] // strides[:, None]) % radices[:, None]
    probs = np.ones(total)
    counts = np.zeros((grid.n_times, total))
    for k, (values, p) in enumerate(supports):
        probs *= p[digits[k]]
        counts[k + 1] = counts[k] + values[digits[k]]
    partitions = tuple(
        Partition(atoms // int(np.prod(radices[k:], dtype=np.int64)))
        for k in range(grid.n_times)
    )
    space = FiniteSpace(probs / probs.sum())
    return Filtration(space, grid, partitions), counts


def _explicit_model(parameters: dict) -> tuple[Filtration, AdaptedProcess]:
    space = FiniteSpace(np.asarray(parameters["probs"], dtype=np.float64))
    grid = TimeGrid(np.asarray(parameters["times"], dtype=np.float64))
    rows = parameters["partitions"]
    if len(rows) != grid.n_times:
        raise ModelError(
            f"need one partition per time ({grid.n_times}); got {len(rows)}"
        )
    partitions = tuple(Partition(np.asarray(r, dtype=np.int64)) for r in rows)
    filtration = Filtration(space, grid, partitions)
    values = np.asarray(parameters["values"], dtype=np.float64)
    return filtration, AdaptedProcess(filtration, values)


def build_finite_model(
    spec: ModelSpec, grid: TimeGrid | None = None
) -> tuple[Filtration, AdaptedProcess]:
    """Expand a lattice or explicit model into (filtration, process).

    Monte Carlo kinds have no finite path space and raise
    :class:`ModelError`; simulate them instead.
    """
    if spec.is_mc:
        raise ModelError(f"kind {spec.kind!r} has no finite path space; simulate it instead")
    if spec.kind == "explicit":
        if grid is not None:
            raise ModelError("explicit models carry their own time grid")
        return _explicit_model(spec.parameters)
    if grid is None:
        grid = default_grid(spec)

    if spec.kind == "binary-tree":
        steps = spec.parameters["steps"]
        if grid.n_steps != steps:
            raise ModelError(f"binary-tree with steps={steps} needs a {steps}-step grid")
        std = float(spec.parameters.get("step_std", 1.0))
        filtration, walk = _binary_tree_paths(grid, np.full(steps, std))
        process = spec.parameters.get("process", "walk-squared")
        if process == "walk":
            values = walk
        elif process == "walk-squared":
            values = walk * walk
        elif process == "walk-abs":
            values = np.abs(walk)
        else:
            values = np.repeat(grid.times[:, None], walk.shape[1], axis=1)
        return filtration, AdaptedProcess(filtration, values)

    if spec.kind == "recombining-lattice":
        process = spec.parameters.get("process", "scaled-walk-squared")
        if process == "drift":
            space = FiniteSpace(np.ones(1))
            partitions = tuple(Partition.trivial(1) for _ in range(grid.n_times))
            filtration = Filtration(space, grid, partitions)
            return filtration, AdaptedProcess(filtration, grid.times[:, None].copy())
        filtration, walk = _binary_tree_paths(grid, np.sqrt(grid.steps()))
        return filtration, AdaptedProcess(filtration, walk * walk)

    filtration, counts = _poisson_paths(spec.parameters["rate"], grid)
    return filtration, AdaptedProcess(filtration, counts)


def increment_mean_profile(spec: ModelSpec, grid: TimeGrid) -> np.ndarray:
    """Exact per-step conditional increment means E(x_{k+1} - x_k | F_k) for
    kinds whose drift does not depend on the state; the compensator profile
    is their cumulative sum."""
    steps = grid.steps()
    if spec.kind == "recombining-lattice":
        # both lattice processes drift by dt per step: the scaled walk has
        # E((S + s)^2 - S^2 | S) = s^2 = dt, the drift is dt deterministically
        return steps.copy()
    if spec.kind == "poisson-lattice":
        return np.array(
            [p @ v for v, p in (poisson_step_support(spec.parameters["rate"], dt) for dt in steps)]
        )
    if spec.kind == "binary-tree":
        process = spec.parameters.get("process", "walk-squared")
        std = float(spec.parameters.get("step_std", 1.0))
        if process == "walk-squared":
            return np.full(grid.n_steps, std * std)
        if process == "walk":
            return np.zeros(grid.n_steps)
        if process == "drift":
            return steps.copy()
        raise ModelError("walk-abs drift is state-dependent; expand the path space instead")
    raise ModelError(f"kind {spec.kind!r} has no closed-form increment means")


def target_compensator(spec: ModelSpec, times: np.ndarray) -> np.ndarray | None:
    """The declared compensator profile evaluated on grid times, if any."""
    c = spec.known_compensator
    if c is None:
        return None
    if c["form"] == "identity-time":
        return np.asarray(times, dtype=np.float64).copy()
    return float(c["rate"]) * np.asarray(times, dtype=np.float64)
