"""Exact Doob decompositions and compensator diagnostics on finite
filtered probability spaces, with grid-refinement and Monte Carlo layers.

The kernel backend in use (compiled extension or NumPy fallback) is
reported by :data:`KERNEL_BACKEND`.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .classd import TailBound, TailReport, epsilon_profile, markov_bound, tail_bound
from .doob import (
    Decomposition,
    DoleansDadeReport,
    basis_element,
    check_uniqueness,
    doleans_dade_audit,
    doob_decompose,
    is_natural,
    is_predictable,
    martingale_part,
    natural_pairing,
    naturality_violation,
    predictability_violation,
)
from .errors import (
    ConsistencyError,
    DimensionError,
    DomainError,
    DoobkitError,
    MalformedDecompositionError,
    MeasurabilityError,
    ModelError,
    MonotonicityError,
    NotMartingaleError,
    NotSubmartingaleError,
    ResourceError,
    ValidationError,
)
from .mc import (
    CompensatorEstimate,
    CondExpEstimator,
    PathBatch,
    ResidualTestReport,
    estimate_compensator,
    residual_martingale_test,
    simulate,
    split_batch,
)
from .measure import FiniteSpace, Partition, as_values, cond_exp, expect, refines
from .models import (
    ModelSpec,
    build_finite_model,
    dump_model,
    dyadic_grid,
    increment_mean_profile,
    load_model,
    model_from_dict,
    target_compensator,
)
from .process import (
    AdaptedProcess,
    Filtration,
    StoppingTime,
    TimeGrid,
    crossing_time,
    is_martingale,
    is_submartingale,
    martingale_violation,
    measurability_violation,
    submartingale_violation,
    value_at,
)
from .refine import (
    RefinementStudy,
    common_time_indices,
    compensator_convergence,
    dyadic_grids,
    report_convergence,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    # measure
    "FiniteSpace", "Partition", "as_values", "cond_exp", "expect", "refines",
    # process
    "AdaptedProcess", "Filtration", "StoppingTime", "TimeGrid",
    "crossing_time", "is_martingale", "is_submartingale",
    "martingale_violation", "measurability_violation",
    "submartingale_violation", "value_at",
    # doob
    "Decomposition", "DoleansDadeReport", "basis_element", "check_uniqueness",
    "doleans_dade_audit", "doob_decompose", "is_natural", "is_predictable",
    "martingale_part", "natural_pairing", "naturality_violation",
    "predictability_violation",
    # classd
    "TailBound", "TailReport", "epsilon_profile", "markov_bound", "tail_bound",
    # models
    "ModelSpec", "build_finite_model", "dump_model", "dyadic_grid",
    "increment_mean_profile", "load_model", "model_from_dict",
    "target_compensator",
    # refine
    "RefinementStudy", "common_time_indices", "compensator_convergence",
    "dyadic_grids", "report_convergence",
    # mc
    "CompensatorEstimate", "CondExpEstimator", "PathBatch",
    "ResidualTestReport", "estimate_compensator", "residual_martingale_test",
    "simulate", "split_batch",
    # errors
    "ConsistencyError", "DimensionError", "DomainError", "DoobkitError",
    "MalformedDecompositionError", "MeasurabilityError", "ModelError",
    "MonotonicityError", "NotMartingaleError", "NotSubmartingaleError",
    "ResourceError", "ValidationError",
]
