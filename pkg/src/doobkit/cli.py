"""Command-line experiment runner.

Subcommands: ``decompose`` (compensator + martingale part of a finite
model), ``verify`` (decomposition invariants, predictability, naturality,
uniqueness, and the tail-bound report), ``converge`` (grid-refinement
study), ``audit`` (randomized predictable-iff-natural contingency table),
``dump-model`` (canonical model JSON).

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 input or
validation error.  Commands that consume randomness require ``--seed``;
nothing is seeded from the clock, and outputs are byte-identical across
re-runs of the same configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .classd import epsilon_profile
from .doob import (
    Decomposition,
    check_uniqueness,
    doleans_dade_audit,
    doob_decompose,
    is_natural,
    is_predictable,
    martingale_part,
    naturality_violation,
    predictability_violation,
)
from .errors import DoobkitError, ValidationError
from .mc import CondExpEstimator
from .models import build_finite_model, dump_model, load_model
from .process import AdaptedProcess
from .refine import compensator_convergence, dyadic_grids, report_convergence

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2

# The audit is quadratic-ish in atoms across many trials; keep it small.
AUDIT_MAX_ATOMS = 64

__all__ = ["main"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_seed(args) -> int:
    if args.seed is None:
        raise ValidationError("this command consumes randomness; pass --seed explicitly")
    if args.seed < 0:
        raise ValidationError("--seed must be nonnegative")
    return args.seed


def _parse_depths(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise ValidationError(f"cannot parse --depths {text!r}; expected A..B or a single depth") from None
    return a, b


def _parse_levels(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse --levels {text!r}; expected comma-separated numbers") from None


def _process_rows(x: AdaptedProcess):
    times = x.filtration.grid.times
    for k in range(x.n_times):
        for atom in range(x.values.shape[1]):
            yield times[k], atom, x.values[k, atom]


def _cmd_decompose(args) -> int:
    model = load_model(args.model)
    out = _out_dir(args)
    filtration, x = build_finite_model(model)
    decomp = doob_decompose(x, args.tol)
    _write_csv(out / "a.csv", ("time", "atom", "value"), _process_rows(decomp.a))
    _write_csv(out / "m.csv", ("time", "atom", "value"), _process_rows(decomp.m))
    violations = decomp.violations()
    summary = {
        "command": "decompose",
        "model": model.to_dict(),
        "atoms": filtration.space.atom_count,
        "grid_size": filtration.n_times,
        "tol": args.tol,
        "max_violations": violations,
        "terminal_compensator_mean": float(
            filtration.space.probs @ decomp.a.values[-1]
        ),
        "pass": bool(max(violations.values()) <= args.tol),
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED


def _cmd_verify(args) -> int:
    model = load_model(args.model)
    levels = _parse_levels(args.levels)
    out = _out_dir(args)
    filtration, x = build_finite_model(model)
    decomp = doob_decompose(x, args.tol)
    a, tol = decomp.a, args.tol

    second_m = martingale_part(x, a.values[-1])
    second = Decomposition(AdaptedProcess(filtration, x.values - second_m.values), second_m)
    agree = check_uniqueness(x, decomp, second, tol)

    report = epsilon_profile(x, a, levels, tol)
    _write_csv(
        out / "tail_report.csv",
        ("k", "chain1", "chain2", "chain3", "chain4", "chain5", "markov_lhs", "markov_rhs"),
        (
            (report.levels[i], *report.chain[i], report.markov_lhs[i], report.markov_rhs[i])
            for i in range(report.levels.size)
        ),
    )
    tail_violations = report.violations()
    verdicts = {
        "decomposition_invariants": bool(max(decomp.violations().values()) <= tol),
        "predictable": is_predictable(a, tol),
        "natural": is_natural(a, tol),
        "uniqueness": bool(agree),
        "tail_chain": bool(max(tail_violations.values()) <= tol),
    }
    summary = {
        "command": "verify",
        "model": model.to_dict(),
        "tol": tol,
        "levels": levels,
        "verdicts": verdicts,
        "max_violations": {
            **decomp.violations(),
            "naturality": naturality_violation(a, tol),
            "predictability": predictability_violation(a),
            **{f"tail_{k}": v for k, v in tail_violations.items()},
        },
        "pass": all(verdicts.values()),
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED


def _cmd_converge(args) -> int:
    model = load_model(args.model)
    lo, hi = _parse_depths(args.depths)
    grids = dyadic_grids(lo, hi)
    estimator = CondExpEstimator.parse(args.estimator)
    seed = _require_seed(args) if model.is_mc else args.seed
    study = compensator_convergence(
        model, grids, path_count=args.paths if model.is_mc else None,
        seed=seed, estimator=estimator,
    )
    report = report_convergence(study)
    out = _out_dir(args)
    _write_csv(
        out / "refinement.csv",
        ("depth", "grid_size", "terminal_mean", "delta_prev", "target_dev"),
        (
            (r["depth"], r["grid_size"], r["terminal_mean"], r["delta_prev"], r["target_dev"])
            for r in report.rows
        ),
    )
    summary = {
        "command": "converge",
        "model": model.to_dict(),
        "depths": [lo, hi],
        "estimator": estimator.label if model.is_mc else None,
        "paths": args.paths if model.is_mc else None,
        "seed": seed,
        "rows": list(report.rows),
        "verdict": report.verdict,
        "pass": report.verdict != "inconclusive",
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED


def _cmd_audit(args) -> int:
    model = load_model(args.model)
    seed = _require_seed(args)
    out = _out_dir(args)
    filtration, _ = build_finite_model(model)
    if filtration.space.atom_count > AUDIT_MAX_ATOMS:
        raise ValidationError(
            f"audit is limited to {AUDIT_MAX_ATOMS} atoms; this model has "
            f"{filtration.space.atom_count} (resource budget exceeded)"
        )
    report = doleans_dade_audit(filtration, args.trials, seed, args.tol)
    _write_csv(
        out / "audit.csv",
        ("predictable", "natural", "count"),
        (
            (True, True, report.predictable_natural),
            (True, False, report.predictable_not_natural),
            (False, True, report.not_predictable_natural),
            (False, False, report.not_predictable_not_natural),
        ),
    )
    summary = {
        "command": "audit",
        "model": model.to_dict(),
        "trials": report.trials,
        "seed": seed,
        "tol": args.tol,
        "counts": {
            "predictable_natural": report.predictable_natural,
            "predictable_not_natural": report.predictable_not_natural,
            "not_predictable_natural": report.not_predictable_natural,
            "not_predictable_not_natural": report.not_predictable_not_natural,
        },
        "off_diagonal": report.off_diagonal,
        "pass": report.off_diagonal == 0,
    }
    _write_json(out / "summary.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_CHECK_FAILED


def _cmd_dump_model(args) -> int:
    model = load_model(args.model)
    text = dump_model(model)
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doobkit",
        description="Exact Doob decompositions and compensator diagnostics on finite models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--model", required=True, help="model specification JSON file")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (required when randomness is used)")
        p.add_argument("--tol", type=float, default=1e-10, help="verification tolerance")

    p = sub.add_parser("decompose", help="write compensator and martingale part as CSV")
    common(p)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("verify", help="check invariants, naturality, uniqueness and tail bounds")
    common(p)
    p.add_argument("--levels", default="1,2,4,8", help="comma-separated tail levels")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("converge", help="compensator profiles across nested dyadic grids")
    common(p)
    p.add_argument("--depths", required=True, help="dyadic depth range A..B")
    p.add_argument("--paths", type=int, default=10000, help="Monte Carlo paths per grid")
    p.add_argument(
        "--estimator", default="analytic",
        help="analytic | binning:<bins> | regression:<degree>",
    )
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("audit", help="randomized predictable-iff-natural contingency table")
    common(p)
    p.add_argument("--trials", type=int, default=1000, help="number of randomized trials")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("dump-model", help="echo the canonical form of a model file")
    common(p, needs_out=False)
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.set_defaults(func=_cmd_dump_model)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_err:
        return EXIT_INPUT_ERROR if exit_err.code else EXIT_OK
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except DoobkitError as err:
        print(f"check failed: {err}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
