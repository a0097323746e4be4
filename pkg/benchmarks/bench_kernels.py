"""Compare the compiled kernel backend against the NumPy fallback.

Times the four grouped-reduction primitives on workloads shaped like real
use (conditional expectations over partition blocks, measurability spreads,
crossing times) plus one end-to-end decomposition + naturality check on a
12-step tree.  The library wrappers look the backend up per call, so both
backends run in one process.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--atoms N ...]
"""

import argparse
import time

import numpy as np

import doobkit
from doobkit import _kernels
from doobkit._kernels import _py

try:
    from doobkit._kernels import _ext
except ImportError:
    _ext = None


def _timeit(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(atoms: int, rng: np.random.Generator):
    blocks = max(atoms // 8, 1)
    labels = np.sort(rng.integers(0, blocks, atoms)).astype(np.int64)
    vec = rng.standard_normal(atoms)
    mat = np.ascontiguousarray(rng.standard_normal((atoms, 64)))
    weights = rng.uniform(0.5, 1.5, atoms)
    walk = np.ascontiguousarray(np.cumsum(np.abs(rng.standard_normal((64, atoms))), axis=0))
    return [
        ("group_sum 1d", lambda impl: impl.group_sum(vec, labels, blocks)),
        ("group_sum 2d", lambda impl: impl.group_sum(mat, labels, blocks)),
        ("group_mean_expand 1d", lambda impl: impl.group_mean_expand(vec, weights, labels, blocks)),
        ("group_mean_expand 2d", lambda impl: impl.group_mean_expand(mat, weights, labels, blocks)),
        ("group_min_max", lambda impl: impl.group_min_max(vec, labels, blocks)),
        ("crossing_indices", lambda impl: impl.crossing_indices(walk, float(np.median(walk)))),
    ]


def end_to_end(repeat: int):
    """doob_decompose + naturality on the 4096-atom tree, per backend."""
    from doobkit import ModelSpec, build_finite_model, doob_decompose, naturality_violation

    f, x = build_finite_model(ModelSpec("binary-tree", {"steps": 12}))

    def run():
        a = doob_decompose(x).a
        naturality_violation(a)

    out = {}
    saved = _kernels._impl
    try:
        for name, impl in backends():
            _kernels._impl = impl
            out[name] = _timeit(run, repeat)
    finally:
        _kernels._impl = saved
    return out


def backends():
    pairs = [("python", _py)]
    if _ext is not None:
        pairs.insert(0, ("compiled", _ext))
    return pairs


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7, help="best-of repetitions")
    parser.add_argument(
        "--atoms", type=int, nargs="*", default=[4096, 65536, 262144],
        help="atom counts for the kernel microbenchmarks",
    )
    args = parser.parse_args()

    print(f"active backend: {doobkit.KERNEL_BACKEND}")
    if _ext is None:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)

    header = f"{'kernel':<24} {'atoms':>8}" + "".join(f" {name:>12}" for name, _ in backends())
    if _ext is not None:
        header += f" {'speedup':>9}"
    print(header)
    for atoms in args.atoms:
        for label, call in kernel_cases(atoms, rng):
            times = [(_timeit(lambda: call(impl), args.repeat)) for _, impl in backends()]
            row = f"{label:<24} {atoms:>8}" + "".join(f" {t * 1e3:>10.3f}ms" for t in times)
            if len(times) == 2:
                row += f" {times[1] / times[0]:>8.2f}x"
            print(row)

    print()
    e2e = end_to_end(args.repeat)
    for name, t in e2e.items():
        print(f"decompose+naturality (12-step tree), {name}: {t * 1e3:.1f}ms")
    if len(e2e) == 2:
        print(f"end-to-end speedup: {e2e['python'] / e2e['compiled']:.2f}x")


if __name__ == "__main__":
    main()
