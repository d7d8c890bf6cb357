"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs every hot kernel on representative workloads and prints a timing
table.  Import-time selection is bypassed: both implementations are pulled
from the kernels module explicitly, so the active REEB_ATLAS_NUMBA setting
does not matter here (numba must be importable to time its path).
"""

import time

import numpy as np

from reeb_atlas import kernels as K


def timeit(fn, *args, repeat=5, number=1):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def loops(n, seed, sep=2.5):
    rng = np.random.default_rng(seed)
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    a = np.stack([np.cos(th), np.sin(th), 0.3 * np.sin(2 * th)], axis=1)
    b = np.stack([np.cos(th) + sep, 0.4 * np.sin(3 * th), np.sin(th)], axis=1)
    a += 0.01 * rng.normal(size=a.shape)
    b += 0.01 * rng.normal(size=b.shape)
    return np.ascontiguousarray(a), np.ascontiguousarray(b)


def traces4(n, seed):
    rng = np.random.default_rng(seed)
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    a = np.stack([np.cos(th), np.sin(th), 0 * th, 0 * th], axis=1)
    b = np.stack([0 * th, 0.1 + 0 * th, np.cos(th), np.sin(th)], axis=1)
    a += 0.01 * rng.normal(size=a.shape)
    b += 0.01 * rng.normal(size=b.shape)
    return np.ascontiguousarray(a), np.ascontiguousarray(b)


def main():
    if not K.NUMBA_ENABLED:
        print("numba path inactive (REEB_ATLAS_NUMBA=0 or numba missing); "
              "timing the numpy fallback only\n")

    rng = np.random.default_rng(0)
    exps = np.array([[0, 0, 0, 0], [0, 0, 2, 0], [0, 0, 0, 2],
                     [0, 0, 4, 0], [0, 0, 0, 4], [0, 0, 2, 2],
                     [3, 0, 1, 0], [2, 2, 0, 0]], dtype=np.int64)
    coeffs = rng.uniform(0.01, 0.3, size=len(exps))
    coeffs[0] = 1.0
    x = np.array([0.7, -0.2, 0.5, 0.4])
    y20 = np.concatenate([x, np.eye(4).ravel()])
    d = np.array([2.0, 2.0 / np.sqrt(2.0)])

    a3, b3 = loops(512, seed=1)
    a4, b4 = traces4(512, seed=2)

    cases = [
        ("weighted var RHS (20-dim)",
         lambda: K._weighted_var_rhs_numba(y20, exps, coeffs),
         lambda: K._weighted_var_rhs_numpy(y20, exps, coeffs), 2000),
        ("ellipsoid var RHS (20-dim)",
         lambda: K._ellipsoid_var_rhs_numba(y20, d),
         lambda: K._ellipsoid_var_rhs_numpy(y20, d), 2000),
        ("polynomial value/grad/hess",
         lambda: K._poly_parts_numba(exps, coeffs, x),
         lambda: K._poly_parts_numpy(exps, coeffs, x), 2000),
        ("Gauss linking sum, 512x512 segments",
         lambda: K._gauss_linking_numba(a3, b3),
         lambda: K._gauss_linking_numpy(a3, b3), 3),
        ("polyline Hausdorff, 512x512",
         lambda: K._hausdorff_numba(a4, b4),
         lambda: K._hausdorff_numpy(a4, b4), 3),
        ("min cross distance, 512x512",
         lambda: K._min_cross_distance_numba(a4, b4),
         lambda: K._min_cross_distance_numpy(a4, b4), 3),
    ]

    print(f"{'kernel':42s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    print("-" * 79)
    for name, fn_nb, fn_np, number in cases:
        if K.NUMBA_ENABLED:
            fn_nb()  # compile outside the timer
            t_nb = timeit(fn_nb, number=number)
        else:
            t_nb = np.nan
        t_np = timeit(fn_np, number=number)
        ratio = t_np / t_nb if np.isfinite(t_nb) and t_nb > 0 else np.nan
        nb_txt = f"{t_nb * 1e6:10.1f}us" if np.isfinite(t_nb) else "      n/a"
        print(f"{name:42s} {nb_txt:>12s} {t_np * 1e6:10.1f}us {ratio:8.1f}x")

    # consistency spot checks between the two paths
    assert abs(K._gauss_linking_numba(a3, b3) - K._gauss_linking_numpy(a3, b3)) < 1e-9 \
        if K.NUMBA_ENABLED else True
    if K.NUMBA_ENABLED:
        va = K._weighted_var_rhs_numba(y20, exps, coeffs)
        vb = K._weighted_var_rhs_numpy(y20, exps, coeffs)
        assert np.abs(va - vb).max() < 1e-12
        print("\nconsistency: numba and numpy paths agree")


if __name__ == "__main__":
    main()
