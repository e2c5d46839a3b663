"""Time the theta-scheme march on the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends run the same assembled system; the script also reports the
largest difference between their outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from wentzell import _kernels
from wentzell.pde import MethodOfLines
from wentzell.spectral import WentzellParams


def _time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba backend disabled or missing; nothing to compare")

    params = WentzellParams(1.0, 1.0, 3.0)
    rng = np.random.default_rng(0)
    print(f"{'n_x':>6} {'n_t':>6} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8} {'max diff':>10}")
    for n_x in (25, 100, 200, 400, 800):
        n_t = 10 * n_x
        mol = MethodOfLines(params, n_x, 1.0, n_t)
        drive = mol._drive(rng.normal(size=n_t + 1))
        u0 = rng.normal(size=n_x)
        call = (*mol._A, *mol._B, drive, u0)
        _kernels.march_numba(*call, False)  # compile outside the timing
        t_nb = _time(lambda: _kernels.march_numba(*call, False), args.repeat)
        t_np = _time(lambda: _kernels.march_numpy(*call, False), args.repeat)
        diff = np.max(np.abs(_kernels.march_numba(*call, True)[0] - _kernels.march_numpy(*call, True)[0]))
        print(f"{n_x:>6} {n_t:>6} {1e3 * t_nb:>11.3f} {1e3 * t_np:>11.3f} {t_np / t_nb:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
