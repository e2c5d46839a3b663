"""Time-marching kernels for the theta-scheme.

Each step solves ``A u_new = B u_old + drive_k e_0`` where ``A`` is
tridiagonal (an extra last-row entry is eliminated by the caller, leaving
the scalar ``q`` to apply to the right-hand side) and ``B`` is tridiagonal
plus one entry ``b_ex`` at ``(m-1, m-3)``.

Two interchangeable backends:

* ``numba``: the whole march runs inside one ``@njit`` function.
* ``numpy``: a Python loop over steps with LAPACK ``gttrf/gttrs`` solves.

The numba path is used when numba imports and ``WENTZELL_DISABLE_NUMBA`` is
unset (or ``0``).
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import lapack

_FLAG = os.environ.get("WENTZELL_DISABLE_NUMBA", "0").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no", "off")

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled by WENTZELL_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _march_python(a_lo, a_di, a_up, q, b_lo, b_di, b_up, b_ex, drive, u0, full):
    m = u0.shape[0]
    n_steps = drive.shape[0]
    out = np.empty((n_steps + 1 if full else 1, m))
    edge = np.empty((n_steps + 1, 2))

    # Thomas factorisation, done once
    cp = np.empty(m)
    inv = np.empty(m)
    inv[0] = 1.0 / a_di[0]
    cp[0] = a_up[0] * inv[0]
    for i in range(1, m):
        inv[i] = 1.0 / (a_di[i] - a_lo[i] * cp[i - 1])
        cp[i] = a_up[i] * inv[i]

    u = u0.copy()
    rhs = np.empty(m)
    if full:
        out[0, :] = u
    edge[0, 0] = u[0]
    edge[0, 1] = u[1]
    for k in range(n_steps):
        rhs[0] = b_di[0] * u[0] + b_up[0] * u[1] + drive[k]
        for i in range(1, m - 1):
            rhs[i] = b_lo[i] * u[i - 1] + b_di[i] * u[i] + b_up[i] * u[i + 1]
        rhs[m - 1] = b_ex * u[m - 3] + b_lo[m - 1] * u[m - 2] + b_di[m - 1] * u[m - 1]
        rhs[m - 1] -= q * rhs[m - 2]

        u[0] = rhs[0] * inv[0]
        for i in range(1, m):
            u[i] = (rhs[i] - a_lo[i] * u[i - 1]) * inv[i]
        for i in range(m - 2, -1, -1):
            u[i] -= cp[i] * u[i + 1]

        if full:
            out[k + 1, :] = u
        edge[k + 1, 0] = u[0]
        edge[k + 1, 1] = u[1]
    if not full:
        out[0, :] = u
    return out, edge


if HAVE_NUMBA:
    _march_numba = njit(cache=True, nogil=True)(_march_python)
else:  # pragma: no cover - exercised only without numba
    _march_numba = None


def march_numba(a_lo, a_di, a_up, q, b_lo, b_di, b_up, b_ex, drive, u0, full=True):
    if _march_numba is None:
        raise RuntimeError("numba backend unavailable")
    return _march_numba(a_lo, a_di, a_up, float(q), b_lo, b_di, b_up, float(b_ex),
                        np.ascontiguousarray(drive, dtype=np.float64),
                        np.ascontiguousarray(u0, dtype=np.float64), bool(full))


def march_numpy(a_lo, a_di, a_up, q, b_lo, b_di, b_up, b_ex, drive, u0, full=True):
    m = u0.shape[0]
    n_steps = drive.shape[0]
    dl, d, du, du2, ipiv, info = lapack.dgttrf(a_lo[1:], a_di, a_up[:-1])
    if info != 0:
        raise np.linalg.LinAlgError(f"gttrf failed with info={info}")
    out = np.empty((n_steps + 1 if full else 1, m))
    edge = np.empty((n_steps + 1, 2))
    u = np.array(u0, dtype=float)
    if full:
        out[0] = u
    edge[0] = u[:2]
    lo, di, up = b_lo[1:], b_di, b_up[:-1]
    rhs = np.empty(m)
    for k in range(n_steps):
        rhs[:] = di * u
        rhs[1:] += lo * u[:-1]
        rhs[:-1] += up * u[1:]
        rhs[-1] += b_ex * u[-3]
        rhs[0] += drive[k]
        rhs[-1] -= q * rhs[-2]
        u, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if full:
            out[k + 1] = u
        edge[k + 1] = u[:2]
    if not full:
        out[0] = u
    return out, edge


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def march(*args, **kwargs):
    """Dispatch to the active backend."""
    if HAVE_NUMBA:
        return march_numba(*args, **kwargs)
    return march_numpy(*args, **kwargs)
