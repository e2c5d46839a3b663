"""Method of lines for the controlled heat equation with a dynamic boundary.

Unknowns are the nodal values ``u_1 .. u_N`` (``u_0`` is the Dirichlet
control).  The semi-discrete system is written in weighted form

    E u' = -K u + (f / dx) e_1,

with interior rows ``E = dx`` and ``K = [-1, 2, -1] / dx``.  The last row
depends on the boundary closure:

``symmetric`` (default)
    ``(dx/2 + a/d) u_N' = (b/d) u_N - (u_N - u_{N-1}) / dx``.  This is the
    dynamic condition ``(a/d) u_t = (b/d) u - u_x`` with the half-cell term
    supplying the second-order correction to the one-sided ``u_x``.  ``E``
    is then the trapezoid-plus-boundary weight of the H inner product and
    ``K`` is symmetric, so the discrete adjoint is the same scheme run
    backwards and the discrete duality identity holds to roundoff.
``three_point``
    ``(a/d) u_N' = (b/d) u_N - (3u_N - 4u_{N-1} + u_{N-2}) / (2 dx)``.
``paper``
    Static condition ``a u_xx + d u_x - b u = 0`` at x=1 with first-order
    backward differences for both derivatives (an algebraic row).

Time stepping is the theta-scheme, Crank-Nicolson by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from . import _kernels
from .errors import ShapeMismatch, SingularSystem
from .spectral import WentzellParams
from .state import Control, Grid, State, time_grid, trapezoid_time_weights

CLOSURES = ("symmetric", "three_point", "paper")
TRACES = ("consistent", "one_sided")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States at uniformly spaced times; ``flux0`` holds u_x(0, t) for adjoint runs."""

    times: np.ndarray
    grid: Grid
    states: np.ndarray
    flux0: np.ndarray | None = None

    def __post_init__(self):
        if self.states.shape != (self.times.size, self.grid.n_x + 1):
            raise ShapeMismatch("trajectory states do not match times/grid")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase")

    def state(self, k: int) -> State:
        return State(self.grid, self.states[k])

    @property
    def initial(self) -> State:
        return self.state(0)

    @property
    def terminal(self) -> State:
        return self.state(-1)


class MethodOfLines:
    """Assembled operators for one (params, grid, horizon, n_t, theta, closure)."""

    def __init__(self, params: WentzellParams, n_x: int, T: float, n_t: int,
                 theta: float = 0.5, closure: str = "symmetric"):
        if closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")
        if not 0.0 < theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        self.params = params
        self.grid = Grid(n_x)
        self.T = float(T)
        self.n_t = int(n_t)
        self.times = time_grid(self.T, self.n_t)
        self.dt = self.T / self.n_t
        self.theta = float(theta)
        self.closure = closure
        self._build_operator()
        self._build_steps()
        self._elliptic_cache: dict[float, tuple] = {}

    # -- assembly ---------------------------------------------------------
    def _build_operator(self):
        m, dx = self.grid.n_x, self.grid.dx
        w, r = self.params.weight, self.params.ratio
        E = np.full(m, dx)
        lo = np.full(m, -1.0 / dx)
        di = np.full(m, 2.0 / dx)
        up = np.full(m, -1.0 / dx)
        lo[0] = 0.0
        up[-1] = 0.0
        ex = 0.0
        if self.closure == "symmetric":
            E[-1] = 0.5 * dx + w
            lo[-1] = -1.0 / dx
            di[-1] = 1.0 / dx - r
        elif self.closure == "three_point":
            E[-1] = w
            ex = 0.5 / dx
            lo[-1] = -2.0 / dx
            di[-1] = 1.5 / dx - r
        else:
            E[-1] = 0.0
            ex = -w / dx**2
            lo[-1] = 2.0 * w / dx**2 + 1.0 / dx
            di[-1] = -w / dx**2 - 1.0 / dx + r
        self.E, self.K_lo, self.K_di, self.K_up, self.K_ex = E, lo, di, up, ex
        self.coupling = 1.0 / dx

    def _build_steps(self):
        th, dt = self.theta, self.dt
        E = self.E
        a_lo, a_di, a_up = th * dt * self.K_lo, E + th * dt * self.K_di, th * dt * self.K_up
        a_ex = th * dt * self.K_ex
        s = (1.0 - th) * dt
        b_lo, b_di, b_up = -s * self.K_lo, E - s * self.K_di, -s * self.K_up
        b_ex = -s * self.K_ex
        if E[-1] == 0.0:
            # algebraic row: impose the constraint at the new level only
            a_lo[-1], a_di[-1], a_ex = dt * self.K_lo[-1], dt * self.K_di[-1], dt * self.K_ex
            b_lo[-1] = b_di[-1] = 0.0
            b_ex = 0.0
        q = a_ex / a_lo[-2] if a_ex != 0.0 else 0.0
        a_lo[-1] -= q * a_di[-2]
        a_di[-1] -= q * a_up[-2]
        self._A = (a_lo, a_di, a_up, q)
        self._B = (b_lo, b_di, b_up, b_ex)

    def matrix(self, alpha: float = 0.0) -> np.ndarray:
        """Dense ``alpha E + K`` on the unknowns."""
        m = self.grid.n_x
        M = np.diag(alpha * self.E + self.K_di)
        M += np.diag(self.K_lo[1:], -1) + np.diag(self.K_up[:-1], 1)
        M[m - 1, m - 3] += self.K_ex
        return M

    def apply_K(self, u: np.ndarray) -> np.ndarray:
        """``K u`` for an unknown vector (nodes 1..N)."""
        out = self.K_di * u
        out[1:] += self.K_lo[1:] * u[:-1]
        out[:-1] += self.K_up[:-1] * u[1:]
        out[-1] += self.K_ex * u[-3]
        return out

    # -- marching ---------------------------------------------------------
    def _drive(self, f: np.ndarray) -> np.ndarray:
        th = self.theta
        return self.dt * self.coupling * (th * f[1:] + (1.0 - th) * f[:-1])

    def forward(self, u0: np.ndarray, f: np.ndarray, full: bool = True) -> np.ndarray:
        """Full-node forward solution; returns (n_t+1, N+1) or the terminal row."""
        if u0.shape != (self.grid.n_x + 1,) or f.shape != (self.n_t + 1,):
            raise ShapeMismatch("initial state or control sampling does not match the run")
        out, _ = _kernels.march(*self._A, *self._B, self._drive(f), u0[1:].copy(), full)
        if full:
            states = np.empty((self.n_t + 1, self.grid.n_x + 1))
            states[:, 1:] = out
            states[:, 0] = f
            states[0, 0] = u0[0]
            return states
        return np.concatenate(([f[-1]], out[0]))

    def adjoint(self, v: np.ndarray, full: bool = True):
        """Backward solve from terminal data ``v``.

        Returns ``(states or None, p1, p2)`` with time increasing; ``p1`` and
        ``p2`` are the first two interior nodal values at every time level.
        """
        if v.shape != (self.grid.n_x + 1,):
            raise ShapeMismatch("terminal state does not match the grid")
        zero = np.zeros(self.n_t)
        out, edge = _kernels.march(*self._A, *self._B, zero, v[1:].copy(), full)
        edge = edge[::-1]
        states = None
        if full:
            states = np.zeros((self.n_t + 1, self.grid.n_x + 1))
            states[:, 1:] = out[::-1]
        return states, edge[:, 0].copy(), edge[:, 1].copy()

    def trace(self, p1: np.ndarray, p2: np.ndarray, kind: str = "consistent") -> np.ndarray:
        """Approximate p_x(0, t) at every time level.

        ``consistent`` is the trace for which the trapezoid rule reproduces
        the exact discrete adjoint of the forward march (so gradients and
        the duality identity are exact for the symmetric closure);
        ``one_sided`` is ``(4 p_1 - p_2) / (2 dx)``.
        """
        if kind == "one_sided":
            return (4.0 * p1 - p2) / (2.0 * self.grid.dx)
        if kind != "consistent":
            raise ValueError(f"trace must be one of {TRACES}")
        th = self.theta
        mid = self.coupling * ((1.0 - th) * p1[1:] + th * p1[:-1])
        tau = np.empty_like(p1)
        tau[0] = 2.0 * (1.0 - th) * mid[0]
        tau[-1] = 2.0 * th * mid[-1]
        tau[1:-1] = th * mid[:-1] + (1.0 - th) * mid[1:]
        return tau

    def time_weights(self) -> np.ndarray:
        return trapezoid_time_weights(self.n_t, self.dt)

    # -- elliptic ---------------------------------------------------------
    def _factor(self, alpha: float):
        key = float(alpha)
        if key not in self._elliptic_cache:
            M = self.matrix(alpha)
            lu, piv = linalg.lu_factor(M, check_finite=False)
            anorm = np.linalg.norm(M, 1)
            rcond, info = linalg.lapack.dgecon(lu, anorm, norm="1")
            if info != 0 or not rcond > 1e-13:
                raise SingularSystem(
                    f"alpha={alpha} makes the elliptic system singular (rcond={rcond:.2e})")
            self._elliptic_cache[key] = (lu, piv)
        return self._elliptic_cache[key]

    def elliptic(self, rhs: np.ndarray, alpha: float) -> np.ndarray:
        """Solve ``(alpha - A) g = rhs`` i.e. ``(alpha E + K) g = E rhs``; g_0 = 0."""
        lu, piv = self._factor(alpha)
        g = np.zeros(self.grid.n_x + 1)
        g[1:] = linalg.lu_solve((lu, piv), self.E * rhs[1:], check_finite=False)
        return g

    def elliptic_operator_rhs(self, rhs_weighted: np.ndarray, alpha: float) -> np.ndarray:
        """Solve ``(alpha E + K) g = rhs_weighted`` with a pre-weighted right side."""
        lu, piv = self._factor(alpha)
        g = np.zeros(self.grid.n_x + 1)
        g[1:] = linalg.lu_solve((lu, piv), rhs_weighted, check_finite=False)
        return g

    def energy(self, g: np.ndarray, w: np.ndarray, alpha: float) -> float:
        """``((alpha - A) g, w)_H`` = g^T (alpha E + K) w over the unknowns."""
        return float(np.dot(alpha * self.E * g[1:] + self.apply_K(g[1:]), w[1:]))


@lru_cache(maxsize=32)
def discretization(params: WentzellParams, n_x: int, T: float, n_t: int,
                   theta: float = 0.5, closure: str = "symmetric") -> MethodOfLines:
    return MethodOfLines(params, n_x, T, n_t, theta, closure)


def default_n_t(n_x: int, T: float = 1.0) -> int:
    """Ten steps per spatial cell over a unit horizon, so dt <= dx."""
    return max(int(math.ceil(10 * n_x * T)), 1)


# -- inner products --------------------------------------------------------
def inner_H(p: State, q: State, params: WentzellParams) -> float:
    """Trapezoid rule on [0,1] plus ``(a/d) p(1) q(1)``."""
    if p.grid != q.grid:
        raise ShapeMismatch("states live on different grids")
    w = p.grid.trapezoid_weights()
    return float(np.sum(w * p.values * q.values) + params.weight * p.boundary * q.boundary)


def norm_H(p: State, params: WentzellParams) -> float:
    return math.sqrt(max(inner_H(p, p, params), 0.0))


# -- solvers ---------------------------------------------------------------
def _run_control(f: Control, n_t: int | None, T: float | None) -> tuple[Control, float, int]:
    T_run = f.horizon if T is None else float(T)
    if abs(f.times[0]) > 1e-12 or abs(f.horizon - T_run) > 1e-12 * max(1.0, T_run):
        raise ShapeMismatch(f"control horizon [{f.times[0]}, {f.horizon}] != [0, {T_run}]")
    n = f.n_t if n_t is None else int(n_t)
    return f.resample(n), T_run, n


def solve_forward(U0: State, f: Control, params: WentzellParams, n_t: int | None = None,
                  *, theta: float = 0.5, closure: str = "symmetric") -> Trajectory:
    """Controlled forward problem; the control is linearly interpolated onto the run grid."""
    f, T, n_t = _run_control(f, n_t, None)
    mol = discretization(params, U0.grid.n_x, T, n_t, theta, closure)
    states = mol.forward(U0.values, f.samples, full=True)
    return Trajectory(mol.times, U0.grid, states)


def solve_adjoint(VT: State, params: WentzellParams, n_t: int, T: float = 1.0,
                  *, theta: float = 0.5, closure: str = "symmetric",
                  trace: str = "consistent") -> Trajectory:
    """Backward adjoint problem from terminal data ``VT``; fills ``flux0``."""
    mol = discretization(params, VT.grid.n_x, float(T), int(n_t), theta, closure)
    states, p1, p2 = mol.adjoint(VT.values, full=True)
    return Trajectory(mol.times, VT.grid, states, mol.trace(p1, p2, trace))


def solve_elliptic(rhs: State, alpha: float, params: WentzellParams,
                   *, closure: str = "symmetric") -> State:
    """``g_xx - alpha g = -rhs``, ``g(0) = 0``, Wentzell condition at x = 1."""
    mol = discretization(params, rhs.grid.n_x, 1.0, 1, 0.5, closure)
    return State(rhs.grid, mol.elliptic(rhs.values, alpha))


def elliptic_residual(g: State, rhs: State, alpha: float, params: WentzellParams,
                      *, closure: str = "symmetric") -> float:
    """Relative residual of the discrete elliptic system for a candidate ``g``."""
    mol = discretization(params, rhs.grid.n_x, 1.0, 1, 0.5, closure)
    lhs = alpha * mol.E * g.values[1:] + mol.apply_K(g.values[1:])
    b = mol.E * rhs.values[1:]
    scale = np.linalg.norm(b) + np.linalg.norm(mol.matrix(alpha), np.inf) * np.linalg.norm(g.values)
    return float(np.linalg.norm(lhs - b) / scale) if scale > 0 else 0.0


def dual_pairing(U: State, alpha: float, params: WentzellParams,
                 *, closure: str = "symmetric") -> float:
    """``((alpha - A)^{-1} U, U)_H``; negative when alpha + lam_0 < 0."""
    return inner_H(solve_elliptic(U, alpha, params, closure=closure), U, params)


def norm_Hminus1(U: State, alpha: float, params: WentzellParams,
                 *, closure: str = "symmetric") -> float:
    val = dual_pairing(U, alpha, params, closure=closure)
    if val < -1e-14 * max(1.0, norm_H(U, params) ** 2):
        raise ValueError(
            f"alpha={alpha} gives an indefinite pairing ({val:.3e}); "
            "the H^-1 norm needs alpha + lam_0 > 0")
    return math.sqrt(max(val, 0.0))


def duality_terms(U0: State, f: Control, VT: State, params: WentzellParams,
                  n_t: int | None = None, *, trace: str = "one_sided",
                  theta: float = 0.5, closure: str = "symmetric") -> tuple[float, float]:
    """Both sides of ``(U(T), Phi_T)_H - (U(0), Phi(0))_H = int phi_x(0,t) f(t) dt``."""
    f, T, n_t = _run_control(f, n_t, None)
    fwd = solve_forward(U0, f, params, n_t, theta=theta, closure=closure)
    adj = solve_adjoint(VT, params, n_t, T, theta=theta, closure=closure, trace=trace)
    lhs = inner_H(fwd.terminal, adj.terminal, params) - inner_H(fwd.initial, adj.initial, params)
    rhs = float(np.sum(trapezoid_time_weights(n_t, T / n_t) * adj.flux0 * f.samples))
    return lhs, rhs


def duality_check(U0: State, f: Control, VT: State, params: WentzellParams,
                  n_t: int | None = None, **kwargs) -> float:
    lhs, rhs = duality_terms(U0, f, VT, params, n_t, **kwargs)
    return abs(lhs - rhs)
