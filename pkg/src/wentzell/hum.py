"""Penalized HUM controls by conjugate gradients on the adjoint terminal datum.

The cost is ``J(f) = 1/2 ||f||^2 + 1/(2 eps) ((alpha - A)^{-1} U(T), U(T))_H``.
Writing the control as ``f = -p_x(0, .)`` for the adjoint with terminal
datum ``v`` turns the optimality system into ``eps v + R Lambda v = R y(T)``
with ``R = (alpha - A)^{-1}`` and ``Lambda v`` the terminal state driven from
rest by ``p_x(0, .)``.  That operator is self-adjoint for the energy product
``<g, w> = ((alpha - A) g, w)_H`` which is the default CG inner product.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownZeroDenominator, MaxIterReached, ShapeMismatch
from .pde import TRACES, CLOSURES, default_n_t, discretization
from .spectral import WentzellParams, spectrum
from .state import Control, State

log = logging.getLogger(__name__)

INNER_PRODUCTS = ("energy", "literal", "l2")


@dataclass(frozen=True)
class HumConfig:
    eps: float = 1e-3
    alpha: float = 0.0
    tol: float = 1e-3
    max_iter: int = 5000
    n_x: int = 25
    n_t: int | None = None
    T: float = 1.0
    theta: float = 0.5
    closure: str = "symmetric"
    inner: str = "energy"
    trace: str = "consistent"
    log_every: int = 50

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.inner not in INNER_PRODUCTS:
            raise ValueError(f"inner must be one of {INNER_PRODUCTS}")
        if self.trace not in TRACES:
            raise ValueError(f"trace must be one of {TRACES}")
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")
        if self.n_t is None:
            object.__setattr__(self, "n_t", default_n_t(self.n_x, self.T))

    def check_resolvent(self, params: WentzellParams) -> None:
        """Reject alpha within 1e-10 of any -lam_n."""
        n = 8
        while True:
            lams = np.array([p.lam for p in spectrum(params, n)])
            hit = np.abs(lams + self.alpha) <= 1e-10
            if hit.any():
                raise ValueError(f"alpha={self.alpha} coincides with -lambda_{int(np.argmax(hit))}")
            if lams[-1] > -self.alpha + 1.0:
                return
            n *= 2


@dataclass(frozen=True, eq=False)
class HumResult:
    control: Control
    v_final: State
    residuals: np.ndarray
    terminal: State
    terminal_norm_H: float
    terminal_pairing: float
    j_eps: float
    iterations: int
    converged: bool
    history: dict = field(default_factory=dict, repr=False)

    @property
    def terminal_norm_Hminus1(self) -> float:
        """sqrt of the dual pairing; NaN when alpha makes the pairing negative."""
        return math.sqrt(self.terminal_pairing) if self.terminal_pairing >= 0 else math.nan


class _Problem:
    """Discrete operators shared by the functional, its gradient and CG."""

    def __init__(self, U0: State, cfg: HumConfig, params: WentzellParams):
        if U0.grid.n_x != cfg.n_x:
            raise ShapeMismatch(f"U0 lives on n_x={U0.grid.n_x}, config expects {cfg.n_x}")
        self.cfg, self.params, self.U0 = cfg, params, U0
        self.mol = discretization(params, cfg.n_x, float(cfg.T), int(cfg.n_t),
                                  cfg.theta, cfg.closure)
        self.zero = np.zeros(cfg.n_x + 1)
        self.w_t = self.mol.time_weights()
        self.h_w = U0.grid.trapezoid_weights()

    def flux(self, v: np.ndarray) -> np.ndarray:
        _, p1, p2 = self.mol.adjoint(v, full=False)
        return self.mol.trace(p1, p2, self.cfg.trace)

    def terminal(self, u0: np.ndarray, f: np.ndarray) -> np.ndarray:
        return self.mol.forward(u0, f, full=False)

    def pairing(self, u: np.ndarray) -> float:
        g = self.mol.elliptic(u, self.cfg.alpha)
        return float(np.dot(self.mol.E * g[1:], u[1:]))

    def inner(self, g: np.ndarray, w: np.ndarray) -> float:
        kind = self.cfg.inner
        if kind == "energy":
            return self.mol.energy(g, w, self.cfg.alpha)
        dx = self.U0.grid.dx
        gx = np.gradient(g, dx, edge_order=2)
        wx = np.gradient(w, dx, edge_order=2)
        val = float(np.sum(self.h_w * gx * wx))
        if kind == "literal":
            val += self.params.weight * gx[-1] * wx[-1]
        return val

    def residual_map(self, v: np.ndarray, u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``eps v - R y(T)`` where y starts from ``u0`` under ``f = -p_x(0)``."""
        f = -self.flux(v)
        yT = self.terminal(u0, f)
        return self.cfg.eps * v - self.mol.elliptic(yT, self.cfg.alpha), f


def _control(prob: _Problem, samples: np.ndarray) -> Control:
    return Control(prob.mol.times, samples)


def j_eps(f: Control, U0: State, cfg: HumConfig, params: WentzellParams) -> float:
    """``1/2 ||f||^2 + (1/(2 eps)) ((alpha - A)^{-1} U(T), U(T))_H`` (signed pairing)."""
    prob = _Problem(U0, cfg, params)
    f = _on_run_grid(f, cfg)
    uT = prob.terminal(U0.values, f.samples)
    return 0.5 * f.inner(f) + prob.pairing(uT) / (2.0 * cfg.eps)


def _on_run_grid(f: Control, cfg: HumConfig) -> Control:
    if abs(f.horizon - cfg.T) > 1e-12 * max(1.0, cfg.T):
        raise ShapeMismatch(f"control horizon {f.horizon} != T={cfg.T}")
    return f.resample(int(cfg.n_t))


def gradient_residual(f: Control, U0: State, cfg: HumConfig,
                      params: WentzellParams) -> Control:
    """``f + p_x(0, .)`` with p driven by ``h = (alpha - A)^{-1} U(T) / eps``.

    With the consistent trace this is the exact gradient of the discrete
    functional for the trapezoid-weighted L2 product on the time grid.
    """
    prob = _Problem(U0, cfg, params)
    f = _on_run_grid(f, cfg)
    uT = prob.terminal(U0.values, f.samples)
    h = prob.mol.elliptic(uT / cfg.eps, cfg.alpha)
    return _control(prob, f.samples + prob.flux(h))


def hum_cg(U0: State, cfg: HumConfig, params: WentzellParams,
           v0: State | None = None) -> HumResult:
    """Conjugate gradients on ``eps v + R Lambda v = R y(T)``.

    Each iteration costs one adjoint and one forward solve (from rest) plus
    an elliptic solve.  Stops when ``sqrt(<g_k, g_k> / <g_0, g_0>) <= tol``;
    hitting ``max_iter`` issues :class:`MaxIterReached` and returns the last
    iterate with ``converged=False``.
    """
    cfg.check_resolvent(params)
    prob = _Problem(U0, cfg, params)
    v = prob.zero.copy() if v0 is None else v0.values.copy()
    v[0] = 0.0

    g, _ = prob.residual_map(v, U0.values)
    gg = prob.inner(g, g)
    gg0 = gg
    residuals = [1.0]
    rhos, gammas = [], []
    w = g.copy()
    k = 0
    converged = gg0 == 0.0
    while not converged and k < cfg.max_iter:
        k += 1
        gbar, _ = prob.residual_map(w, prob.zero)
        den = prob.inner(gbar, w)
        if abs(den) < 1e-300:
            raise BreakdownZeroDenominator(f"<gbar, w> vanished at iteration {k}")
        rho = gg / den
        v -= rho * w
        g -= rho * gbar
        gg_new = prob.inner(g, g)
        res = math.sqrt(abs(gg_new / gg0))
        residuals.append(res)
        rhos.append(rho)
        if cfg.log_every and k % cfg.log_every == 0:
            log.info("hum iteration %d: residual %.3e", k, res)
        if res <= cfg.tol:
            converged = True
            break
        gamma = gg_new / gg
        gammas.append(gamma)
        w = g + gamma * w
        gg = gg_new

    if not converged:
        warnings.warn(f"HUM stopped after {k} iterations at residual {residuals[-1]:.3e}",
                      MaxIterReached, stacklevel=2)

    f = -prob.flux(v) if gg0 != 0.0 else np.zeros(prob.mol.n_t + 1)
    uT = prob.terminal(U0.values, f)
    control = _control(prob, f)
    terminal = State(U0.grid, uT)
    pairing = prob.pairing(uT)
    norm_H = math.sqrt(float(np.sum(prob.h_w * uT * uT) + params.weight * uT[-1] ** 2))
    return HumResult(
        control=control,
        v_final=State(U0.grid, v),
        residuals=np.array(residuals),
        terminal=terminal,
        terminal_norm_H=norm_H,
        terminal_pairing=pairing,
        j_eps=0.5 * control.inner(control) + pairing / (2.0 * cfg.eps),
        iterations=k,
        converged=converged,
        history={"rho": np.array(rhos), "gamma": np.array(gammas)},
    )
