"""Moment-method controls from a truncated biorthogonal exponential family.

The control is ``f(t) = theta(T - t)`` where ``theta`` solves the finite
moment problem

    int_0^T theta(t) exp(-lam_n t) dt = -eta_n exp(-lam_n T) ||Y_n||_H / y_n'(0),

for the first ``N`` modes.  When some ``lam_n <= 0`` the family is shifted:
``theta = exp(-s t) theta~`` with ``theta~`` biorthogonal to the exponents
``lam_n + s > 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, linalg

from .errors import IllConditioned, IndexMismatch, ShapeMismatch
from .pde import discretization, inner_H
from .spectral import Eigenpair, WentzellParams, expand, normalized_state
from .state import Control, State, time_grid

COND_LIMIT = 1e14


@dataclass(frozen=True, eq=False)
class ExpFamily:
    """Eigenvalues ``lambdas`` with the shift ``s`` that makes ``lambdas + s`` positive."""

    lambdas: np.ndarray
    T_horizon: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0 or not np.all(np.isfinite(lam)):
            raise ValueError("lambdas must be a nonempty finite vector")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("lambdas must be strictly increasing")
        if not self.T_horizon > 0:
            raise ValueError("T_horizon must be positive")
        if self.shift < 0:
            raise ValueError("shift must be >= 0")
        if lam[0] + self.shift <= 0:
            raise ValueError("shifted exponents must be positive; increase the shift")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Eigenpair], T_horizon: float = 1.0) -> "ExpFamily":
        """Family over the pairs' eigenvalues, shifted by ``1 - lam_0`` iff ``lam_0 <= 0``."""
        lam = np.array([p.lam for p in pairs])
        shift = 1.0 - lam[0] if lam[0] <= 0 else 0.0
        return cls(lam, T_horizon, shift)

    def __len__(self) -> int:
        return self.lambdas.size

    @property
    def exponents(self) -> np.ndarray:
        return self.lambdas + self.shift

    @property
    def shifted(self) -> bool:
        return self.shift > 0


def _gram_ld(fam: ExpFamily) -> np.ndarray:
    s = np.add.outer(fam.exponents.astype(np.longdouble), fam.exponents.astype(np.longdouble))
    return -np.expm1(-s * np.longdouble(fam.T_horizon)) / s


def gram_matrix(fam: ExpFamily) -> np.ndarray:
    """``G_mn = (1 - exp(-(k_m + k_n) T)) / (k_m + k_n)`` over the shifted exponents."""
    return _gram_ld(fam).astype(float)


def _solve_gram(fam: ExpFamily, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky solve with two refinement passes on extended-precision residuals."""
    G_ld = _gram_ld(fam)
    G = G_ld.astype(float)
    cond = float(np.linalg.cond(G))
    if not cond <= COND_LIMIT:
        raise IllConditioned(f"Gram condition {cond:.2e} exceeds {COND_LIMIT:.0e} (N={len(fam)})")
    try:
        factor = linalg.cho_factor(G, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(f"Gram matrix lost definiteness (N={len(fam)})") from exc
    c = linalg.cho_solve(factor, rhs, check_finite=False)
    rhs_ld = np.asarray(rhs, dtype=np.longdouble)
    for _ in range(2):
        r = rhs_ld - G_ld @ c.astype(np.longdouble)
        c = c + linalg.cho_solve(factor, r.astype(float), check_finite=False)
    return c, cond


@dataclass(frozen=True, eq=False)
class BiorthogonalElement:
    """``Theta_n(t) = sum_m coeffs[m] exp(-exponents[m] t)``."""

    n: int
    coeffs: np.ndarray
    exponents: np.ndarray
    l2_norm: float
    condition: float
    residual: float

    def __call__(self, t):
        return exp_sum(self.coeffs, self.exponents, t)


def exp_sum(coeffs: np.ndarray, exponents: np.ndarray, t) -> np.ndarray:
    """Evaluate ``sum_m coeffs[m] exp(-exponents[m] t)`` (scalar or array ``t``)."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.multiply.outer(t, exponents)) @ coeffs
    return out if out.ndim else float(out)


def biorthogonal(fam: ExpFamily, n: int) -> BiorthogonalElement:
    """Element of span{exp(-k_m t)} with ``int exp(-k_m t) Theta_n = delta_mn``."""
    if not 0 <= n < len(fam):
        raise IndexError(f"n={n} outside a family of size {len(fam)}")
    e = np.zeros(len(fam))
    e[n] = 1.0
    c, cond = _solve_gram(fam, e)
    G_ld = _gram_ld(fam)
    c_ld = c.astype(np.longdouble)
    # extended precision: the coefficients alternate and cancel heavily
    res = float(np.max(np.abs(G_ld @ c_ld - e)))
    norm2 = float(c_ld @ G_ld @ c_ld)
    return BiorthogonalElement(n, c, fam.exponents.copy(), math.sqrt(max(norm2, 0.0)), cond, res)


def biorthogonal_family(fam: ExpFamily) -> list[BiorthogonalElement]:
    return [biorthogonal(fam, n) for n in range(len(fam))]


def moment_rhs(pairs: Sequence[Eigenpair], eta: np.ndarray, T: float) -> np.ndarray:
    """``-eta_n exp(-lam_n T) ||Y_n||_H / y_n'(0)`` per mode."""
    lam = np.array([p.lam for p in pairs])
    norms = np.array([p.norm_H for p in pairs])
    flux = np.array([p.flux0 for p in pairs])
    return -eta * np.exp(-lam * T) * norms / flux


@dataclass(frozen=True, eq=False)
class MomentResult:
    control: Control
    residuals: np.ndarray
    n_modes: int
    gram_condition: float
    shift: float
    theta_coeffs: np.ndarray = field(repr=False)
    theta_exponents: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)

    def theta(self, t):
        """``theta(t) = f(T - t)`` evaluated exactly."""
        return exp_sum(self.theta_coeffs, self.theta_exponents, t)


def _check_alignment(fam: ExpFamily, pairs: Sequence[Eigenpair]) -> None:
    lam = np.array([p.lam for p in pairs])
    if lam.shape != fam.lambdas.shape:
        raise IndexMismatch(f"family has {len(fam)} exponents, {lam.size} eigenpairs given")
    if not np.allclose(lam, fam.lambdas, rtol=1e-12, atol=1e-12):
        raise IndexMismatch("family exponents do not match the eigenvalues")


def moment_integrals(coeffs: np.ndarray, exponents: np.ndarray, lambdas: np.ndarray,
                     T: float) -> np.ndarray:
    """``int_0^T theta(t) exp(-lam t) dt`` by adaptive quadrature, one per ``lam``."""
    out = []
    for lam in lambdas:
        with warnings.catch_warnings():
            # residuals at roundoff level trip quad's accuracy warning
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda t: exp_sum(coeffs, exponents, t) * math.exp(-lam * t),
                                    0.0, T, epsabs=1e-15, epsrel=1e-13, limit=200)
        out.append(val)
    return np.array(out)


def moment_control(U0: State, fam: ExpFamily, pairs: Sequence[Eigenpair],
                   params: WentzellParams, n_samples: int) -> MomentResult:
    """Control annihilating the first ``len(pairs)`` modes at ``T``; samples are exact."""
    _check_alignment(fam, pairs)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    T = fam.T_horizon
    eta = expand(U0, pairs, params, T).coeffs
    rhs = moment_rhs(pairs, eta, T)
    c, cond = _solve_gram(fam, rhs)
    exponents = fam.exponents + fam.shift
    times = time_grid(T, n_samples)
    control = Control(times, exp_sum(c, exponents, T - times))
    residuals = np.abs(moment_integrals(c, exponents, fam.lambdas, T) - rhs)
    return MomentResult(control, residuals, len(pairs), cond, fam.shift, c, exponents, rhs, eta)


def predicted_mode_coefficients(result: MomentResult, pairs: Sequence[Eigenpair],
                                eta: np.ndarray, T: float) -> np.ndarray:
    """``(U(T), Z_n)_H`` implied by the duality identity for arbitrary modes.

    ``eta_n exp(-lam_n T) + (y_n'(0)/||Y_n||_H) int theta(s) exp(-lam_n s) ds``;
    zero for the controlled modes, generally nonzero for the tail.
    """
    lam = np.array([p.lam for p in pairs])
    scale = np.array([p.flux0 / p.norm_H for p in pairs])
    ints = moment_integrals(result.theta_coeffs, result.theta_exponents, lam, T)
    return eta * np.exp(-lam * T) + scale * ints


def verify_null_modes(f: Control, U0: State, pairs: Sequence[Eigenpair],
                      params: WentzellParams, n_x: int, n_t: int,
                      *, theta: float = 0.5, closure: str = "symmetric") -> np.ndarray:
    """``|(U(T), Z_n)_H|`` after a forward solve with ``f`` on an ``n_x`` by ``n_t`` grid."""
    if U0.grid.n_x != n_x:
        raise ShapeMismatch(f"U0 lives on n_x={U0.grid.n_x}, run grid is n_x={n_x}")
    mol = discretization(params, n_x, f.horizon, int(n_t), theta, closure)
    uT = State(U0.grid, mol.forward(U0.values, f.resample(int(n_t)).samples, full=False))
    return np.array([abs(inner_H(uT, normalized_state(p, U0.grid), params)) for p in pairs])
