"""Eigenpairs of ``-y'' = lam*y, y(0)=0, (a*lam + b) y(1) = d y'(1)``.

Positive eigenvalues are ``mu**2`` for the positive roots ``mu`` of

    h(mu) = (a/d mu^2 + b/d) sin(mu) - mu cos(mu).

When ``b/d > 1`` there is one extra negative eigenvalue ``-mu0**2`` with
eigenfunction ``exp(mu0 x) - exp(-mu0 x)``; when ``b/d == 1`` the extra
eigenvalue is zero with eigenfunction ``x``.

Trig roots are stored as ``k*pi + offset`` with the offset carried to full
relative precision.  Evaluating ``h`` through the parity reduction
``sin(k pi + s) = (-1)^k sin(s)`` keeps residuals at the 1e-14 level even
for large ``k``, where a plain double ``mu`` only resolves ``h`` to
about ``h'(mu) * ulp(mu) ~ mu^3 * 1e-16``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import BracketFailure, GridTooCoarse
from .state import Grid, State

TOL_ROOT = 1e-12
_BISECT_WIDTH = 1e-10
_NEWTON_STEPS = 5


class Regime(enum.Enum):
    SUBCRITICAL = "sub"      # b/d < 1
    CRITICAL = "crit"        # b/d = 1
    SUPERCRITICAL = "super"  # b/d > 1


class Kind(enum.Enum):
    TRIG = "trig"
    HYPERBOLIC = "hyperbolic"
    LINEAR = "linear"


@dataclass(frozen=True)
class WentzellParams:
    """Coefficients of ``a u_xx(1) + d u_x(1) - b u(1) = 0``; requires ``a*d > 0``."""

    a: float
    b: float
    d: float

    def __post_init__(self):
        if not all(math.isfinite(float(v)) for v in (self.a, self.b, self.d)):
            raise ValueError("a, b, d must be finite")
        if not float(self.a) * float(self.d) > 0:
            raise ValueError(f"need a*d > 0, got a={self.a}, d={self.d}")

    @property
    def ratio(self) -> float:
        return float(self.b) / float(self.d)

    @property
    def weight(self) -> float:
        """Boundary weight a/d of the H inner product."""
        return float(self.a) / float(self.d)

    def regime(self) -> Regime:
        exact = Fraction(self.b) / Fraction(self.d)
        if exact == 1 or abs(self.ratio - 1.0) <= 1e-14:
            return Regime.CRITICAL
        return Regime.SUBCRITICAL if exact < 1 else Regime.SUPERCRITICAL


@dataclass(frozen=True)
class Eigenpair:
    """One eigenpair in global order (``n = 0`` is the smallest eigenvalue).

    For trig modes ``mu == base * pi + offset`` exactly in real arithmetic;
    ``mu`` itself is the rounded double.
    """

    n: int
    kind: Kind
    mu: float
    lam: float
    norm_H: float
    base: int = 0
    offset: float = 0.0

    @property
    def flux0(self) -> float:
        """y'(0) of the unnormalised eigenfunction."""
        if self.kind is Kind.TRIG:
            return self.mu
        if self.kind is Kind.HYPERBOLIC:
            return 2.0 * self.mu
        return 1.0

    def sin_mu(self) -> float:
        """sin(mu) via the parity reduction."""
        return (-1.0) ** self.base * math.sin(self.offset)

    def residual(self, params: WentzellParams) -> float:
        if self.kind is Kind.TRIG:
            return characteristic_residual(self.offset, params, base=self.base)
        if self.kind is Kind.HYPERBOLIC:
            return hyperbolic_residual(self.mu, params)
        return float(params.b - params.d)

    def __call__(self, x):
        return eigenfunction_eval(self, x)


def characteristic_residual(mu: float, params: WentzellParams, base: int = 0) -> float:
    """``h(base*pi + mu)`` with ``h(m) = (a/d m^2 + b/d) sin m - m cos m``.

    With ``base=0`` this is the plain formula.  A nonzero ``base`` evaluates
    at the real number ``base*pi + mu`` without forming it in floating point.
    """
    if base == 0:
        return (params.weight * mu * mu + params.ratio) * math.sin(mu) - mu * math.cos(mu)
    m = base * math.pi + mu
    sign = -1.0 if base % 2 else 1.0
    return sign * ((params.weight * m * m + params.ratio) * math.sin(mu) - m * math.cos(mu))


def hyperbolic_residual(mu: float, params: WentzellParams) -> float:
    """``(b - a mu^2) sinh(mu) - d mu cosh(mu)``."""
    return (params.b - params.a * mu * mu) * math.sinh(mu) - params.d * mu * math.cosh(mu)


def _reduced(k: int, s: float, w: float, r: float) -> float:
    # (-1)^k h(k pi + s); for k == 0 divided by s to drop the trivial root at 0
    if k == 0:
        sinc = math.sin(s) / s if s != 0.0 else 1.0
        return (w * s * s + r) * sinc - math.cos(s)
    m = k * math.pi + s
    return (w * m * m + r) * math.sin(s) - m * math.cos(s)


def _reduced_prime(k: int, s: float, w: float, r: float) -> float:
    m = k * math.pi + s
    return (2 * w * m + m) * math.sin(s) + (w * m * m + r - 1.0) * math.cos(s)


def _trig_root(k: int, width: float, params: WentzellParams) -> float:
    """Offset in (0, width) of the root of h in (k pi, k pi + width)."""
    w, r = params.weight, params.ratio
    lo, hi = 0.0, width
    f_lo, f_hi = _reduced(k, lo, w, r), _reduced(k, hi, w, r)
    if f_lo == 0.0 or f_lo * f_hi > 0:
        raise BracketFailure(
            f"no sign change of h on ({k}pi, {k}pi+{width:.4f}) for a={params.a}, "
            f"b={params.b}, d={params.d}")
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        f_mid = _reduced(k, mid, w, r)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        fp = _reduced_prime(k, s, w, r)
        m = k * math.pi + s
        val = (w * m * m + r) * math.sin(s) - m * math.cos(s)
        if fp == 0.0 or val == 0.0:
            break
        step = val / fp
        if not lo - _BISECT_WIDTH <= s - step <= hi + _BISECT_WIDTH:
            break
        s -= step
        if abs(step) <= 4e-16 * abs(s):
            break
    return s


def _bracket_width(params: WentzellParams) -> float:
    return math.pi if params.ratio < 0 else 0.5 * math.pi


def norm_H(pair: Eigenpair, params: WentzellParams) -> float:
    """||Y_n||_H = sqrt(int_0^1 y^2 dx + (a/d) y(1)^2), closed form per branch."""
    w = params.weight
    if pair.kind is Kind.TRIG:
        mu = pair.mu
        s2 = math.sin(2.0 * pair.offset)  # sin(2 mu) = sin(2 offset)
        sm = pair.sin_mu()
        return math.sqrt(0.5 - s2 / (4.0 * mu) + w * sm * sm)
    if pair.kind is Kind.HYPERBOLIC:
        mu = pair.mu
        return math.sqrt(math.sinh(2.0 * mu) / mu - 2.0 + 4.0 * w * math.sinh(mu) ** 2)
    return math.sqrt(1.0 / 3.0 + w)


def _with_norm(pair: Eigenpair, params: WentzellParams) -> Eigenpair:
    return Eigenpair(pair.n, pair.kind, pair.mu, pair.lam, norm_H(pair, params),
                     pair.base, pair.offset)


def positive_eigenvalues(params: WentzellParams, n_max: int) -> list[Eigenpair]:
    """All trig eigenpairs with global index ``<= n_max``.

    The trig branch starts at ``n = 0`` when ``b/d < 1`` and at ``n = 1``
    otherwise; root ``n`` lies in ``(n pi, n pi + pi/2)`` (``+ pi`` when
    ``b/d < 0``).
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    first = 0 if params.regime() is Regime.SUBCRITICAL else 1
    width = _bracket_width(params)
    pairs = []
    for n in range(first, n_max + 1):
        s = _trig_root(n, width, params)
        mu = n * math.pi + s
        pair = Eigenpair(n, Kind.TRIG, mu, mu * mu, 1.0, base=n, offset=s)
        pairs.append(_with_norm(pair, params))
    return pairs


def nonpositive_eigenvalue(params: WentzellParams) -> Eigenpair | None:
    """The zero (b/d = 1) or negative (b/d > 1) eigenpair, else ``None``."""
    regime = params.regime()
    if regime is Regime.SUBCRITICAL:
        return None
    if regime is Regime.CRITICAL:
        return _with_norm(Eigenpair(0, Kind.LINEAR, 0.0, 0.0, 1.0), params)

    w, r = params.weight, params.ratio

    def g(mu):
        # hyperbolic_residual / (d mu); equals r - 1 > 0 at mu = 0
        shc = math.sinh(mu) / mu if mu != 0.0 else 1.0
        return (r - w * mu * mu) * shc - math.cosh(mu)

    lo, hi = 0.0, 1.0
    while g(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 700.0:
            raise BracketFailure("no sign change for the negative eigenvalue")
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        # d/dmu of (r - w mu^2) sinh mu - mu cosh mu
        val = (r - w * mu * mu) * math.sinh(mu) - mu * math.cosh(mu)
        der = (r - w * mu * mu - 1.0) * math.cosh(mu) - (2.0 * w * mu + mu) * math.sinh(mu)
        if der == 0.0 or val == 0.0:
            break
        nxt = mu - val / der
        if not lo - _BISECT_WIDTH <= nxt <= hi + _BISECT_WIDTH:
            break
        mu = nxt
    return _with_norm(Eigenpair(0, Kind.HYPERBOLIC, mu, -mu * mu, 1.0), params)


def spectrum(params: WentzellParams, n_modes: int) -> list[Eigenpair]:
    """The ``n_modes`` smallest eigenpairs in increasing order."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    low = nonpositive_eigenvalue(params)
    head = [] if low is None else [low]
    return head + positive_eigenvalues(params, n_modes - 1)


def eigenfunction_eval(pair: Eigenpair, x):
    """Unnormalised eigenfunction y_n at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if pair.kind is Kind.TRIG:
        out = np.sin(pair.mu * x)
    elif pair.kind is Kind.HYPERBOLIC:
        out = np.exp(pair.mu * x) - np.exp(-pair.mu * x)
    else:
        out = x.copy()
    return out if out.ndim else float(out)


def boundary_value(pair: Eigenpair) -> float:
    """y_n(1), with the trig case taken from the stored offset."""
    if pair.kind is Kind.TRIG:
        return pair.sin_mu()
    return float(eigenfunction_eval(pair, 1.0))


def normalized_state(pair: Eigenpair, grid: Grid) -> State:
    """Z_n = Y_n / ||Y_n||_H sampled on ``grid``."""
    v = eigenfunction_eval(pair, grid.nodes) / pair.norm_H
    v[-1] = boundary_value(pair) / pair.norm_H
    return State(grid, v)


def inner_H_exact(p: Eigenpair, q: Eigenpair, params: WentzellParams) -> float:
    """(Z_p, Z_q)_H by adaptive Gauss-Kronrod plus the boundary term."""
    integrand = lambda x: eigenfunction_eval(p, x) * eigenfunction_eval(q, x)
    pts = None
    top = max(p.mu, q.mu)
    if top > 20:
        pts = np.linspace(0, 1, int(top / 10) + 2)[1:-1]
    with warnings.catch_warnings():
        # orthogonal pairs integrate to roundoff, which trips quad's accuracy warning
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13,
                                limit=400, points=pts)
    val += params.weight * boundary_value(p) * boundary_value(q)
    return val / (p.norm_H * q.norm_H)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Expansion coefficients eta_n = (U0, Z_n)_H over a truncated eigenbasis."""

    params: WentzellParams
    T_horizon: float
    pairs: tuple[Eigenpair, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        idx = [p.n for p in self.pairs]
        if c.shape != (len(self.pairs),) or not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite and match the eigenpairs")
        if any(j <= i for i, j in zip(idx, idx[1:])):
            raise ValueError("eigenpair indices must be distinct and sorted")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def indices(self) -> list[int]:
        return [p.n for p in self.pairs]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def h_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def _simpson(values: np.ndarray, dx: float) -> float:
    return float(integrate.simpson(values, dx=dx))


def expand(U0: State, pairs: Sequence[Eigenpair], params: WentzellParams,
           T_horizon: float = 1.0) -> SpectralCoeffs:
    """Project a state onto the normalised eigenbasis.

    The interior integral uses composite Simpson on the state's grid; the
    boundary term ``(a/d) u(1) z_n(1)`` is added exactly.
    """
    grid = U0.grid
    if pairs:
        top = max(p.mu for p in pairs)
        if top > 0 and (2 * math.pi / top) / grid.dx < 8:
            raise GridTooCoarse(
                f"n_x={grid.n_x} gives fewer than 8 points per wavelength for mu={top:.3f}")
    x = grid.nodes
    eta = []
    for p in pairs:
        z = eigenfunction_eval(p, x) / p.norm_H
        zb = boundary_value(p) / p.norm_H
        eta.append(_simpson(U0.values * z, grid.dx) + params.weight * U0.boundary * zb)
    return SpectralCoeffs(params, T_horizon, tuple(pairs), np.array(eta))


class Direction(enum.Enum):
    FORWARD = "forward"
    ADJOINT_BACKWARD = "adjoint"


def synthesize(coeffs: SpectralCoeffs, amplitudes: np.ndarray, grid: Grid) -> State:
    """Sum ``amplitudes[n] * Z_n`` on ``grid`` with exact boundary values."""
    x = grid.nodes
    v = np.zeros_like(x)
    vb = 0.0
    for p, c in zip(coeffs.pairs, amplitudes):
        v += c * eigenfunction_eval(p, x) / p.norm_H
        vb += c * boundary_value(p) / p.norm_H
    v[-1] = vb
    return State(grid, v)


def evolve(coeffs: SpectralCoeffs, t: float,
           direction: Direction = Direction.FORWARD) -> np.ndarray:
    """Mode amplitudes of the free solution at time ``t``."""
    if not 0.0 <= t <= coeffs.T_horizon * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {coeffs.T_horizon}]")
    lam = coeffs.lambdas
    if direction is Direction.FORWARD:
        return coeffs.coeffs * np.exp(-lam * t)
    return coeffs.coeffs * np.exp(-lam * (coeffs.T_horizon - t))


def spectral_solution(coeffs: SpectralCoeffs, t: float,
                      direction: Direction = Direction.FORWARD,
                      grid: Grid | None = None) -> State:
    """Free (f = 0) solution from a truncated expansion, sampled on ``grid``.

    ``FORWARD`` gives ``sum eta_n exp(-lam_n t) Z_n``; ``ADJOINT_BACKWARD``
    treats the coefficients as terminal data and gives
    ``sum beta_n exp(-lam_n (T - t)) Z_n``.
    """
    grid = grid or Grid(200)
    return synthesize(coeffs, evolve(coeffs, t, direction), grid)


def free_terminal_norm(coeffs: SpectralCoeffs) -> float:
    """H-norm of the uncontrolled state at T, from the coefficients alone."""
    return float(np.linalg.norm(evolve(coeffs, coeffs.T_horizon)))
