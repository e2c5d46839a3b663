import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import PRESETS, sine_state
from wentzell.errors import BracketFailure, GridTooCoarse
from wentzell.spectral import (Direction, Eigenpair, Kind, Regime, SpectralCoeffs, WentzellParams,
                               boundary_value, characteristic_residual, eigenfunction_eval,
                               evolve, expand, hyperbolic_residual, inner_H_exact,
                               nonpositive_eigenvalue, norm_H, normalized_state,
                               positive_eigenvalues, spectral_solution, spectrum, synthesize)
from wentzell.state import Grid, State

# roots of h from an independent 40-digit mpmath solve
MU_SUB = [0.98272363731867208117, 3.7798068673464687202, 6.6962171703373605781,
          9.7211575143988067959]
MU_CRIT = [3.4056080308571430063, 6.4337988623002202408, 9.5282154926610633294]
MU_SUPER = [3.3720695344857085133, 6.4272343326809034795, 9.5260463309995735733]
MU_SUPER_HYP = 1.2386531078637147063
MU_SUB_100 = 314.1688139783729859678337


def test_params_require_positive_ad():
    with pytest.raises(ValueError):
        WentzellParams(1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        WentzellParams(0.0, 1.0, 1.0)
    WentzellParams(-1.0, 2.0, -3.0)


@pytest.mark.parametrize("b,d,regime", [(1, 3, Regime.SUBCRITICAL), (1, 1, Regime.CRITICAL),
                                        (3, 1, Regime.SUPERCRITICAL), (-2, 1, Regime.SUBCRITICAL),
                                        (0.1 * 3, 0.3, Regime.CRITICAL)])
def test_regime_is_function_of_ratio(b, d, regime):
    assert WentzellParams(1.0, b, d).regime() is regime


def test_characteristic_residual_trivial_values():
    p = WentzellParams(1.0, 1.0, 3.0)
    assert characteristic_residual(0.0, p) == 0.0
    assert characteristic_residual(math.pi, p) == pytest.approx(math.pi, rel=1e-15)


def test_characteristic_residual_base_form_matches_plain():
    p = WentzellParams(1.0, 1.0, 3.0)
    for base, off in [(1, 0.3), (2, 1.1), (5, 0.01)]:
        assert characteristic_residual(off, p, base=base) == pytest.approx(
            characteristic_residual(base * math.pi + off, p), rel=1e-10, abs=1e-12)


def test_subcritical_roots_match_oracle():
    pairs = positive_eigenvalues(PRESETS["sub"][0], 3)
    assert [p.n for p in pairs] == [0, 1, 2, 3]
    assert np.allclose([p.mu for p in pairs], MU_SUB, rtol=1e-14)
    assert 0 < pairs[0].mu < math.pi / 2
    assert abs(pairs[0].residual(PRESETS["sub"][0])) <= 1e-12
    assert abs(characteristic_residual(pairs[1].mu, PRESETS["sub"][0])) < 1e-12


@pytest.mark.parametrize("case,oracle", [("crit", MU_CRIT), ("super", MU_SUPER)])
def test_trig_branch_starts_at_one(case, oracle):
    pairs = positive_eigenvalues(PRESETS[case][0], 3)
    assert [p.n for p in pairs] == [1, 2, 3]
    for p, mu in zip(pairs, oracle):
        assert p.mu == pytest.approx(mu, rel=1e-14)
        assert p.n * math.pi < p.mu < p.n * math.pi + math.pi / 2


def test_root_100_against_asymptotic_law():
    p = PRESETS["sub"][0]
    mu = positive_eigenvalues(p, 100)[-1]
    assert mu.mu == pytest.approx(MU_SUB_100, rel=1e-15)
    assert abs(mu.mu - (100 * math.pi + 3.0 / (100 * math.pi))) <= 1e-4


def test_negative_ratio_uses_wide_bracket():
    p = WentzellParams(1.0, -2.0, 1.0)
    for pair in positive_eigenvalues(p, 20):
        assert pair.n * math.pi < pair.mu < pair.n * math.pi + math.pi
        assert abs(pair.residual(p)) <= 1e-12


def test_bracket_failure_on_mislabelled_regime():
    from wentzell.spectral import _trig_root
    # for b/d > 1 the n = 0 interval holds no root
    with pytest.raises(BracketFailure):
        _trig_root(0, math.pi / 2, PRESETS["super"][0])


def test_nonpositive_eigenvalue_per_regime():
    assert nonpositive_eigenvalue(PRESETS["sub"][0]) is None
    lin = nonpositive_eigenvalue(PRESETS["crit"][0])
    assert lin.kind is Kind.LINEAR and lin.lam == 0.0 and lin.n == 0
    hyp = nonpositive_eigenvalue(PRESETS["super"][0])
    assert hyp.kind is Kind.HYPERBOLIC
    assert hyp.mu == pytest.approx(MU_SUPER_HYP, rel=1e-14)
    assert hyp.lam == pytest.approx(-MU_SUPER_HYP**2, rel=1e-14)
    assert abs((3 - hyp.mu**2) * math.sinh(hyp.mu) - hyp.mu * math.cosh(hyp.mu)) <= 1e-12
    assert abs(hyperbolic_residual(hyp.mu, PRESETS["super"][0])) <= 1e-12


def test_eigenfunction_values():
    trig = Eigenpair(1, Kind.TRIG, math.pi / 2, math.pi**2 / 4, 1.0)
    assert eigenfunction_eval(trig, 1.0) == pytest.approx(1.0)
    lin = nonpositive_eigenvalue(PRESETS["crit"][0])
    assert eigenfunction_eval(lin, 0.7) == pytest.approx(0.7)
    for pair in spectrum(PRESETS["super"][0], 4) + spectrum(PRESETS["crit"][0], 2):
        assert eigenfunction_eval(pair, 0.0) == 0.0


def test_norm_closed_forms():
    lin = nonpositive_eigenvalue(PRESETS["crit"][0])
    assert lin.norm_H == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-15)
    zero_sin = Eigenpair(1, Kind.TRIG, math.pi, math.pi**2, 1.0, base=1, offset=0.0)
    assert norm_H(zero_sin, PRESETS["sub"][0]) == pytest.approx(math.sqrt(0.5))
    p = PRESETS["sub"][0]
    mu1 = positive_eigenvalues(p, 1)[1]
    quad, _ = integrate.quad(lambda x: math.sin(mu1.mu * x) ** 2, 0, 1, epsabs=1e-14)
    assert mu1.norm_H == pytest.approx(math.sqrt(quad + math.sin(mu1.mu) ** 2 / 3.0), abs=1e-10)


@pytest.mark.parametrize("case", list(PRESETS))
def test_low_modes_orthonormal(case):
    params = PRESETS[case][0]
    pairs = spectrum(params, 5)
    for i, p in enumerate(pairs):
        for q in pairs[i:]:
            assert abs(inner_H_exact(p, q, params) - (p.n == q.n)) <= 1e-10


@pytest.mark.parametrize("case", list(PRESETS))
def test_single_nonpositive_eigenvalue_count(case):
    params = PRESETS[case][0]
    lams = [p.lam for p in spectrum(params, 30)]
    assert np.all(np.diff(lams) > 0)
    assert sum(l <= 0 for l in lams) == (0 if params.ratio < 1 else 1)


def test_expand_recovers_single_mode():
    params = PRESETS["super"][0]
    pairs = spectrum(params, 5)
    grid = Grid(400)
    c = expand(normalized_state(pairs[2], grid), pairs, params)
    expected = np.eye(5)[2]
    assert np.allclose(c.coeffs, expected, atol=1e-5)


def test_expand_zero_state():
    params = PRESETS["sub"][0]
    c = expand(State.zeros(Grid(50)), spectrum(params, 4), params)
    assert np.all(c.coeffs == 0.0)


def test_expand_reconstructs_initial_datum():
    params = PRESETS["sub"][0]
    U0 = sine_state(400)
    c = expand(U0, spectrum(params, 10), params)
    recon = synthesize(c, c.coeffs, U0.grid)
    diff = recon.values - U0.values
    w = U0.grid.trapezoid_weights()
    rel = math.sqrt(np.sum(w * diff**2) + params.weight * diff[-1] ** 2) / c.h_norm()
    assert rel <= 1e-3


def test_expand_rejects_coarse_grid():
    params = PRESETS["sub"][0]
    with pytest.raises(GridTooCoarse):
        expand(sine_state(10), spectrum(params, 8), params)


def test_spectral_coeffs_validation():
    params = PRESETS["sub"][0]
    pairs = spectrum(params, 3)
    with pytest.raises(ValueError):
        SpectralCoeffs(params, 1.0, tuple(reversed(pairs)), np.zeros(3))
    with pytest.raises(ValueError):
        SpectralCoeffs(params, 1.0, tuple(pairs), np.array([0.0, np.nan, 0.0]))


def test_spectral_solution_endpoints():
    params = PRESETS["sub"][0]
    pairs = spectrum(params, 6)
    grid = Grid(200)
    c = expand(sine_state(200), pairs, params)
    at0 = spectral_solution(c, 0.0, grid=grid)
    assert np.allclose(at0.values, synthesize(c, c.coeffs, grid).values)
    atT = spectral_solution(c, 1.0, Direction.ADJOINT_BACKWARD, grid=grid)
    assert np.allclose(atT.values, at0.values)
    one = SpectralCoeffs(params, 1.0, (pairs[0],), np.array([0.7]))
    end = spectral_solution(one, 1.0, grid=grid)
    expect = 0.7 * math.exp(-pairs[0].lam) * normalized_state(pairs[0], grid).values
    assert np.allclose(end.values, expect, rtol=1e-14)
    with pytest.raises(ValueError):
        spectral_solution(c, 1.5)


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(0.0, 0.5), t2=st.floats(0.0, 0.5))
def test_semigroup_property(t1, t2):
    params = PRESETS["super"][0]
    pairs = spectrum(params, 8)
    c = SpectralCoeffs(params, 1.0, tuple(pairs), np.linspace(1.0, -0.5, 8))
    mid = SpectralCoeffs(params, 1.0, tuple(pairs), evolve(c, t1))
    assert np.allclose(evolve(mid, t2), evolve(c, t1 + t2), rtol=1e-10, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.1, 5.0), b=st.floats(-5.0, 5.0), d=st.floats(0.1, 5.0))
def test_roots_in_brackets_with_small_residual(a, b, d):
    params = WentzellParams(a, b, d)
    width = math.pi if params.ratio < 0 else math.pi / 2
    pairs = spectrum(params, 25)
    for p in pairs:
        if p.kind is Kind.TRIG:
            assert p.n * math.pi < p.mu < p.n * math.pi + width
            assert abs(p.residual(params)) <= 1e-12 * max(1.0, params.weight * p.mu**2)
    assert all(x.lam < y.lam for x, y in zip(pairs, pairs[1:]))


def test_boundary_value_uses_offset():
    params = PRESETS["sub"][0]
    p = positive_eigenvalues(params, 50)[-1]
    assert boundary_value(p) == pytest.approx(math.sin(p.mu), abs=1e-12)
