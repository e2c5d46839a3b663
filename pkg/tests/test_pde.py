import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PRESETS, sine_state
from wentzell.errors import ShapeMismatch, SingularSystem
from wentzell.pde import (MethodOfLines, discretization, dual_pairing, duality_check,
                          duality_terms, elliptic_residual, inner_H, norm_H, norm_Hminus1,
                          solve_adjoint, solve_elliptic, solve_forward)
from wentzell.spectral import WentzellParams, expand, normalized_state, spectral_solution, spectrum
from wentzell.state import Control, Grid, State


def _oracle(params, n_modes=40):
    return expand(sine_state(4000), spectrum(params, n_modes), params)


def _rel_err(state, exact, params):
    return norm_H(state - exact, params) / norm_H(exact, params)


def test_grid_and_state_validation():
    with pytest.raises(ValueError):
        Grid(3)
    with pytest.raises(ShapeMismatch):
        State(Grid(10), np.zeros(10))
    with pytest.raises(ValueError):
        State(Grid(4), np.array([0, 1, np.inf, 0, 0.0]))
    with pytest.raises(ShapeMismatch):
        State.zeros(Grid(4)) + State.zeros(Grid(5))


def test_control_validation_and_resample():
    with pytest.raises(ShapeMismatch):
        Control(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    f = Control.from_function(lambda t: t, 1.0, 10)
    g = f.resample(40)
    assert np.allclose(g.samples, g.times)
    assert f.l2_norm() == pytest.approx(math.sqrt(1 / 3), rel=1e-2)


def test_zero_data_gives_zero_trajectory():
    params = PRESETS["sub"][0]
    tr = solve_forward(State.zeros(Grid(20)), Control.zeros(1.0, 200), params)
    assert np.all(tr.states == 0.0)
    adj = solve_adjoint(State.zeros(Grid(20)), params, 200)
    assert np.all(adj.states == 0.0) and np.all(adj.flux0 == 0.0)


def test_forward_shape_checks():
    params = PRESETS["sub"][0]
    mol = discretization(params, 20, 1.0, 200)
    with pytest.raises(ShapeMismatch):
        mol.forward(np.zeros(21), np.zeros(100))
    with pytest.raises(ShapeMismatch):
        mol.adjoint(np.zeros(30))
    shifted = Control(np.linspace(0.5, 1.5, 11), np.zeros(11))
    with pytest.raises(ShapeMismatch):
        solve_forward(State.zeros(Grid(20)), shifted, params)
    f = Control.zeros(1.0, 100)
    tr = solve_forward(State.zeros(Grid(20)), f, params, 400)
    assert tr.states.shape == (401, 21)


@pytest.mark.parametrize("case", list(PRESETS))
def test_forward_matches_spectral_oracle(case):
    params = PRESETS[case][0]
    tr = solve_forward(sine_state(200), Control.zeros(1.0, 2000), params)
    exact = spectral_solution(_oracle(params), 1.0, grid=Grid(200))
    assert _rel_err(tr.terminal, exact, params) <= 1e-2


def test_single_mode_decay():
    params = PRESETS["sub"][0]
    z0 = normalized_state(spectrum(params, 1)[0], Grid(200))
    tr = solve_forward(z0, Control.zeros(1.0, 2000), params)
    ratio = norm_H(tr.terminal, params) / norm_H(z0, params)
    assert ratio == pytest.approx(math.exp(-spectrum(params, 1)[0].lam), rel=1e-2)


def test_spatial_order_is_two():
    params = PRESETS["sub"][0]
    oracle = _oracle(params)
    errs = []
    for n_x in (50, 100, 200, 400):
        tr = solve_forward(sine_state(n_x), Control.zeros(1.0, 10 * n_x), params)
        errs.append(_rel_err(tr.terminal, spectral_solution(oracle, 1.0, grid=Grid(n_x)), params))
    slope = np.polyfit(np.log([50, 100, 200, 400]), np.log(errs), 1)[0]
    assert abs(-slope - 2.0) <= 0.3


@pytest.mark.parametrize("closure,bound", [("three_point", 1e-3), ("paper", 5e-2)])
def test_alternative_closures_converge(closure, bound):
    params = PRESETS["sub"][0]
    tr = solve_forward(sine_state(200), Control.zeros(1.0, 2000), params, closure=closure)
    exact = spectral_solution(_oracle(params), 1.0, grid=Grid(200))
    assert _rel_err(tr.terminal, exact, params) <= bound


def test_implicit_euler_first_order_in_time():
    params = PRESETS["sub"][0]
    exact = spectral_solution(_oracle(params), 1.0, grid=Grid(100))
    errs = [_rel_err(solve_forward(sine_state(100), Control.zeros(1.0, n), params, theta=1.0).terminal,
                     exact, params) for n in (50, 100, 200)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 1.0) < 0.2)


def test_adjoint_single_mode():
    params = PRESETS["sub"][0]
    grid = Grid(200)
    pair = spectrum(params, 1)[0]
    z = normalized_state(pair, grid)
    adj = solve_adjoint(z, params, 2000, trace="one_sided")
    decay = np.exp(-pair.lam * (1.0 - adj.times))
    assert _rel_err(adj.initial, z * decay[0], params) <= 1e-2
    expected = pair.flux0 / pair.norm_H * decay
    assert np.max(np.abs(adj.flux0 - expected) / np.abs(expected)) <= 2e-2


def test_adjoint_flux_higher_mode():
    # the slow mode leaks in at O(dx^2), so compare against the sup norm
    params = PRESETS["super"][0]
    pair = spectrum(params, 3)[2]
    adj = solve_adjoint(normalized_state(pair, Grid(200)), params, 2000, trace="one_sided")
    expected = pair.flux0 / pair.norm_H * np.exp(-pair.lam * (1.0 - adj.times))
    assert np.max(np.abs(adj.flux0 - expected)) <= 2e-2 * np.max(np.abs(expected))


def test_consistent_trace_close_to_one_sided():
    params = PRESETS["crit"][0]
    pair = spectrum(params, 2)[1]
    z = normalized_state(pair, Grid(200))
    a = solve_adjoint(z, params, 2000, trace="consistent").flux0
    b = solve_adjoint(z, params, 2000, trace="one_sided").flux0
    assert np.max(np.abs(a - b)) <= 1e-2 * np.max(np.abs(b))


def test_elliptic_zero_and_eigenfunction():
    params = PRESETS["sub"][0]
    grid = Grid(200)
    assert np.all(solve_elliptic(State.zeros(grid), 0.0, params).values == 0.0)
    for pair in spectrum(params, 3):
        z = normalized_state(pair, grid)
        g = solve_elliptic(z * (pair.lam + 0.0), 0.0, params)
        assert _rel_err(g, z, params) <= 1e-2


def test_elliptic_residual_small():
    params = PRESETS["super"][0]
    rng = np.random.default_rng(3)
    rhs = State(Grid(100), rng.normal(size=101))
    g = solve_elliptic(rhs, 0.0, params)
    assert elliptic_residual(g, rhs, 0.0, params) <= 1e-12


def test_elliptic_singular_at_eigenvalue():
    params = PRESETS["crit"][0]
    # the discrete zero mode is exact for the linear eigenfunction
    with pytest.raises(SingularSystem):
        solve_elliptic(sine_state(50), 0.0, params)


def test_inner_products():
    params = PRESETS["super"][0]
    grid = Grid(400)
    assert inner_H(State.zeros(grid), State.zeros(grid), params) == 0.0
    zs = [normalized_state(p, grid) for p in spectrum(params, 3)]
    assert inner_H(zs[0], zs[0], params) == pytest.approx(1.0, abs=1e-4)
    assert abs(inner_H(zs[0], zs[2], params)) <= 1e-4
    with pytest.raises(ShapeMismatch):
        inner_H(zs[0], State.zeros(Grid(20)), params)


def test_norm_hminus1():
    params = PRESETS["sub"][0]
    grid = Grid(400)
    assert norm_Hminus1(State.zeros(grid), 0.0, params) == 0.0
    for pair in spectrum(params, 3):
        z = normalized_state(pair, grid)
        assert norm_Hminus1(z, 0.0, params) == pytest.approx(1 / math.sqrt(pair.lam), rel=2e-2)
        assert norm_Hminus1(z * -3.0, 0.0, params) == pytest.approx(3 * norm_Hminus1(z, 0.0, params))


def test_norm_hminus1_rejects_indefinite_shift():
    params = PRESETS["super"][0]
    z0 = normalized_state(spectrum(params, 1)[0], Grid(100))
    assert dual_pairing(z0, 0.0, params) < 0
    with pytest.raises(ValueError):
        norm_Hminus1(z0, 0.0, params)


def test_duality_examples():
    params = PRESETS["sub"][0]
    grid = Grid(200)
    pairs = spectrum(params, 2)
    z = normalized_state(pairs[0], grid)
    assert duality_check(z, Control.zeros(1.0, 2000), z, params) <= 1e-3
    ramp = Control.from_function(lambda t: t, 1.0, 2000)
    assert duality_check(State.zeros(grid), ramp, State.zeros(grid), params) == 0.0
    defects = [duality_check(sine_state(n), Control.from_function(lambda t: t, 1.0, 10 * n),
                             normalized_state(pairs[1], Grid(n)), params) for n in (50, 100, 200)]
    assert defects[-1] <= 1e-3
    assert defects[0] > defects[1] > defects[2]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), case=st.sampled_from(list(PRESETS)),
       theta=st.sampled_from([0.5, 0.75, 1.0]))
def test_consistent_trace_makes_duality_exact(seed, case, theta):
    params = PRESETS[case][0]
    rng = np.random.default_rng(seed)
    grid = Grid(30)
    U0 = State(grid, rng.normal(size=31))
    VT = State(grid, np.concatenate(([0.0], rng.normal(size=30))))
    f = Control(np.linspace(0, 1, 201), rng.normal(size=201))
    lhs, rhs = duality_terms(U0, f, VT, params, trace="consistent", theta=theta)
    assert abs(lhs - rhs) <= 1e-11 * (1 + abs(lhs))


@settings(max_examples=20, deadline=None)
@given(b=st.floats(-3.0, 0.0), d=st.floats(0.2, 3.0), a=st.floats(0.1, 3.0),
       seed=st.integers(0, 1000))
def test_discrete_maximum_principle(a, b, d, seed):
    params = WentzellParams(a, b, d)
    rng = np.random.default_rng(seed)
    grid = Grid(20)
    U0 = State(grid, rng.uniform(0, 1, size=21))
    tr = solve_forward(U0, Control.zeros(1.0, 100), params, theta=1.0)
    assert tr.states.min() >= -1e-12


@settings(max_examples=20, deadline=None)
@given(ratio=st.floats(-2.0, 0.95), seed=st.integers(0, 1000))
def test_energy_decay_subcritical(ratio, seed):
    params = WentzellParams(1.0, ratio, 1.0)
    rng = np.random.default_rng(seed)
    grid = Grid(24)
    U0 = State(grid, np.concatenate(([0.0], rng.normal(size=24))))
    tr = solve_forward(U0, Control.zeros(1.0, 120), params)
    norms = [norm_H(tr.state(k), params) for k in range(tr.times.size)]
    assert np.all(np.diff(norms) <= 1e-12)


def test_elliptic_left_inverse_on_smooth_state():
    params = PRESETS["sub"][0]
    mol = MethodOfLines(params, 200, 1.0, 1)
    g_exact = State.from_function(Grid(200), lambda x: x * np.cos(x))
    rhs_w = mol.apply_K(g_exact.values[1:])
    g = mol.elliptic_operator_rhs(rhs_w, 0.0)
    assert np.allclose(g, g_exact.values, atol=1e-12)
