import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmladder import DomainError, ModelParams, build_matrix, decompose, integrate_ode_oracle, value_ladder
from mmladder.ode import TOL_EIG


def test_three_by_three_against_characteristic_polynomial():
    p = ModelParams(sigma=0.5, A=1.0, k=0.5, gamma=0.1, T=10.0, Q=1)
    m = build_matrix(p)
    a, e = p.alpha, p.eta
    # det(M - x I) = (a - x)^2 (-x) - 2 e^2 (a - x), roots x = a and x^2 - a x - 2 e^2 = 0
    disc = math.sqrt(a * a + 8 * e * e)
    expected = sorted([a, (a - disc) / 2, (a + disc) / 2])
    dec = decompose(m)
    np.testing.assert_allclose(dec.eigenvalues, expected, rtol=1e-13)
    np.testing.assert_allclose(np.abs(dec.f0), np.abs(dec.f0[::-1]), rtol=1e-13)


def test_ground_state_properties(base_params):
    m = build_matrix(base_params)
    dec = decompose(m)
    f0 = dec.f0
    assert np.all(f0 > 0)
    assert dec.gap > 0
    resid = np.abs(m.matvec(f0) - dec.lambda0 * f0).max()
    assert resid <= TOL_EIG * m.norm_inf()
    np.testing.assert_allclose(f0, f0[::-1], rtol=1e-9)


def test_spectral_matches_rk4_small(small):
    m = build_matrix(small)
    grid = integrate_ode_oracle(m, step=1e-3, n_points=11)
    spectral = value_ladder(m).values(grid.times)
    np.testing.assert_allclose(spectral, grid.values, rtol=1e-10)


def test_propagator_equals_loop(small):
    m = build_matrix(small, "drift")
    a = integrate_ode_oracle(m, step=0.05, n_points=7, method="propagator")
    b = integrate_ode_oracle(m, step=0.05, n_points=7, method="loop")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12)


def test_rk4_is_fourth_order():
    p = ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=20.0, Q=3)
    m = build_matrix(p)
    exact = value_ladder(m).values(0.0)
    errs = []
    for h in (0.2, 0.1, 0.05):
        grid = integrate_ode_oracle(m, step=h, n_points=2)
        errs.append(np.abs(grid.values[0] / exact - 1).max())
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    for r in ratios:
        assert 14 < r < 18


def test_terminal_condition_exact(base_ladder):
    np.testing.assert_array_equal(base_ladder.values(base_ladder.T), 1.0)


def test_transient_matches_high_precision_expm():
    p = ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=100.0, Q=3)
    m = build_matrix(p)
    ladder = value_ladder(m)
    with mpmath.workdps(50):
        M = mpmath.matrix(m.dense().tolist())
        for t in (0.0, 40.0, 99.0):
            E = mpmath.expm(-M * (p.T - t))
            ref = E * mpmath.matrix(m.terminal.tolist())
            got = ladder.log_values(t)
            for i in range(m.dim):
                assert got[i] == pytest.approx(float(mpmath.log(ref[i])), abs=1e-12)


@given(tau=st.floats(0.0, 600.0))
@settings(max_examples=50, deadline=None)
def test_positivity_and_lower_bound(base_ladder, tau):
    p = base_ladder.matrix.params
    t = p.T - tau
    tau = p.T - t
    logs = base_ladder.log_values(t)
    bound = -(p.alpha * p.Q**2 - p.eta) * tau
    # tight at the edges as tau -> 0, so allow roundoff in the logs
    assert np.all(logs >= bound - 1e-12)


@given(t=st.floats(1.0, 599.0))
@settings(max_examples=30, deadline=None)
def test_ode_residual(base_ladder, t):
    h = 1e-3
    m = base_ladder.matrix
    v = base_ladder.values(t)
    dv = (base_ladder.values(t + h) - base_ladder.values(t - h)) / (2 * h)
    np.testing.assert_allclose(dv, m.matvec(v), rtol=1e-6, atol=1e-12 * np.abs(v).max())


def test_time_shift_invariance(base_params):
    a = value_ladder(build_matrix(base_params))
    b = value_ladder(build_matrix(base_params.replace(T=900.0)))
    np.testing.assert_allclose(a.log_values(100.0), b.log_values(400.0), rtol=1e-12)


def test_domain_checks(base_ladder):
    with pytest.raises(DomainError):
        base_ladder.values(-1.0)
    with pytest.raises(DomainError):
        base_ladder.values(601.0)
    with pytest.raises(DomainError):
        integrate_ode_oracle(base_ladder.matrix, step=0.0)
