import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmladder import DomainError, ModelParams, Variant, build_matrix, load_params, validate_params


def test_constants_reference_set(base_params):
    assert base_params.alpha == pytest.approx(1.35e-4, rel=1e-14)
    assert base_params.eta == pytest.approx(0.3256783558, rel=1e-9)
    assert base_params.base_offset == pytest.approx(3.2789822822990873, rel=1e-15)
    assert base_params.dim == 61


@given(
    A=st.floats(0.01, 10),
    k=st.floats(0.01, 5),
    gamma=st.floats(1e-5, 1.0),
)
@settings(max_examples=60, deadline=None)
def test_eta_matches_high_precision(A, k, gamma):
    p = ModelParams(sigma=1.0, A=A, k=k, gamma=gamma, T=1.0, Q=2)
    with mpmath.workdps(40):
        ref = mpmath.mpf(A) * (1 + mpmath.mpf(gamma) / k) ** (-(1 + mpmath.mpf(k) / gamma))
    assert p.eta == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize(
    "change, field",
    [
        ({"sigma": 0.0}, "sigma"),
        ({"A": -1.0}, "A"),
        ({"k": 0.0}, "k"),
        ({"gamma": -0.1}, "gamma"),
        ({"T": 0.0}, "T"),
        ({"Q": 0}, "Q"),
        ({"Q": 2.5}, "Q"),
        ({"xi": -0.1}, "xi"),
        ({"sigma": float("nan")}, "sigma"),
        ({"mu": float("inf")}, "mu"),
    ],
)
def test_domain_errors_name_field(base_params, change, field):
    with pytest.raises(DomainError) as err:
        base_params.replace(**change)
    assert err.value.field == field


def test_validate_params_rejects_unknown_and_missing():
    with pytest.raises(DomainError):
        validate_params({"sigma": 0.3, "A": 0.9, "k": 0.3, "gamma": 0.01, "T": 600, "Q": 30, "rho": 1})
    with pytest.raises(DomainError):
        validate_params({"sigma": 0.3, "A": 0.9})


def test_load_params_roundtrip(tmp_path, base_params):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(base_params.to_dict()))
    assert load_params(path) == base_params


def test_base_matrix_entries(base_params):
    m = build_matrix(base_params)
    q = base_params.inventories()
    np.testing.assert_array_equal(m.diag, base_params.alpha * q**2)
    np.testing.assert_array_equal(m.offdiag, -base_params.eta)
    np.testing.assert_array_equal(m.terminal, 1.0)
    dense = m.dense()
    np.testing.assert_array_equal(dense, dense.T)


def test_drift_and_impact_matrices(base_params):
    p = base_params.replace(mu=0.002, xi=0.4)
    q = p.inventories()
    d = build_matrix(p, Variant.DRIFT)
    np.testing.assert_allclose(d.diag, p.alpha * q**2 - p.beta * q, rtol=0, atol=1e-15)
    i = build_matrix(p, "impact")
    np.testing.assert_allclose(i.offdiag, -p.eta * math.exp(-p.k * p.xi / 2), rtol=1e-15)
    np.testing.assert_allclose(i.terminal, np.exp(-0.5 * p.k * p.xi * q**2), rtol=1e-15)


def test_variants_reduce_to_base_when_neutral(base_params):
    base = build_matrix(base_params)
    for v in ("drift", "impact"):
        m = build_matrix(base_params, v)
        np.testing.assert_array_equal(m.diag, base.diag)
        np.testing.assert_array_equal(m.offdiag, base.offdiag)
        np.testing.assert_array_equal(m.terminal, base.terminal)


@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_matvec_matches_dense(vals):
    p = ModelParams(sigma=0.5, A=1.0, k=0.5, gamma=0.05, T=10.0, Q=4, mu=0.01)
    m = build_matrix(p, "drift")
    v = np.array(vals)
    np.testing.assert_allclose(m.matvec(v), m.dense() @ v, rtol=1e-12, atol=1e-12)
