import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscobeam.material import (
    PronyMaterial, creep_factor, creep_factor_integral, kernel, kernel_bound, sls_material,
    relaxation_modulus, shear_modulus,
)

M = sls_material()


def test_relaxation_endpoints():
    assert relaxation_modulus(M, 0.0) == pytest.approx(9.8e7, rel=1e-15)
    assert relaxation_modulus(M, 1e4) == pytest.approx(9.8e7 * 2.44e7 / (9.8e7 + 2.44e7), rel=1e-12)
    assert M.E_inf == pytest.approx(1.95359e7, rel=1e-5)
    assert relaxation_modulus(PronyMaterial(5.0, 5.0, 3.0), 0.0) == 5.0


def test_shear_modulus():
    assert shear_modulus(M, 0.0) == pytest.approx(9.8e7 / 2.7, rel=1e-14)
    assert shear_modulus(PronyMaterial(9.8e7, 2.44e7, 2.74e8, nu=0.0), 3.0) == pytest.approx(
        relaxation_modulus(M, 3.0) / 2, rel=1e-14)
    assert shear_modulus(M, 1e4) == pytest.approx(M.E_inf / 2.7, rel=1e-12)


def test_kernel_values():
    assert M.tau == pytest.approx(2.23856, rel=1e-5)
    assert kernel(M, 1.0, 1.0) == pytest.approx(-(M.k1 - M.E_inf) / (M.tau * M.k1), rel=1e-14)
    # (9.8e7 - 1.95359e7) / (2.23856 * 9.8e7)
    assert kernel(M, 2.0, 2.0) == pytest.approx(-0.357664, rel=1e-5)
    assert kernel(M, 10 * M.tau, 0.0) / kernel(M, 0.0, 0.0) == pytest.approx(np.exp(-10), rel=1e-12)
    assert kernel_bound(M) == pytest.approx(0.357664, rel=1e-5)
    assert kernel_bound(M.as_elastic()) == 0.0
    # k2 -> inf with tau held fixed; with eta fixed the bound is k1 / eta
    assert kernel_bound(PronyMaterial(1.0, 1e12, 2.0 * (1.0 + 1e12))) < 1e-11
    assert kernel_bound(PronyMaterial(1.0, 1e12, 2.0)) == pytest.approx(0.5, rel=1e-10)


def test_kernel_domain():
    with pytest.raises(ValueError):
        kernel(M, 1.0, 2.0)
    with pytest.raises(ValueError):
        relaxation_modulus(M, -1.0)


@pytest.mark.parametrize("kw", [dict(k1=0, k2=1, eta=1), dict(k1=1, k2=-1, eta=1), dict(k1=1, k2=1, eta=1, nu=0.5)])
def test_invalid_material(kw):
    with pytest.raises(ValueError):
        PronyMaterial(**kw)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 20))
def test_kernel_properties(a, b, c):
    t, s = max(a, b), min(a, b)
    assert abs(kernel(M, t, s)) <= kernel_bound(M) * (1 + 1e-15)
    assert kernel(M, t + c, s + c) == pytest.approx(kernel(M, t, s), rel=1e-9, abs=1e-300)
    assert relaxation_modulus(M, s) >= relaxation_modulus(M, t)
    assert relaxation_modulus(M, t) >= M.E_inf


def test_creep_factor_solves_volterra():
    # phi(t) = 1 + int_0^t k(t-s) phi(s) ds, checked with a fine quadrature
    t = 3.0
    s = np.linspace(0, t, 20001)
    integrand = kernel(M, t, s) * creep_factor(M, s)
    assert creep_factor(M, t) == pytest.approx(1 + np.trapezoid(integrand, s), rel=1e-8)
    ts = np.linspace(0, 7, 70001)
    assert creep_factor_integral(M, 7.0) == pytest.approx(np.trapezoid(creep_factor(M, ts), ts), rel=1e-9)
    assert creep_factor(M.as_elastic(), 5.0) == 1.0


def test_dict_roundtrip():
    m = PronyMaterial(1.0, 2.0, 3.0, 0.3, extra_terms=((0.5, 2.0),))
    assert PronyMaterial.from_dict(m.to_dict()) == m
    assert m.E0 == 1.5
