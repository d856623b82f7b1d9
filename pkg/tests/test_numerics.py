import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import expi

from matbc.numerics import (EULER_GAMMA, ei_exp_scaled, eig_general2, eig_herm2,
                            exp_integral_ei, is_hermitian, sqrtm_herm2)


def ei_quadrature(x):
    """Independent oracle: Ei(-z) = -int_z^inf e^-u/u du for x = -z < 0."""
    assert x < 0
    val, err = integrate.quad(lambda u: math.exp(-u) / u, -x, np.inf,
                              epsabs=1e-15, epsrel=1e-13, limit=300)
    assert err < 1e-13 * max(val, 1e-30)
    return -val


def test_ei_negative_one_matches_quadrature():
    # frozen from the quadrature oracle
    assert exp_integral_ei(-1.0) == pytest.approx(-0.2193839343955203, rel=1e-12)
    assert exp_integral_ei(-1.0) == pytest.approx(ei_quadrature(-1.0), rel=1e-12)


def test_ei_small_argument_taylor_leading_terms():
    x = -1e-6
    assert abs(exp_integral_ei(x) - (EULER_GAMMA + math.log(abs(x)))) <= 1.1e-6


def test_ei_minus_ten_continued_fraction_value():
    # frozen from an independent continued-fraction reference evaluation
    assert exp_integral_ei(-10.0) == pytest.approx(-4.156968929685324e-06, abs=1e-11)


def test_ei_accuracy_across_contract_range():
    xs = -np.logspace(math.log10(1e-8), math.log10(50.0), 300)
    for x in xs:
        assert exp_integral_ei(float(x)) == pytest.approx(expi(x), rel=1e-12)


def test_ei_branch_overlap_band():
    # both branches must agree where they meet
    from matbc.numerics import _e1_scaled_cf, _ei_series
    for z in np.linspace(1.2, 3.0, 40):
        series = _ei_series(-z)
        cf = -math.exp(-z) * _e1_scaled_cf(z)
        assert series == pytest.approx(cf, rel=1e-12)


def test_ei_zero_raises():
    with pytest.raises(ValueError):
        exp_integral_ei(0.0)


def test_ei_monotone_and_negative_on_negative_axis():
    # Ei' (x) = e^x/x < 0 on the negative axis, so Ei decreases toward 0-
    xs = -np.logspace(-8, math.log10(50.0), 200)[::-1]  # ascending
    vals = [exp_integral_ei(float(x)) for x in xs]
    assert all(v < 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_ei_derivative_identity():
    # d/dx Ei(x) = e^x / x by central difference
    for x in (-0.5, -1.0, -3.0, -8.0, -20.0):
        h = 1e-5 * abs(x)
        fd = (exp_integral_ei(x + h) - exp_integral_ei(x - h)) / (2 * h)
        assert fd == pytest.approx(math.exp(x) / x, rel=1e-6)


def test_ei_exp_scaled_matches_product_and_survives_tiny_b():
    for b in (0.5, 1.0, 7.0, 100.0):
        x = -1.0 / b
        assert ei_exp_scaled(x) == pytest.approx(math.exp(-x) * expi(x), rel=1e-12)
    # far below the underflow point of exp(1/b) * Ei(-1/b) separately
    v = ei_exp_scaled(-1e5)
    assert v == pytest.approx(-1e-5, rel=1e-3)


def test_eig_herm2_basic():
    assert eig_herm2(np.eye(2)) == (1.0, 1.0)
    assert eig_herm2(np.diag([2.0, 0.0])) == (2.0, 0.0)
    t = 0.5 * np.exp(1j * np.pi / 3)
    r = np.array([[1.0, np.conj(t)], [t, 1.0]])
    lam = eig_herm2(r)
    assert lam[0] == pytest.approx(1.5, rel=1e-12)
    assert lam[1] == pytest.approx(0.5, rel=1e-12)


def test_eig_herm2_trace_det_identities_random():
    rng = np.random.default_rng(1234)
    for _ in range(10_000):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        m = a + a.conj().T
        lam1, lam2 = eig_herm2(m)
        tr = m[0, 0].real + m[1, 1].real
        det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
        scale = max(1.0, abs(tr))
        assert lam1 >= lam2
        assert abs(lam1 + lam2 - tr) <= 1e-12 * scale
        assert abs(lam1 * lam2 - det) <= 1e-12 * max(1.0, abs(det), scale ** 2)


def test_eig_general2_trivial_and_rank1():
    v1, v2 = eig_general2(np.diag([3.0, 1.0]))
    assert (v1, v2) == (3.0 + 0j, 1.0 + 0j)
    # |t| = 1 degenerate covariance (rank 1) times identity error matrix
    r = np.array([[1.0, 1.0], [1.0, 1.0]])
    v1, v2 = eig_general2(r @ np.eye(2))
    assert v1 == pytest.approx(2.0)
    assert v2 == pytest.approx(0.0)


def test_eig_general2_matches_char_poly_oracle():
    rng = np.random.default_rng(77)
    for _ in range(500):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        p1 = a @ a.conj().T
        p2 = b @ b.conj().T
        m = p1 @ p2
        v1, v2 = eig_general2(m)
        # oracle: numpy roots of the characteristic polynomial
        tr = m[0, 0] + m[1, 1]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        roots = sorted(np.roots([1.0, -tr, det]), key=lambda z: -z.real)
        scale = max(1.0, abs(roots[0]))
        assert abs(v1 - roots[0]) <= 1e-10 * scale
        assert abs(v2 - roots[1]) <= 1e-10 * scale
        assert v1.imag == 0.0 and v2.imag == 0.0  # PSD*PSD: clamped real


def test_sqrtm_herm2_squares_back():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        m = a @ a.conj().T
        s = sqrtm_herm2(m)
        assert is_hermitian(s, tol=1e-12)
        assert np.max(np.abs(s @ s - m)) <= 1e-12 * max(1.0, np.max(np.abs(m)))
