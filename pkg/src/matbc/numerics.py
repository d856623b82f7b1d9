"""Special functions and 2x2 linear algebra used throughout the package.

Everything here is pure and reentrant.  The exponential integral is the
workhorse of all closed-form pairwise-error-probability bounds, so it is
implemented to full double precision rather than delegated; the 2x2
eigenvalue routines are explicit closed forms (no iterative solver is
ever needed at this fixed size).
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209008240243

# Series/continued-fraction crossover for Ei.  The alternating power series
# loses ~|x| digits of the result to cancellation for negative arguments, so
# the switch sits well below the point where 1e-12 relative accuracy would be
# compromised; the continued fraction is fully converged for |x| >= 1.
_EI_SWITCH = 2.0
_CF_MAX_ITER = 400
_CF_TINY = 1e-300


def _e1_scaled_cf(z):
    """exp(z)*E1(z) for z > 0 by modified Lentz continued fraction."""
    b = z + 1.0
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = an * d + b
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + an / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("continued fraction for E1 did not converge")


def _ei_series(x):
    """Ei(x) by the power series gamma + log|x| + sum x^i/(i*i!)."""
    terms = [EULER_GAMMA, math.log(abs(x))]
    t = 1.0
    i = 1
    while i < 400:
        t *= x / i
        term = t / i
        terms.append(term)
        if abs(term) < 1e-18:
            break
        i += 1
    return math.fsum(terms)


def exp_integral_ei(x):
    """Exponential integral Ei(x) for real nonzero x.

    Hybrid evaluation: power series for |x| < 2, continued fraction for the
    (scaled) E1 otherwise.  Relative accuracy is better than 1e-12 over the
    range exercised by the bound formulas, x in [-50, -1e-8].

    Raises
    ------
    ValueError
        If x == 0 (logarithmic singularity).
    """
    if x == 0.0:
        raise ValueError("Ei is singular at x = 0")
    if not math.isfinite(x):
        raise ValueError("Ei requires a finite argument")
    if abs(x) < _EI_SWITCH:
        return _ei_series(x)
    if x < 0.0:
        z = -x
        return -math.exp(-z) * _e1_scaled_cf(z)
    # Positive arguments only arise in sanity checks; the series is
    # cancellation-free there and converges for any x below overflow.
    return _ei_series(x)


def ei_exp_scaled(x):
    """exp(-x)*Ei(x) for x < 0, safe for arbitrarily large |x|.

    The bound formulas only ever need the product e^{1/b} Ei(-1/b); for
    b -> 0+ the separate factors overflow/underflow while the product stays
    finite, so it is computed jointly.
    """
    if x >= 0.0:
        raise ValueError("scaled Ei is defined here for x < 0 only")
    z = -x
    if z >= _EI_SWITCH:
        return -_e1_scaled_cf(z)
    return math.exp(z) * _ei_series(x)


def eig_herm2(m):
    """Eigenvalues of a 2x2 Hermitian matrix, descending.

    Closed form from trace and determinant; satisfies the trace and
    determinant identities to machine precision.
    """
    m = np.asarray(m)
    a = m[0, 0].real
    d = m[1, 1].real
    half_diff = 0.5 * (a - d)
    rad = math.hypot(half_diff, abs(m[0, 1]))
    mean = 0.5 * (a + d)
    return mean + rad, mean - rad


def eig_general2(m):
    """Eigenvalues of a general 2x2 complex matrix, by the quadratic formula.

    Roots are sorted by descending real part.  For products of PSD matrices
    (the only non-Hermitian case used here) the eigenvalues are real and
    nonnegative; imaginary parts below 1e-10 are clamped to zero.
    """
    m = np.asarray(m)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = np.sqrt(complex(tr * tr - 4.0 * det))
    r1 = 0.5 * (tr + disc)
    r2 = 0.5 * (tr - disc)
    if r2.real > r1.real:
        r1, r2 = r2, r1
    scale = max(1.0, abs(r1))
    if abs(r1.imag) <= 1e-10 * scale:
        r1 = complex(r1.real, 0.0)
    if abs(r2.imag) <= 1e-10 * scale:
        r2 = complex(r2.real, 0.0)
    return r1, r2


def is_hermitian(m, tol=1e-12):
    m = np.asarray(m)
    return bool(np.all(np.abs(m - m.conj().T) <= tol))


def sqrtm_herm2(m):
    """Hermitian square root of a 2x2 PSD Hermitian matrix.

    Uses sqrt(M) = alpha*I + beta*M, the unique PSD solution expressed
    through the eigenvalues; exact up to rounding for this fixed size.
    """
    m = np.asarray(m, dtype=complex)
    lam1, lam2 = eig_herm2(m)
    lam1 = max(lam1, 0.0)
    lam2 = max(lam2, 0.0)
    s1, s2 = math.sqrt(lam1), math.sqrt(lam2)
    if lam1 - lam2 <= 1e-14 * max(1.0, lam1):
        return 0.5 * (s1 + s2) * np.eye(2) + 0.0j * m
    beta = (s1 - s2) / (lam1 - lam2)
    alpha = s1 - beta * lam1
    return alpha * np.eye(2) + beta * m
