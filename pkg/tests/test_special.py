import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from point_scatterer.special import (
    DomainError,
    PoleError,
    completed_zeta,
    divisor_sigma,
    divisor_sigma_table,
    kbessel,
    legendre_q,
    legendre_q_series,
    psi_scaled,
)

EULER_GAMMA = 0.57721566490153286060651209
TWO_PI = 2 * math.pi

# mpmath oracle values, 30 digits
Q_NU_08_06_T2 = complex(0.00712307389175701084, -0.03700748445967152977)
PSI_07_03 = complex(-0.15466541846245168030, 0.11957522788895473259)
K_I95_3 = 1.01264535214480078265e-7
K_I20_5 = -8.26465680342379790359e-15
K_03_12I_25 = complex(-3.2517471335356145859e-9, 1.98675909344745861871e-9)
LAMBDA_3 = 0.19131329801558517113
LAMBDA_4 = 0.10966227112321509576

cplx = st.complex_numbers(min_magnitude=0.0, max_magnitude=8.0, allow_nan=False, allow_infinity=False)


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------- psi


def test_psi_examples():
    assert psi_scaled(1.0) == pytest.approx(-EULER_GAMMA / TWO_PI, abs=1e-15)
    s = complex(0.7, 0.3)
    assert abs(psi_scaled(s + 1) - psi_scaled(s) - 1 / (TWO_PI * s)) < 1e-14
    assert rel(psi_scaled(s), PSI_07_03) < 1e-12


def test_psi_pole_and_order():
    with pytest.raises(PoleError):
        psi_scaled(0.0)
    with pytest.raises(PoleError):
        psi_scaled(-3.0)
    with pytest.raises(ValueError):
        psi_scaled(1.0, order=2)


@pytest.mark.parametrize("s", [0.3 + 0.1j, 2.5 - 7j, -3.4 + 0.2j, 12 + 40j, 0.5 + 100j])
def test_psi_against_mpmath(s):
    assert rel(psi_scaled(s), complex(mp.digamma(s)) / TWO_PI) < 1e-12
    assert rel(psi_scaled(s, 1), complex(mp.psi(1, s)) / TWO_PI) < 1e-12


@settings(max_examples=200, deadline=None)
@given(cplx)
def test_psi_conjugate_symmetry(s):
    if abs(s - round(s.real)) < 1e-3 and s.real <= 0.5:
        return
    a, b = psi_scaled(s.conjugate()), psi_scaled(s).conjugate()
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


# ---------------------------------------------------------------- Legendre Q


def test_q0_closed_form_twenty_points():
    for t in np.linspace(0.05, 8.0, 20):
        c = math.cosh(t)
        closed = 0.5 * math.log((c + 1) / (c - 1))
        assert abs(legendre_q(0.0, t) - closed) < 1e-10 * max(1.0, closed)


def test_q_integral_vs_hypergeometric():
    nu, t = complex(0.8, 0.6), 2.0
    a = legendre_q(nu, t)
    b = legendre_q_series(nu, t)
    assert abs(a - b) < 1e-9
    assert abs(a - Q_NU_08_06_T2) < 1e-12


def test_q_integral_vs_series_grid():
    rng = np.random.default_rng(3)
    for _ in range(20):
        nu = complex(rng.uniform(-0.5, 3), rng.uniform(-15, 15))
        t = rng.uniform(0.2, 6)
        a, b = legendre_q(nu, t), legendre_q_series(nu, t)
        assert abs(a - b) < 1e-9 * max(1.0, abs(b))


def test_q_decreasing_for_large_t():
    vals = [abs(legendre_q(1.3, t)) for t in np.linspace(3, 10, 15)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_q_domain_errors():
    with pytest.raises(DomainError):
        legendre_q(0.5, 0.0)
    with pytest.raises(DomainError):
        legendre_q(-1.5, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 4), st.floats(-10, 10), st.floats(0.3, 5))
def test_q_conjugate_symmetry(a, b, t):
    nu = complex(a, b)
    x, y = legendre_q_series(nu.conjugate(), t), legendre_q_series(nu, t).conjugate()
    assert abs(x - y) <= 1e-12 * max(1e-30, abs(y))


# ---------------------------------------------------------------- completed zeta


def test_lambda_examples():
    assert completed_zeta(2.0) == pytest.approx(math.pi / 6, rel=1e-13)
    assert rel(completed_zeta(3.0), LAMBDA_3) < 1e-12
    assert rel(completed_zeta(4.0), LAMBDA_4) < 1e-12
    s = complex(0.3, 2.0)
    assert abs(completed_zeta(s) - completed_zeta(1 - s)) < 1e-12 * abs(completed_zeta(s))
    with pytest.raises(PoleError):
        completed_zeta(1.0)
    with pytest.raises(PoleError):
        completed_zeta(0.0)


def test_lambda_functional_equation_fifty_points():
    rng = np.random.default_rng(11)
    done = 0
    while done < 50:
        s = complex(rng.uniform(-3, 4), rng.uniform(-30, 30))
        if abs(s) < 0.1 or abs(s - 1) < 0.1:
            continue
        a, b = completed_zeta(s), completed_zeta(1 - s)
        assert abs(a - b) < 1e-12 * max(abs(a), 1e-300)
        done += 1


@pytest.mark.parametrize("s", [0.5 + 14.0j, 2.3 - 5j, -2.5 + 1j, 0.7 + 60j, 1.5 + 99j])
def test_lambda_against_mpmath(s):
    ref = complex(mp.pi ** (-mp.mpc(s) / 2) * mp.gamma(mp.mpc(s) / 2) * mp.zeta(s))
    assert abs(completed_zeta(s) - ref) <= 1e-12 * max(abs(ref), 1e-30) + 1e-300


def test_lambda_near_first_zero_absolute():
    # relative error is meaningless at a zero; compare against the local scale
    s = 0.5 + 14.134725j
    ref = complex(mp.pi ** (-mp.mpc(s) / 2) * mp.gamma(mp.mpc(s) / 2) * mp.zeta(s))
    scale = abs(completed_zeta(0.5 + 13.5j))
    assert abs(completed_zeta(s) - ref) < 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 4), st.floats(-40, 40))
def test_lambda_conjugate_symmetry(a, b):
    s = complex(a, b)
    if abs(s) < 0.1 or abs(s - 1) < 0.1:
        return
    x, y = completed_zeta(s.conjugate()), completed_zeta(s).conjugate()
    assert abs(x - y) <= 1e-12 * abs(y)


# ---------------------------------------------------------------- K-Bessel


def test_kbessel_half_order_closed_form():
    assert abs(kbessel(0.5, 1.0) - math.sqrt(math.pi / 2) * math.exp(-1)) < 1e-12 * 0.5


def test_kbessel_imaginary_order_real():
    v = kbessel(9.5j, 3.0)
    assert abs(v.imag) <= 1e-12 * abs(v)
    assert rel(v, K_I95_3) < 1e-12
    assert rel(kbessel(20j, 5.0), K_I20_5) < 1e-10
    assert rel(kbessel(complex(0.3, 12), 2.5), K_03_12I_25) < 1e-12


@pytest.mark.parametrize("r", [0.0, 1.0, 9.53, 17.7, 29.5])
@pytest.mark.parametrize("y", [0.1, 1.0, 7.0, 40.0, 150.0])
def test_kbessel_against_mpmath(r, y):
    ref = complex(mp.besselk(1j * r, y))
    val = kbessel(1j * r, y)
    # absolute floor: for r >> y the value is exp(-pi r/2)-small and oscillating
    scale = abs(ref) + math.exp(-math.pi * r / 2) * 1e-3
    assert abs(val - ref) <= 1e-12 * max(scale, 1e-300) + 1e-300


def test_kbessel_decay_justifies_truncation():
    for r in (1.0, 10.0, 30.0):
        for ny in (10.0, 12.0):
            assert abs(kbessel(1j * r, TWO_PI * ny)) < 1e-16 * math.sqrt(ny) * 10


def test_kbessel_domain():
    with pytest.raises(DomainError):
        kbessel(0.5, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.floats(0, 40), st.floats(0.1, 50))
def test_kbessel_conjugate_symmetry(a, b, y):
    nu = complex(a, b)
    x, z = kbessel(nu.conjugate(), y), kbessel(nu, y).conjugate()
    assert abs(x - z) <= 1e-12 * max(abs(z), 1e-300)


# ---------------------------------------------------------------- divisor sums


def test_divisor_examples():
    assert divisor_sigma(0.7 + 2j, 1) == 1
    assert divisor_sigma(0, 6) == 4
    assert divisor_sigma(-1, 4) == pytest.approx(1 + 0.5 + 0.25)
    with pytest.raises(DomainError):
        divisor_sigma(0, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.floats(-2, 2))
def test_divisor_table_matches_direct(n, a):
    direct = sum(d**a for d in range(1, n + 1) if n % d == 0)
    assert divisor_sigma(a, n) == pytest.approx(direct, rel=1e-13)
    assert divisor_sigma_table(a, n)[n - 1] == pytest.approx(direct, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.floats(-1.5, 1.5))
def test_divisor_multiplicative(m, n, a):
    if math.gcd(m, n) != 1:
        return
    assert divisor_sigma(a, m * n) == pytest.approx(divisor_sigma(a, m) * divisor_sigma(a, n), rel=1e-12)
