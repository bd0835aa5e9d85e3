import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from point_scatterer.eisenstein import EisensteinToleranceError, eisenstein_eval, phi_scatter
from point_scatterer.geometry import Point, mobius_apply, GroupElement
from point_scatterer.special import PoleError, completed_zeta


def coset_sum(z: Point, s: complex, cut: float):
    """Direct sum of Im(g z)^s over coprime (c, d) with |cz + d| <= cut, plus a tail bound.

    The lattice Z + zZ has covolume y; with delta its cell diameter the count
    of points in a disk of radius r is at most pi (r + delta)^2 / y, and
    summation by parts bounds the dropped part.
    """
    x, y = z.x, z.y
    sig = s.real
    total = 0j
    cmax = int(cut / y) + 1
    for c in range(0, cmax + 1):
        lo = int(math.floor(-c * x - cut)) - 1
        hi = int(math.ceil(-c * x + cut)) + 1
        d = np.arange(lo, hi + 1)
        if c == 0:
            d = np.array([1])
        else:
            d = d[np.gcd(d, c) == 1]
        w = np.abs(c * z.z + d)
        w = w[w <= cut]
        total += np.sum(np.exp(-2 * s * np.log(w)))
    total *= y**s
    delta = abs(1 + z.z)
    # int_cut^inf 2 sig r^{-2 sig - 1} pi (r + delta)^2 / y dr, halved for +-(c, d)
    a = 2 * sig
    integral = (
        cut ** (2 - a) / (a - 2) + 2 * delta * cut ** (1 - a) / (a - 1) + delta**2 * cut ** (-a) / a
    )
    tail = y**sig * 0.5 * 2 * sig * math.pi / y * integral
    return total, tail


# ---------------------------------------------------------------- phi


def test_phi_functional_equation():
    s = complex(0.8, 5.0)
    assert abs(phi_scatter(s) * phi_scatter(1 - s) - 1) < 1e-10


def test_phi_at_half_is_minus_one():
    assert abs(phi_scatter(0.5) + 1) < 1e-8


def test_phi_at_two():
    assert abs(phi_scatter(2.0) - completed_zeta(3.0) / completed_zeta(4.0)) < 1e-13


def test_phi_residue_at_one():
    # residue 1/vol = 3/pi
    for eps in (1e-5, -1e-5, 1e-5j):
        assert abs(eps * phi_scatter(1 + eps) - 3 / math.pi) < 1e-4
    with pytest.raises(PoleError):
        phi_scatter(1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.5, 2.5), st.floats(-40, 40))
def test_phi_reflection_property(a, b):
    s = complex(a, b)
    if abs(s - 1) < 0.05 or abs(s) < 0.05:
        return
    prod = phi_scatter(s) * phi_scatter(1 - s)
    assert abs(prod - 1) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-40, 40))
def test_phi_unimodular_on_critical_line(r):
    assert abs(abs(phi_scatter(0.5 + 1j * r)) - 1) < 1e-11


# ---------------------------------------------------------------- E(z, s)


def test_functional_equation_example():
    z, s, tol = Point(0.2, 1.1), complex(0.7, 3.0), 1e-12
    lhs = eisenstein_eval(z, s, tol).value
    rhs = phi_scatter(s) * eisenstein_eval(z, 1 - s, tol).value
    assert abs(lhs - rhs) < 2 * tol * max(1.0, abs(lhs))


def test_cusp_asymptotics():
    v = eisenstein_eval(Point(0, 10), 2.0).value
    assert abs(v - (100 + phi_scatter(2.0) * 0.1)) < 1e-12


def test_real_for_real_s():
    v = eisenstein_eval(Point(0, 2), 1.5).value
    assert abs(v.imag) < 1e-12


def test_functional_equation_twenty_random_points():
    rng = np.random.default_rng(5)
    tol = 1e-11
    for _ in range(20):
        z = Point(rng.uniform(-2, 2), rng.uniform(0.3, 3))
        s = complex(rng.uniform(0.0, 1.5), rng.uniform(-20, 20))
        if abs(s - 1) < 0.05 or abs(s) < 0.05 or abs(s - 0.5) < 0.05:
            continue
        a = eisenstein_eval(z, s, tol).value
        b = phi_scatter(s) * eisenstein_eval(z, 1 - s, tol).value
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


@pytest.mark.parametrize(
    "z, s",
    [
        (Point(0.1, 1.2), 3.0),
        (Point(-0.3, 0.9), complex(2.5, 0.5)),
        (Point(0.45, 1.6), complex(4.0, -1.0)),
        (Point(0.0, 2.0), complex(3.5, 2.0)),
        (Point(1.7, 0.4), complex(5.0, 10.0)),
    ],
)
def test_defining_sum_agrees_with_fourier(z, s):
    direct, tail = coset_sum(z, complex(s), cut=1500.0)
    four = eisenstein_eval(z, s, 1e-13)
    assert tail < 1e-8
    assert abs(direct - four.value) < max(1e-8, tail) * max(1.0, abs(four.value))


def test_invariance_under_group():
    z = Point(0.23, 0.8)
    g = GroupElement(2, 1, 5, 3)
    s = complex(0.6, 7.0)
    a = eisenstein_eval(z, s).value
    b = eisenstein_eval(mobius_apply(g, z), s).value
    assert abs(a - b) < 1e-10 * max(1, abs(a))


def test_residue_at_one():
    z = Point(0.1, 1.3)
    eps = 1e-6
    assert abs(eps * eisenstein_eval(z, 1 + eps).value - 3 / math.pi) < 1e-5
    with pytest.raises(PoleError):
        eisenstein_eval(z, 1.0)


def test_tail_bound_reported_below_tolerance():
    v = eisenstein_eval(Point(0, 1.0), complex(0.5, 20.0), 1e-10)
    assert v.tail_bound <= 1e-10
    assert v.truncation_n >= 1


def test_unreachable_tolerance():
    with pytest.raises(EisensteinToleranceError) as info:
        eisenstein_eval(Point(0, 1.0), complex(0.5, 2000.0), 1e-10)
    assert info.value.achieved > 1e-14


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.9, 4.0), st.floats(0.0, 1.5), st.floats(-20, 20))
def test_conjugation_symmetry(x, y, a, b):
    s = complex(a, b)
    if abs(s - 1) < 0.05:
        return
    z = Point(x, y)
    u = eisenstein_eval(z, s.conjugate()).value
    v = eisenstein_eval(z, s).value.conjugate()
    assert abs(u - v) < 1e-10 * max(1.0, abs(v))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.9, 4.0), st.floats(0.05, 1.45), st.floats(-20, 20))
def test_functional_equation_property(x, y, a, b):
    s = complex(a, b)
    if abs(s - 1) < 0.05 or abs(s) < 0.05 or abs(s - 0.5) < 0.02:
        return
    z = Point(x, y)
    tol = 1e-11
    lhs = eisenstein_eval(z, s, tol).value
    rhs = phi_scatter(s) * eisenstein_eval(z, 1 - s, tol).value
    assert abs(lhs - rhs) < 10 * tol * max(1.0, abs(lhs), abs(phi_scatter(s)) * abs(rhs))
