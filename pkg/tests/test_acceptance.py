"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with its key numbers; the lines are
printed in the terminal summary (see conftest.py) and also when this file
is run directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
import warnings

import numpy as np
import pytest

from point_scatterer.eisenstein import eisenstein_eval, phi_scatter
from point_scatterer.geometry import Point, reduce_fund_domain
from point_scatterer.greens import eisenstein_product_term, make_handle, s_alpha_orbit, s_alpha_reflected
from point_scatterer.maass import find_small_eigenvalues, load_maass_dataset, s_alpha_critical
from point_scatterer.orbits import enumerate_orbits, stabilizer
from point_scatterer.residues import (
    SyntheticSpectralFunction,
    run_random_suite,
    verify_resonance_lemma,
    verify_truncated_formula,
)
from point_scatterer.special import completed_zeta, kbessel, legendre_q, psi_scaled
from point_scatterer.trace import choose_sigma, geometric_identity_check, trace_report
from point_scatterer.transforms import NuChoice, find_nu, g_transform, make_test_function, smooth_term

from test_eisenstein import coset_sum
from test_orbits import brute_force

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def summary_lines():
    return [f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


# ---------------------------------------------------------------------------


def test_criterion_01_orbits():
    bases = [Point(0, 2), Point(0, 1), reduce_fund_domain(Point(1.7, 1.3))[0]]
    mismatches = 0
    for z in bases:
        for R in (3.0, 6.0):
            table = enumerate_orbits(z, R)
            _, lens = brute_force(z, R)
            if len(table) != lens.size or np.max(np.abs(table.lengths - lens), initial=0) > 1e-12:
                mismatches += 1
    orders = [stabilizer(z)[1] for z in (Point(0, 2), Point(0, 1), Point(0.5, math.sqrt(3) / 2))]
    t0 = time.perf_counter()
    enumerate_orbits(Point(0, 2), 12.0)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and orders == [1, 2, 3] and dt <= 10
    record(1, ok, f"brute-force mismatches {mismatches}, stabilizer orders {orders}, R=12 in {dt:.2f} s")


def test_criterion_02_special_functions():
    q = max(abs(legendre_q(0.0, t) - 0.5 * math.log((math.cosh(t) + 1) / (math.cosh(t) - 1))) for t in np.linspace(0.05, 8.0, 20))
    rng = np.random.default_rng(11)
    lam = 0.0
    done = 0
    while done < 50:
        s = complex(rng.uniform(-3, 4), rng.uniform(-30, 30))
        if abs(s) < 0.1 or abs(s - 1) < 0.1:
            continue
        a, b = completed_zeta(s), completed_zeta(1 - s)
        lam = max(lam, abs(a - b) / abs(a))
        done += 1
    k = max(abs(kbessel(0.5, y) - math.sqrt(math.pi / (2 * y)) * math.exp(-y)) for y in (0.3, 1.0, 4.0))
    record(2, q < 1e-10 and lam < 1e-12 and k < 1e-12, f"Q0 {q:.1e}, Lambda FE (relative) {lam:.1e}, K_1/2 {k:.1e}")


def test_criterion_03_eisenstein():
    rng = np.random.default_rng(5)
    fe, n = 0.0, 0
    while n < 20:
        z = Point(rng.uniform(-2, 2), rng.uniform(0.3, 3))
        s = complex(rng.uniform(0.0, 1.5), rng.uniform(-20, 20))
        if min(abs(s - 1), abs(s), abs(s - 0.5)) < 0.05:
            continue
        a = eisenstein_eval(z, s, 1e-11).value
        b = phi_scatter(s) * eisenstein_eval(z, 1 - s, 1e-11).value
        fe = max(fe, abs(a - b) / max(1.0, abs(a)))
        n += 1
    pts = [(Point(0.1, 1.2), 3.0), (Point(-0.3, 0.9), 2.5 + 0.5j), (Point(0.45, 1.6), 4.0 - 1j), (Point(0, 2), 3.5 + 2j), (Point(1.7, 0.4), 5.0 + 10j)]
    agree = 0.0
    for z, s in pts:
        # Re s >= 2.5 keeps the direct coset sum convergent at cut 1500
        direct, tail = coset_sum(z, complex(s), 1500.0)
        four = eisenstein_eval(z, s, 1e-13).value
        agree = max(agree, max(abs(direct - four) - tail, 0.0) / max(1.0, abs(four)))
    agree_pts = len(pts)
    phi1 = abs(phi_scatter(0.8 + 5j) * phi_scatter(0.2 - 5j) - 1)
    phi2 = abs(phi_scatter(0.5) + 1)
    ok = fe < 1e-8 and agree < 1e-8 and phi1 < 1e-10 and phi2 < 1e-8
    record(3, ok, f"FE {fe:.1e}, sum vs Fourier {agree:.1e} on {agree_pts} points, phi(s)phi(1-s) {phi1:.1e}, phi(1/2)+1 {phi2:.1e}")


@pytest.fixture(scope="module")
def dataset():
    return load_maass_dataset()


@pytest.fixture(scope="module")
def handle(dataset):
    return make_handle(Point(0, 2), 1.0, enumerate_orbits(Point(0, 2), 10.0), dataset=dataset)


def test_criterion_04_spectral_consistency(handle, dataset):
    s = 1.4 + 3j
    back = s_alpha_reflected(handle, s) + eisenstein_product_term(handle.config.z0, s)
    fe = abs(back - s_alpha_orbit(handle, s)[0])
    overlap = max(abs(handle.evaluate(x)[0] - s_alpha_critical(handle, -1j * (x - 0.5), dataset).value) for x in (1.15, 1.25, 1.35))
    crit = handle.with_mode("spectral-expansion")
    excess = 0.0
    for r in (3.0, 5.0, 9.0):
        cv = s_alpha_critical(crit, r, dataset)
        e = eisenstein_eval(crit.config.z0, 0.5 + 1j * r).value
        excess = max(excess, abs(cv.value.imag - abs(e) ** 2 / (4 * r)) - cv.error)
    ok = fe < 1e-8 and overlap < 1e-3 and excess <= 1e-10
    record(4, ok, f"double reflection {fe:.1e}, overlap {overlap:.1e}, Im identity excess over estimate {excess:.1e}")


def test_criterion_05_critical_line_bounds(handle, dataset):
    crit = handle.with_mode("spectral-expansion")
    r_tab = np.array([f.r for f in dataset.forms])
    violations = 0
    for r in np.linspace(0.1, 29.0, 50):
        while np.min(np.abs(r_tab - r)) < 0.06:
            r += 0.07
        S = s_alpha_critical(crit, r, dataset).value
        if not (-1e-12 <= math.atan2(S.imag, S.real) <= math.pi + 1e-12):
            violations += 1
        if abs(np.log(s_alpha_critical(crit, -r, dataset).value / S)) > 2 * math.pi:
            violations += 1
    record(5, violations == 0, f"{violations} violations on 50 samples")


def test_criterion_06_residue_engine():
    h = make_test_function(1.0)
    reps = run_random_suite(h, seed=0, count=100)
    worst = max(r.residual for r in reps)
    windings = all(r.parts["winding_tracked"] == r.parts["winding_expected"] for r in reps)
    lemma = verify_resonance_lemma(
        SyntheticSpectralFunction(
            zeros=((1.3 + 0.4j, 1), (-0.7 + 0.2j, 1), (-0.9j, 1)),
            poles=((2.1 + 0.5j, 1), (-0.5j, 1), (-1.7 + 0.3j, 2)),
            exp_coeffs=(0.1, 0.2j, 0.05),
        ),
        h,
        1.5,
        4.0,
    )
    trunc = [
        verify_truncated_formula(
            SyntheticSpectralFunction(
                zeros=((2.0, 1), (-2.0, 1), (-0.8j, 1), (0.5 + 0.6j, 1)),
                poles=((2.5, 1), (-2.5, 1), (-0.5j, 1), (0.0, order)),
                exp_coeffs=(0.3, 0.0, 0.02),
            ),
            h,
            1.2,
            5.0,
        )
        for order in (1, 2)
    ]
    rule = abs(trunc[1].parts["delta_term"] - trunc[0].parts["delta_term"] + 0.5 * h(0.0).real)
    res = max(worst, lemma.residual, *(t.residual for t in trunc))
    ok = res < 1e-8 and windings and rule < 1e-14
    record(6, ok, f"max residual {res:.1e} (random {worst:.1e}), windings consistent {windings}, double-pole rule {rule:.1e}")


def test_criterion_07_geometric_identity(handle, dataset):
    h = make_test_function(1.0)
    sigma = choose_sigma(handle).sigma
    chk = geometric_identity_check(h, handle, sigma)
    h12 = make_handle(Point(0, 2), 1.0, enumerate_orbits(Point(0, 2), 12.0))
    s12 = choose_sigma(h12).sigma
    seq = [geometric_identity_check(h, h12, s12, K=K, L=L).residual for K, L in ((4, 8.0), (5, 10.0), (6, 12.0))]
    k1 = chk.diffractive.k1_two_route_residual
    ok = chk.residual < 1e-4 and seq[0] > seq[1] > seq[2] and k1 < 1e-6
    record(7, ok, f"sigma {sigma}, residual {chk.residual:.2e}, (K,L) sequence {', '.join(f'{v:.1e}' for v in seq)}, k=1 two-route {k1:.1e}")


def test_criterion_08_transforms():
    h = make_test_function(1.0)
    beta, sigma = 4.0, 2.0
    first = find_nu(beta, 1, sigma)
    second = NuChoice(first.nu + 0.1, first.zero_location)
    g = max(abs(g_transform(beta, k, 2.0, h, first) - g_transform(beta, k, 2.0, h, second)) for k in (1, 2, 3))
    sm = abs(smooth_term(h, beta, 1, first) - smooth_term(h, beta, 1, second))
    nu_err = max(abs(find_nu(-1.0 / (m * psi_scaled(0.8).real), m, sigma).zero_location - 0.3) for m in (1, 2, 3))
    zero = smooth_term(h, 0.0, 1, NuChoice(0.0))
    ok = g < 1e-8 and sm < 1e-8 and nu_err < 1e-10 and zero == 0.0
    record(8, ok, f"g contour shift {g:.1e}, smooth contour shift {sm:.1e}, planted nu {nu_err:.1e}, smooth(beta=0) = {zero}")


def test_criterion_09_small_eigenvalues(handle):
    syn = handle.with_mode("synthetic", synthetic=lambda s: (s - 0.5 - 1.3) * (2.0 + s * s))
    planted = find_small_eigenvalues(syn, (0.6, 5.0), grid=97)
    err = abs(planted[0].v - 1.3) if len(planted) == 1 else math.inf
    live = find_small_eigenvalues(handle, (0.6, 5.0))
    good = bool(live)
    for root in live:
        a, b = root.bracket
        fa, fb = handle.evaluate(0.5 + a)[0].real, handle.evaluate(0.5 + b)[0].real
        good &= abs(handle.evaluate(root.s)[0]) < 1e-10 and a < root.v < b and fa * fb < 0
    record(9, err < 1e-10 and good, f"planted error {err:.1e}, live roots {[round(r.v, 6) for r in live]} verified {good}")


def test_criterion_10_trace_report(handle, dataset):
    h = make_test_function(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = trace_report(h, handle, dataset)
    shape = dataset.r_max <= 30 and min(len(f.coeffs) for f in dataset.forms) >= 50
    ok = shape and rep.within_budget and rep.relative_budget <= 5e-2
    record(
        10,
        ok,
        f"|LHS-RHS| {rep.residual:.2e} vs budget {rep.budget:.2e} (relative {rep.relative_budget:.1e}); dataset-quality-limited",
    )


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
