import dataclasses
import math
import warnings

import numpy as np
import pytest

from point_scatterer.greens import make_handle
from point_scatterer.trace import (
    SigmaLadderError,
    TraceParams,
    choose_sigma,
    diffractive_side,
    direct_diffractive_term,
    expansion_ratio,
    geometric_identity_check,
    log_derivative_side,
    trace_report,
)
from point_scatterer.transforms import find_nu, make_test_function


@pytest.fixture(scope="module")
def sigma(handle):
    return choose_sigma(handle).sigma


@pytest.fixture(scope="module")
def geo(handle, gaussian, sigma):
    return geometric_identity_check(gaussian, handle, sigma)


@pytest.fixture(scope="module")
def report(handle, gaussian, dataset):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return trace_report(gaussian, handle, dataset)


# ---------------------------------------------------------------- sigma


def test_sigma_for_vanishing_coupling(handle):
    # beta = 0 is the decoupled limit; the line Re s = 3/2 is always admissible
    assert choose_sigma(dataclasses.replace(handle, beta=0.0)).sigma == 1.0


def test_sigma_margin(handle):
    choice = choose_sigma(handle)
    assert choice.sigma == 2.0
    assert choice.margin <= 0.9
    # every rejected rung really failed
    assert all(q > 0.9 for _, q in choice.tested[:-1])


def test_expansion_ratio_decreases_with_sigma(handle):
    qs = [expansion_ratio(handle.beta, handle.m, handle.spectrum, s) for s in (1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(qs, qs[1:]))


def test_sigma_ladder_exhausted(handle):
    with pytest.raises(SigmaLadderError) as exc:
        choose_sigma(handle, ladder=(1.0,))
    assert exc.value.ratio > 0.9


def test_sigma_needs_orbits(handle):
    bare = dataclasses.replace(handle, mode="synthetic", spectrum=None, synthetic=lambda s: 1.0)
    with pytest.raises(ValueError):
        choose_sigma(bare)


# ---------------------------------------------------------------- log-derivative route


def test_log_side_nearly_uncoupled(z0, table10, gaussian):
    tiny = make_handle(z0, 1e-8, table10)
    res = log_derivative_side(gaussian, tiny, 1.0)
    # log S ~ -log beta + beta(m psi + G): the integral is O(beta)
    assert abs(res.value) < 1e-7


def test_log_side_is_real(handle, gaussian, sigma):
    res = log_derivative_side(gaussian, handle, sigma)
    assert abs(res.imag) < 1e-9
    assert res.error < 1e-6


def test_log_side_independent_of_line(handle, gaussian, sigma):
    a = log_derivative_side(gaussian, handle, sigma)
    b = log_derivative_side(gaussian, handle, sigma + 0.5)
    assert abs(a.value - b.value) < 1e-7


def test_log_side_rejects_line_left_of_one(handle, gaussian):
    with pytest.raises(ValueError):
        log_derivative_side(gaussian, handle, 0.4)


# ---------------------------------------------------------------- diffractive route


def test_diffractive_vanishes_without_coupling(handle, gaussian):
    res = diffractive_side(gaussian, dataclasses.replace(handle, beta=0.0), 1.0)
    assert res.total == 0.0 and all(v == 0.0 for v in res.terms.values())


def test_k1_two_routes_agree(geo):
    assert geo.diffractive.k1_two_route_residual < 1e-6


def test_k2_line_matches_time_domain(handle, gaussian, sigma):
    L = 4.0
    res = diffractive_side(gaussian, handle, sigma, K=2, L=L)
    spec = handle.spectrum.restricted(L)
    nu = find_nu(handle.beta, handle.m, sigma)
    direct, err = direct_diffractive_term(gaussian, handle.beta, handle.m, nu, 2, spec.lengths, spec.multiplicities)
    assert abs(res.terms[2] - direct) < max(1e-8, 10 * err)


def test_k2_pair_sum_symmetric(handle, gaussian, sigma):
    spec = handle.spectrum.restricted(4.0)
    nu = find_nu(handle.beta, handle.m, sigma)
    a, _ = direct_diffractive_term(gaussian, handle.beta, handle.m, nu, 2, spec.lengths, spec.multiplicities)
    b, _ = direct_diffractive_term(gaussian, handle.beta, handle.m, nu, 2, spec.lengths[::-1], spec.multiplicities[::-1])
    assert abs(a - b) < 1e-12 * max(1.0, abs(a))


def test_direct_route_rejects_k3(handle, gaussian, sigma):
    nu = find_nu(handle.beta, handle.m, sigma)
    with pytest.raises(ValueError):
        direct_diffractive_term(gaussian, handle.beta, handle.m, nu, 3, np.array([2.0]), np.array([1.0]))


def test_diffractive_rejects_L_beyond_table(handle, gaussian, sigma):
    with pytest.raises(ValueError):
        diffractive_side(gaussian, handle, sigma, L=11.0)


def test_series_terms_decay(geo):
    t = geo.diffractive.terms
    assert abs(t[6]) < abs(t[2])


# ---------------------------------------------------------------- geometric identity


def test_geometric_identity_within_budget(geo):
    assert geo.residual < max(1e-4, geo.budget)
    assert geo.within_budget


def test_geometric_identity_improves_with_truncation(handle12, gaussian):
    s = choose_sigma(handle12).sigma
    res = [geometric_identity_check(gaussian, handle12, s, K=K, L=L).residual for K, L in ((4, 8.0), (5, 10.0), (6, 12.0))]
    assert res[0] > res[1] > res[2]


def test_geometric_check_serializes(geo):
    d = geo.to_dict()
    assert d["budget_is_estimate"] is True
    assert set(d["diffractive_side"]["terms"]) == {str(k) for k in range(1, 7)}


# ---------------------------------------------------------------- full report


def test_report_within_budget(report):
    assert report.within_budget
    assert report.relative_budget <= 5e-2


def test_report_includes_residual_eigenvalue(report, gaussian):
    assert report.lhs_contributions["unperturbed"]["residual h(i/2)"] == pytest.approx(gaussian(0.5j).real)


def test_report_has_no_zero_eigenvalue(report, dataset):
    assert all(f.r > 0 for f in dataset.forms)
    assert not any("r=0.0000000000" in k for k in report.lhs_contributions["unperturbed"])


def test_report_small_eigenvalue(report):
    (v,) = report.truncation["small_eigenvalue_v"]
    assert v == pytest.approx(1.1036, abs=1e-4)


def test_report_totals_are_sums(report):
    rhs = report.smooth_term + report.delta_term + report.scattering_term + sum(report.diffractive_sums.values())
    assert report.rhs == pytest.approx(rhs, abs=1e-15)
    pert = sum(report.lhs_contributions["perturbed"].values())
    unpert = sum(report.lhs_contributions["unperturbed"].values())
    assert report.lhs == pytest.approx(pert - unpert, abs=1e-12)
    assert report.budget == pytest.approx(sum(report.errors.values()))


def test_report_marks_estimates(report):
    assert set(report.estimated) == set(report.errors)
    d = report.to_dict()
    assert d["dataset_quality_limited"] is True
    assert d["within_budget"] is True


def test_delta_override_is_noted(handle, gaussian, dataset, report):
    forced = trace_report(gaussian, handle, dataset, TraceParams(delta_gamma=1))
    assert any("overrides" in w for w in forced.warnings)
    assert forced.delta_term - report.delta_term == pytest.approx(0.5 * gaussian(0.0).real * (1 - report.truncation["delta_gamma"]))


def test_report_without_dataset(z0, table10, gaussian):
    bare = make_handle(z0, 1.0, table10)
    rep = trace_report(gaussian, bare, None)
    assert rep.lhs is None and rep.rhs is None and rep.residual is None
    d = rep.to_dict()
    assert d["lhs"] == "unavailable" and d["rhs"] == "unavailable"
    assert math.isfinite(rep.smooth_term)
    assert rep.diffractive_sums
