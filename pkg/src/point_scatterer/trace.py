"""Both sides of the point-scatterer trace formula.

The central object is the line integral

    -(1/2 pi i) int_{Im rho = -sigma} h'(rho) log S(1/2 + i rho) d rho,

computed two ways.  The log-derivative route evaluates S from the orbit sum
and integrates a continuous branch of its logarithm.  The diffractive route
writes S = beta^{-1} D (1 + u) with D = 1 + m beta psi and
u = beta G / D, so the integral splits into the smooth term (the log D part,
moved to the line Im rho = -nu) plus the series sum_k (-1)^{k+1} u^k / k.
The k-th term is a sum over k-tuples of orbit elements.  For k = 1 it is
evaluated in the time domain, as an integral of g_{beta,1} against the
kernel 1/sqrt(cosh t - cosh l) for each length l.  For k >= 2 the k-fold
convolution of that kernel is evaluated by Parseval, as the k-th power of
the truncated orbit sum on the line.

The full report adds the spectral side: small perturbed eigenvalues, the
unperturbed spectrum from a Maass dataset, and the scattering term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .greens import LengthSpectrum, SpectralFunctionHandle, green_sum
from .residues import continuous_log
from .special import psi_scaled
from .transforms import NuChoice, TestFunction, denominator, find_nu, g_transform_table, scattering_term, smooth_term, trapezoid_error, trapezoid_weights

__all__ = [
    "SigmaChoice",
    "SigmaLadderError",
    "LogDerivativeResult",
    "DiffractiveResult",
    "GeometricCheck",
    "TraceParams",
    "TraceReport",
    "expansion_ratio",
    "choose_sigma",
    "log_derivative_side",
    "diffractive_side",
    "direct_diffractive_term",
    "geometric_identity_check",
    "trace_report",
    "SIGMA_LADDER",
    "RATIO_BOUND",
]

SIGMA_LADDER = (1.0, 2.0, 4.0, 8.0, 16.0)
RATIO_BOUND = 0.9


class SigmaLadderError(RuntimeError):
    def __init__(self, message: str, largest: float, ratio: float):
        super().__init__(message)
        self.largest = largest
        self.ratio = ratio


@dataclass
class SigmaChoice:
    sigma: float
    margin: float  # max sampled |u| on the accepted line
    tested: list


def _s_values(beta: float, m: int, spectrum: LengthSpectrum, s: np.ndarray, tail: bool = True):
    g, err = green_sum(s, spectrum, tail=tail)
    return 1.0 / beta + m * psi_scaled(s) + g, err


def expansion_ratio(beta: float, m: int, spectrum: LengthSpectrum, sigma: float, x_max: float = 40.0, samples: int = 401) -> float:
    """max over Im rho = -sigma, 0 <= Re rho <= x_max, of |beta G| / |1 + m beta psi|.

    G includes the counting tail and its error estimate, so the ratio is an
    upper estimate.  Conjugation symmetry covers Re rho < 0.
    """
    if beta == 0:
        return 0.0
    x = np.linspace(0.0, x_max, samples)
    s = 0.5 + sigma + 1j * x
    g, err = green_sum(s, spectrum)
    d = np.abs(1.0 + m * beta * psi_scaled(s))
    return float(np.max(abs(beta) * (np.abs(g) + err) / d))


def choose_sigma(handle: SpectralFunctionHandle, ladder=SIGMA_LADDER, bound: float = RATIO_BOUND, x_max: float = 40.0) -> SigmaChoice:
    """Smallest sigma on the ladder whose line keeps the expansion ratio below ``bound``."""
    if handle.spectrum is None:
        raise ValueError("choose_sigma needs an orbit table")
    tested = []
    for sigma in ladder:
        q = expansion_ratio(handle.beta, handle.m, handle.spectrum, sigma, x_max)
        tested.append((float(sigma), q))
        if q <= bound:
            return SigmaChoice(float(sigma), q, tested)
    raise SigmaLadderError(f"expansion ratio {tested[-1][1]:.3f} > {bound} up to sigma = {ladder[-1]}", tested[-1][0], tested[-1][1])


def _line_nodes(h: TestFunction, sigma: float, d: float, rel_tol: float):
    X = h.cutoff(sigma)
    growth = h.strip_growth(sigma, d)
    step = 2 * math.pi * d / (math.log(1.0 / rel_tol) + 4.0 + growth)
    n = int(math.ceil(X / step))
    n += n % 2
    x = np.linspace(-X, X, 2 * n + 1)
    return (x, *trapezoid_weights(x))


def _strip_halfwidth(sigma: float) -> float:
    # the orbit sum is only used on Re s > 1; the pole of S at s = 1 is at distance sigma - 1/2
    return max(min(0.9 * (sigma - 0.5), 1.0), 1e-3)


@dataclass
class LogDerivativeResult:
    value: float
    imag: float
    error: float
    sigma: float
    nodes: int


def log_derivative_side(h: TestFunction, handle: SpectralFunctionHandle, sigma: float, rel_tol: float = 1e-12) -> LogDerivativeResult:
    """-(1/2 pi i) int h'(rho) log S(1/2 + i rho) d rho on Im rho = -sigma.

    The branch of log S is continued along the line from the principal value
    at Re rho = -X; a constant shift of the branch does not change the result
    because h' integrates to zero.
    """
    if not sigma > 0.5:
        raise ValueError("the line must satisfy Re s = 1/2 + sigma > 1")
    if handle.spectrum is None:
        raise ValueError("log_derivative_side needs an orbit table")
    beta, m, spec = handle.beta, handle.m, handle.spectrum
    d = _strip_halfwidth(sigma)
    x, w, wc, wq = _line_nodes(h, sigma, d, rel_tol)
    rho = x - 1j * sigma
    s = 0.5 + 1j * rho

    def S(r):
        r = np.atleast_1d(np.asarray(r, dtype=complex))
        return _s_values(beta, m, spec, 0.5 + 1j * r)[0]

    vals, errs = _s_values(beta, m, spec, s)
    logs = continuous_log(lambda r: S(r) if np.ndim(r) else S(r)[0], rho)
    hp = h.derivative(rho)
    full, coarse, coarser = (np.sum(v * hp * logs) for v in (w, wc, wq))
    pref = -1.0 / (2j * math.pi)
    val = pref * full
    err = abs(pref) * trapezoid_error(full, coarse, np.sum(w * np.abs(hp * logs)), coarser) + float(np.sum(w * np.abs(hp) * errs / np.abs(vals))) / (2 * math.pi)
    return LogDerivativeResult(float(val.real), float(val.imag), float(err), float(sigma), int(x.size))


# ------------------------------------------------------------ diffractive


def _kernel_weights(lengths: np.ndarray, u: np.ndarray) -> np.ndarray:
    """2u / sqrt(cosh(l + u^2) - cosh l), written to stay accurate as u -> 0."""
    L = lengths[:, None]
    half = 0.5 * u[None, :] ** 2
    return 2.0 * u[None, :] / np.sqrt(2.0 * np.sinh(L + half) * np.sinh(half))


def _g_spline(h: TestFunction, beta: float, m: int, k: int, nu: NuChoice, t_max: float, rel_tol: float, step: float = 0.005):
    ts = np.arange(0.0, t_max + step, step)
    g, gerr = g_transform_table(beta, k, ts, h, nu, m, rel_tol)
    return CubicSpline(ts, g), float(np.max(gerr)), ts


def _g_extent(h: TestFunction, nu: NuChoice, eps: float = 1e-18) -> float:
    # g_{beta,k}(t) inherits the Gaussian decay of the Fourier transform of h'
    a = h.width
    return 2.0 * a * math.sqrt(math.log(1.0 / eps)) + 2.0 * a * a * nu.nu + 2.0


def direct_diffractive_term(
    h: TestFunction,
    beta: float,
    m: int,
    nu: NuChoice,
    k: int,
    lengths: np.ndarray,
    multiplicities: np.ndarray,
    rel_tol: float = 1e-12,
    nodes: int = 64,
) -> tuple[float, float]:
    """k-th diffractive term as iterated time-domain integrals, for k in {1, 2}.

    (-beta / (2 pi sqrt 2))^k times the sum over k-tuples of lengths of
    int ... int g_{beta,k}(t_1 + ... + t_k) prod dt_n / sqrt(cosh t_n - cosh l_n).
    The substitution t = l + u^2 removes the endpoint singularities; the
    error estimate compares two Gauss-Legendre orders.  The k = 2 sum visits
    all ordered pairs and is meant for short length lists.
    """
    if k not in (1, 2):
        raise ValueError("the time-domain route is implemented for k = 1 and k = 2")
    if beta == 0:
        return 0.0, 0.0
    lengths = np.asarray(lengths, dtype=float)
    mult = np.asarray(multiplicities, dtype=float)
    T = _g_extent(h, nu)
    spline, gerr, _ = _g_spline(h, beta, m, k, nu, T + (lengths.max() if k == 2 and lengths.size else 0.0), rel_tol)
    const = (-beta / (2 * math.pi * math.sqrt(2.0))) ** k

    def rule(n):
        gx, gw = np.polynomial.legendre.leggauss(n)
        return gx, gw

    def single(n):
        gx, gw = rule(n)
        out = 0.0
        for lo in range(0, lengths.size, 2048):
            ls = lengths[lo : lo + 2048]
            ms = mult[lo : lo + 2048]
            U = np.sqrt(np.maximum(T - ls, 0.0))
            u = 0.5 * U[:, None] * (gx[None, :] + 1.0)
            wu = 0.5 * U[:, None] * gw[None, :]
            kern = np.where(u > 0, 2.0 * u / np.sqrt(2.0 * np.sinh(ls[:, None] + 0.5 * u * u) * np.sinh(0.5 * u * u)), 0.0)
            vals = spline(ls[:, None] + u * u)
            out += float(np.sum(ms[:, None] * wu * kern * vals))
        return out

    def pair(n):
        gx, gw = rule(n)
        total = 0.0
        Us = np.sqrt(np.maximum(T - lengths, 0.0))
        for i, (l1, m1, U1) in enumerate(zip(lengths, mult, Us)):
            u1 = 0.5 * U1 * (gx + 1.0)
            w1 = 0.5 * U1 * gw * _kernel_weights(np.array([l1]), u1)[0]
            for l2, m2, U2 in zip(lengths, mult, Us):
                u2 = 0.5 * U2 * (gx + 1.0)
                w2 = 0.5 * U2 * gw * _kernel_weights(np.array([l2]), u2)[0]
                t = l1 + l2 + u1[:, None] ** 2 + u2[None, :] ** 2
                total += m1 * m2 * float(w1 @ spline(t) @ w2)
        return total

    f = single if k == 1 else pair
    hi, lo = f(nodes), f(max(nodes * 3 // 4, 8))
    kern_mass = float(np.sum(mult * 2.0 * np.sqrt(np.maximum(T - lengths, 0.0)) / np.sqrt(np.sinh(np.maximum(lengths, 1e-3)))))
    err = abs(const) * (abs(hi - lo) + gerr * kern_mass**k)
    return const * hi, err


@dataclass
class DiffractiveResult:
    total: float
    smooth: float
    terms: dict
    sigma: float
    nu: float
    K: int
    L: float
    k1_line: float
    k1_direct: float
    errors: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return float(sum(self.errors.values()))

    @property
    def k1_two_route_residual(self) -> float:
        return abs(self.k1_line - self.k1_direct)


def diffractive_side(
    h: TestFunction,
    handle: SpectralFunctionHandle,
    sigma: float,
    nu: NuChoice | None = None,
    K: int = 6,
    L: float | None = None,
    rel_tol: float = 1e-12,
) -> DiffractiveResult:
    """Smooth term plus the diffractive series truncated at K tuples and lengths <= L.

    Error entries are estimates: ``k_tail`` bounds the dropped powers by the
    pointwise geometric series, ``l_tail`` propagates the orbit-count tail of
    the full spectrum through the truncated series, and the remaining
    entries are quadrature estimates.
    """
    beta, m = handle.beta, handle.m
    spec = handle.spectrum
    if spec is None:
        raise ValueError("diffractive_side needs an orbit table")
    L = spec.radius if L is None else float(L)
    if L > spec.radius + 1e-12:
        raise ValueError(f"L = {L} exceeds the orbit-table radius {spec.radius}")
    if K < 1:
        raise ValueError("K must be at least 1")
    if beta == 0:
        z = {k: 0.0 for k in range(1, K + 1)}
        return DiffractiveResult(0.0, 0.0, z, sigma, 0.0, K, L, 0.0, 0.0, {"smooth": 0.0, "k_tail": 0.0, "l_tail": 0.0, "quadrature": 0.0})
    nu = nu or find_nu(beta, m, sigma)
    smooth, smooth_err = smooth_term(h, beta, m, nu, rel_tol=rel_tol, return_error=True)

    spec_L = spec.restricted(L)
    d = _strip_halfwidth(sigma)
    x, w, wc, wq = _line_nodes(h, sigma, d, rel_tol)
    rho = x - 1j * sigma
    s = 0.5 + 1j * rho
    D = denominator(rho, beta, m)
    gL, _ = green_sum(s, spec_L, tail=False)
    u = beta * gL / D
    g_full, g_err = green_sum(s, spec)
    delta = np.abs(beta * (g_full - gL) / D) + abs(beta) * g_err / np.abs(D)
    hp = h.derivative(rho)
    terms, quad = {}, 0.0
    uk = np.ones_like(u)
    for k in range(1, K + 1):
        uk = uk * u
        pref = (-1) ** k / (2j * math.pi * k)
        full, coarse, coarser = (pref * np.sum(v * hp * uk) for v in (w, wc, wq))
        terms[k] = float(full.real)
        quad += trapezoid_error(full, coarse, abs(pref) * np.sum(w * np.abs(hp * uk)), coarser)
    k1_line = terms[1]
    k1_direct, k1_err = direct_diffractive_term(h, beta, m, nu, 1, spec_L.lengths, spec_L.multiplicities, rel_tol)
    terms[1] = k1_direct

    au = np.abs(u)
    if np.any(au + delta >= 1):
        raise ValueError("expansion ratio reaches 1 on the line; increase sigma")
    k_tail = float(np.sum(w * np.abs(hp) * au ** (K + 1) / ((K + 1) * (1 - au)))) / (2 * math.pi)
    l_tail = float(np.sum(w * np.abs(hp) * delta / (1 - au - delta))) / (2 * math.pi)
    total = smooth + sum(terms.values())
    errors = {
        "smooth": float(smooth_err),
        "series_quadrature": float(quad),
        "k1_direct": float(k1_err),
        "k_tail": k_tail,
        "l_tail": l_tail,
    }
    return DiffractiveResult(float(total), float(smooth), terms, float(sigma), float(nu.nu), int(K), float(L), float(k1_line), float(k1_direct), errors)


@dataclass
class GeometricCheck:
    log_side: LogDerivativeResult
    diffractive: DiffractiveResult
    residual: float
    budget: float

    @property
    def within_budget(self) -> bool:
        return self.residual <= self.budget

    def to_dict(self) -> dict:
        return {
            "log_derivative_side": asdict(self.log_side),
            "diffractive_side": {
                **{k: v for k, v in asdict(self.diffractive).items() if k != "terms"},
                "terms": {str(k): v for k, v in self.diffractive.terms.items()},
                "k1_two_route_residual": self.diffractive.k1_two_route_residual,
            },
            "residual": self.residual,
            "budget": self.budget,
            "budget_is_estimate": True,
        }


def geometric_identity_check(
    h: TestFunction,
    handle: SpectralFunctionHandle,
    sigma: float | None = None,
    nu: NuChoice | None = None,
    K: int = 6,
    L: float | None = None,
    rel_tol: float = 1e-12,
) -> GeometricCheck:
    """|log-derivative route - diffractive route| against the combined error estimates."""
    sigma = sigma if sigma is not None else choose_sigma(handle).sigma
    log_side = log_derivative_side(h, handle, sigma, rel_tol)
    diff = diffractive_side(h, handle, sigma, nu, K, L, rel_tol)
    residual = abs(log_side.value - diff.total)
    budget = log_side.error + diff.error
    return GeometricCheck(log_side, diff, float(residual), float(budget))


# ------------------------------------------------------------------ report


@dataclass
class TraceParams:
    sigma: float | None = None
    K: int = 6
    L: float | None = None
    delta_gamma: object = "auto"
    rel_tol: float = 1e-12
    eigen_grid: int = 400
    vanishing_tol: float = 1e-24


@dataclass
class TraceReport:
    lhs_perturbed_sum: float | None
    lhs_unperturbed_sum: float | None
    lhs_contributions: dict
    smooth_term: float
    delta_term: float
    scattering_term: float | None
    diffractive_sums: dict
    truncation: dict
    errors: dict
    estimated: dict
    warnings: list
    log_derivative_route: float

    @property
    def lhs(self) -> float | None:
        if self.lhs_perturbed_sum is None:
            return None
        return self.lhs_perturbed_sum - self.lhs_unperturbed_sum

    @property
    def rhs(self) -> float | None:
        if self.scattering_term is None:
            return None
        return self.smooth_term + self.delta_term + self.scattering_term + sum(self.diffractive_sums.values())

    @property
    def residual(self) -> float | None:
        if self.lhs is None or self.rhs is None:
            return None
        return abs(self.lhs - self.rhs)

    @property
    def budget(self) -> float:
        return float(sum(self.errors.values()))

    @property
    def relative_budget(self) -> float | None:
        if self.lhs is None:
            return None
        scale = max(abs(self.lhs), abs(self.rhs or 0.0))
        return self.budget / scale if scale > 0 else math.inf

    @property
    def within_budget(self) -> bool | None:
        if self.residual is None:
            return None
        return self.residual <= self.budget

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs if self.lhs is not None else "unavailable",
            "rhs": self.rhs if self.rhs is not None else "unavailable",
            "residual": self.residual,
            "budget": self.budget,
            "relative_budget": self.relative_budget,
            "within_budget": self.within_budget,
            "lhs_perturbed_sum": self.lhs_perturbed_sum,
            "lhs_unperturbed_sum": self.lhs_unperturbed_sum,
            "lhs_contributions": self.lhs_contributions,
            "smooth_term": self.smooth_term,
            "delta_term": self.delta_term,
            "scattering_term": self.scattering_term,
            "diffractive_sums": {str(k): v for k, v in self.diffractive_sums.items()},
            "log_derivative_route": self.log_derivative_route,
            "truncation": self.truncation,
            "errors": self.errors,
            "estimated": self.estimated,
            "warnings": self.warnings,
            "dataset_quality_limited": True,
        }


def _order_at_half(handle, dataset) -> int:
    """Zero order minus pole order of S at rho = 0, read off from |S| scaling."""
    from .maass import s_alpha_critical

    r1, r2 = 1e-4, 1e-3
    v1 = abs(s_alpha_critical(handle, r1, dataset).value)
    v2 = abs(s_alpha_critical(handle, r2, dataset).value)
    return int(round(math.log(v2 / v1) / math.log(r2 / r1)))


def trace_report(h: TestFunction, handle: SpectralFunctionHandle, dataset=None, params: TraceParams | None = None) -> TraceReport:
    """Assemble both sides of the trace formula at the handle's (alpha, z0).

    Without a dataset the geometric sections are still computed and the
    spectral side is reported as unavailable.
    """
    from .maass import critical_zero_scan, evaluate_s_alpha, find_small_eigenvalues

    params = params or TraceParams()
    dataset = dataset if dataset is not None else handle.dataset
    if dataset is not None and handle.dataset is not dataset:
        handle = handle.with_mode(handle.mode, dataset=dataset)
    notes: list[str] = []
    choice = choose_sigma(handle) if params.sigma is None else None
    sigma = params.sigma if params.sigma is not None else choice.sigma
    geo = geometric_identity_check(h, handle, sigma, None, params.K, params.L, params.rel_tol)
    diff = geo.diffractive
    errors = {f"diffractive_{k}": v for k, v in diff.errors.items()}
    estimated = {k: True for k in errors}
    truncation = {
        "sigma": sigma,
        "sigma_margin": choice.margin if choice else None,
        "nu": diff.nu,
        "R": float(handle.spectrum.radius),
        "K": diff.K,
        "L": diff.L,
        "dataset_digest": dataset.digest if dataset is not None else None,
        "k1_two_route_residual": diff.k1_two_route_residual,
        "geometric_residual": geo.residual,
    }
    h0 = float(h(0.0).real)

    if dataset is None:
        notes.append("no Maass dataset: spectral side unavailable")
        return TraceReport(None, None, {}, diff.smooth, 0.0, None, {k: v for k, v in diff.terms.items()}, truncation, errors, estimated, notes, geo.log_side.value)

    # small perturbed eigenvalues: real zeros of S(1/2 + v), 0 < v < sigma
    roots = find_small_eigenvalues(handle, v_range=(1e-3, sigma - 1e-3), grid=params.eigen_grid)
    for r in roots:
        if r.v >= h.sigma_max:
            raise ValueError("test function is not analytic far enough to reach a small eigenvalue")
    if roots and max(r.v for r in roots) >= sigma:
        raise ValueError("sigma must exceed every small-eigenvalue parameter")
    scan = critical_zero_scan(handle, (0.1, min(dataset.r_max, h.cutoff(0.0, 1e-16))), dataset)
    if scan:
        notes.append(f"possible critical-line zeros near r = {scan}; alpha may not be generic")

    hv = {f"small v={r.v:.12f}": float(h(-1j * r.v).real) for r in roots}
    # the root is only as good as S: dv ~ (error of S) / |S'(v)|
    root_err = 0.0
    for r in roots:
        _, s_err = evaluate_s_alpha(handle, 0.5 + r.v)
        dv = 1e-6
        slope = abs(evaluate_s_alpha(handle, 0.5 + r.v + dv)[0] - evaluate_s_alpha(handle, 0.5 + r.v - dv)[0]) / (2 * dv)
        root_err += abs(h.derivative(-1j * r.v)) * (s_err / slope + 1e-10)
    sq = dataset.squared_values(handle.config.z0)
    scale = float(np.max(sq)) if sq.size else 1.0
    inherited, unperturbed = {}, {"residual h(i/2)": float(h(0.5j).real)}
    for form, v in zip(dataset.forms, sq):
        key = f"{form.parity} r={form.r:.10f}"
        hr = float(h(form.r).real)
        unperturbed[key] = hr
        if v <= params.vanishing_tol * max(scale, 1.0):
            inherited[key] = hr  # the form vanishes at z0 and stays an eigenfunction
    # forms beyond the dataset: Weyl density r/6 times h, flagged as an estimate
    rd = dataset.r_max
    xs = np.linspace(rd, rd + 20 * h.width, 4001)
    weyl_tail = float(np.trapezoid(xs / 6.0 * np.abs(h(xs)), xs))
    errors["dataset_beyond_rmax"] = weyl_tail
    estimated["dataset_beyond_rmax"] = True

    lhs_pert = sum(hv.values()) + sum(inherited.values())
    lhs_unpert = sum(unperturbed.values())

    if params.delta_gamma == "auto":
        order0 = _order_at_half(handle, dataset)
        delta = -order0
    else:
        delta = int(params.delta_gamma)
        order0 = _order_at_half(handle, dataset)
        if delta != -order0:
            notes.append(f"delta_gamma = {delta} overrides the measured order {-order0} of S at s = 1/2")
    delta_term = 0.5 * delta * h0

    scat, scat_err, _ = scattering_term(h, handle, dataset)
    errors["scattering"] = float(scat_err)
    estimated["scattering"] = True
    errors["small_eigenvalues"] = float(root_err)
    estimated["small_eigenvalues"] = True
    truncation["delta_gamma"] = delta
    truncation["small_eigenvalue_v"] = [r.v for r in roots]

    contributions = {"perturbed": {**hv, **inherited}, "unperturbed": unperturbed}
    report = TraceReport(
        float(lhs_pert),
        float(lhs_unpert),
        contributions,
        diff.smooth,
        float(delta_term),
        float(scat),
        {k: v for k, v in diff.terms.items()},
        truncation,
        errors,
        estimated,
        notes,
        geo.log_side.value,
    )
    if report.relative_budget is not None and report.relative_budget > 5e-2:
        warnings.warn(f"relative error budget {report.relative_budget:.2e} exceeds 5e-2")
    return report
