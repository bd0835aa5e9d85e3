"""Test functions and the spectral-side integral transforms.

Everything here integrates along horizontal lines Im rho = -nu.  The
integrands are analytic in a strip around the line and decay like a Gaussian,
so the trapezoidal rule converges geometrically; the step is set from the
distance to the nearest singularity and the growth of the integrand inside
that strip, and the error is estimated by halving the node count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .special import psi_scaled

__all__ = [
    "TestFunction",
    "NuChoice",
    "ContourError",
    "make_test_function",
    "find_nu",
    "denominator",
    "line_integral",
    "trapezoid_error",
    "trapezoid_weights",
    "g_transform",
    "g_transform_table",
    "smooth_term",
    "smooth_term_by_parts",
    "scattering_term",
    "NU_MARGIN",
]

NU_MARGIN = 0.05
PSI_HALF = psi_scaled(0.5).real  # (-gamma - 2 log 2)/(2 pi)


class ContourError(ValueError):
    """The integration line passes too close to a zero of the denominator."""


@dataclass(frozen=True)
class TestFunction:
    """h(rho) = sum_k p_k(rho^2) exp(-rho^2/a_k^2), an even entire function.

    ``terms`` holds (a, coefficients of p in powers of rho^2).
    """

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a test function needs at least one term")
        for a, coeffs in self.terms:
            if not (a > 0 and math.isfinite(a)):
                raise ValueError("Gaussian width must be positive")
            if not coeffs:
                raise ValueError("empty polynomial prefactor")

    @property
    def family(self) -> str:
        return "gaussian"

    @property
    def width(self) -> float:
        return max(a for a, _ in self.terms)

    @property
    def sigma_max(self) -> float:
        return math.inf  # entire

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=complex)
        r2 = rho * rho
        out = np.zeros_like(rho)
        for a, coeffs in self.terms:
            out = out + np.polyval(coeffs[::-1], r2) * np.exp(-r2 / (a * a))
        return out if out.ndim else complex(out)

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=complex)
        r2 = rho * rho
        out = np.zeros_like(rho)
        for a, coeffs in self.terms:
            p = np.polyval(coeffs[::-1], r2)
            dcoeffs = [k * c for k, c in enumerate(coeffs)][1:]
            dp = 2 * rho * np.polyval(dcoeffs[::-1], r2) if dcoeffs else 0.0
            out = out + (dp - 2 * rho / (a * a) * p) * np.exp(-r2 / (a * a))
        return out if out.ndim else complex(out)

    def cutoff(self, nu: float, eps: float = 1e-18) -> float:
        """|Re rho| beyond which |h| and |h'| on Im rho = -nu are below ``eps`` (relative)."""
        X = 0.0
        for a, coeffs in self.terms:
            deg = len(coeffs) - 1
            # exp(-(x^2 - nu^2)/a^2) (1 + x)^(2 deg + 1) < eps
            x = a * math.sqrt(nu * nu / (a * a) + math.log(1.0 / eps)) + 1.0
            for _ in range(4):
                x = a * math.sqrt(nu * nu / (a * a) + math.log(1.0 / eps) + (2 * deg + 2) * math.log1p(x)) + 1.0
            X = max(X, x)
        return X

    def strip_growth(self, nu: float, d: float) -> float:
        """log of max |h| growth factor when moving from Im = -nu to Im = -(nu + d) or -(nu - d)."""
        amin = min(a for a, _ in self.terms)
        return ((nu + d) ** 2 - nu * nu) / (amin * amin)

    def decay_certificate(self, sigma: float) -> tuple[float, float]:
        """(C, exponent) with |h(rho)| <= C (1 + |Re rho|)^(-exponent) on |Im rho| <= sigma."""
        C = 0.0
        for a, coeffs in self.terms:
            deg = len(coeffs) - 1
            # sup_x |p(x^2 + s^2)| e^{-(x^2 - s^2)/a^2} (1 + x)^3 bounded crudely on a grid
            xs = np.linspace(0.0, self.cutoff(sigma, 1e-30), 4000)
            pmax = np.polyval(np.abs(coeffs)[::-1], xs**2 + sigma**2)
            C += float(np.max(pmax * np.exp(-(xs**2 - sigma**2) / (a * a)) * (1 + xs) ** 3)) * (1 + deg)
        return C, 3.0

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.terms + other.terms)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(tuple((a, tuple(c * x for x in coeffs)) for a, coeffs in self.terms))


def make_test_function(a: float, prefactor=(1.0,)) -> TestFunction:
    """Gaussian exp(-rho^2/a^2), optionally times a polynomial in rho^2."""
    if not (a > 0):
        raise ValueError("a must be positive")
    return TestFunction(((float(a), tuple(float(c) for c in prefactor)),))


@dataclass(frozen=True)
class NuChoice:
    nu: float
    zero_location: float | None = None

    def __post_init__(self):
        if self.zero_location is None:
            if self.nu != 0.0:
                raise ValueError("nu must be 0 when there is no zero")
        elif not self.nu > self.zero_location:
            raise ValueError("nu must exceed the zero location")


def denominator(rho, beta: float, m: int):
    """1 + m beta psi(1/2 + i rho)."""
    return 1.0 + m * beta * psi_scaled(0.5 + 1j * np.asarray(rho, dtype=complex))


def find_nu(beta: float, m: int, sigma: float, margin: float = NU_MARGIN) -> NuChoice:
    """Locate the zero of v -> 1 + m beta psi(1/2 + v) on (0, sigma) and shift the contour past it."""
    if not sigma > 0.5:
        raise ValueError("sigma must exceed 1/2")
    if beta == 0:
        return NuChoice(0.0)

    def f(v):
        return 1.0 + m * beta * psi_scaled(0.5 + v).real

    f0, f1 = 1.0 + m * beta * PSI_HALF, f(sigma)
    if f0 * f1 > 0:
        return NuChoice(0.0)
    if f0 == 0:
        v = 0.0
    else:
        v = optimize.brentq(f, 0.0, sigma, xtol=1e-15, rtol=1e-15, maxiter=200)
    nu = v + margin if v + margin < sigma else 0.5 * (v + sigma)
    return NuChoice(float(nu), float(v))


def _singularity_distance(nu: NuChoice) -> float:
    # poles of psi(1/2 + i rho) sit at Im rho = n + 1/2; the zero of the denominator at -i v
    d = nu.nu + 0.5
    if nu.zero_location is not None:
        d = min(d, nu.nu - nu.zero_location)
    return d


def trapezoid_error(full, coarse, scale, coarser=None) -> float:
    """Error estimate for the fine trapezoid sum from rules with twice and four times the step.

    For integrands analytic in a strip the error behaves like A x^(4 h0/step)
    for some x < 1: the rules at 4, 2 and 1 times the step have errors A x,
    A x^2 and A x^4.  With d1 = |full - coarse| and d2 = |coarse - coarser|
    the fine error is therefore about d1^3/d2^2 whatever A is; a factor 10
    covers the pre-asymptotic regime.  The result is never below the
    two-level value scale (d1/scale)^2, which takes A to be ``scale``, the
    L1 size of the integrand sum.  Outside the geometric regime (d2 <= d1)
    the estimate falls back to d1.
    """
    scale = np.maximum(np.asarray(scale, dtype=float), 1e-300)
    d1 = np.abs(np.asarray(full) - np.asarray(coarse))
    est = scale * np.minimum(d1 / scale, 1.0) ** 2
    if coarser is not None:
        d2 = np.abs(np.asarray(coarse) - np.asarray(coarser))
        geometric = d2 > d1
        ratio = d1 / np.where(geometric, d2, 1.0)
        est = np.maximum(est, np.where(geometric, np.minimum(10.0 * d1 * ratio * ratio, d1), d1))
    # summation roundoff
    est = np.maximum(est, 1e-14 * scale)
    return est if est.ndim else float(est)


def trapezoid_weights(x: np.ndarray):
    """Weights of the trapezoid rule on x and on every second and fourth node.

    ``x`` must be uniform with a node count of the form 4n + 1.
    """
    dx = x[1] - x[0]
    out = []
    for stride in (1, 2, 4):
        w = np.zeros(x.size)
        w[::stride] = stride * dx
        w[0] = w[-1] = 0.5 * stride * dx
        out.append(w)
    return tuple(out)


def line_integral(func, nu: float, X: float, d: float, growth: float, rel_tol: float = 1e-13):
    """Trapezoid rule for int func(x - i nu) dx over [-X, X]; returns (value, error estimate).

    ``d`` is the half-width of the strip of analyticity and ``growth`` the log
    of the integrand's growth across it; the step keeps exp(growth - 2 pi d/h)
    below the target.
    """
    d = max(min(d, 1.0), 1e-3)
    h = 2 * math.pi * d / (math.log(1.0 / rel_tol) + 4.0 + max(growth, 0.0))
    n = int(math.ceil(X / h))
    n += n % 2  # 2n + 1 = 4(n/2) + 1 nodes, so the halved and quartered rules share them
    x = np.linspace(-X, X, 2 * n + 1)
    w, wc, wq = trapezoid_weights(x)
    vals = func(x - 1j * nu)
    full, coarse, coarser = np.sum(w * vals), np.sum(wc * vals), np.sum(wq * vals)
    return complex(full), trapezoid_error(full, coarse, np.sum(w * np.abs(vals)), coarser)


def _check_contour(beta, m, nu: NuChoice, X: float, margin: float):
    xs = np.linspace(-X, X, 401)
    den = np.abs(denominator(xs - 1j * nu.nu, beta, m))
    if np.min(den) < margin * 1e-2:
        raise ContourError(f"denominator modulus {np.min(den):.2e} on Im rho = -{nu.nu}")


def g_transform(beta: float, k: int, t, h: TestFunction, nu: NuChoice, m: int = 1, rel_tol: float = 1e-13, return_error: bool = False):
    """g_{beta,k}(t) = ((-1)^k / (2 pi i k)) int_{Im rho = -nu} h'(rho) e^{-i rho t} D(rho)^{-k} d rho."""
    if k < 1:
        raise ValueError("k must be at least 1")
    X = h.cutoff(nu.nu)
    _check_contour(beta, m, nu, X, NU_MARGIN)
    d = _singularity_distance(nu)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.size)
    errs = np.empty(ts.size)
    pref = (-1) ** k / (2j * math.pi * k)
    for i, tv in enumerate(ts):

        def f(rho, tv=tv):
            return h.derivative(rho) * np.exp(-1j * rho * tv) * denominator(rho, beta, m) ** (-k)

        growth = h.strip_growth(nu.nu, d) + d * abs(tv) + k * 0.5
        val, err = line_integral(f, nu.nu, X, d, growth, rel_tol)
        out[i] = (pref * val).real
        errs[i] = abs(pref) * err
    if scalar:
        return (out[0], errs[0]) if return_error else out[0]
    return (out, errs) if return_error else out


def g_transform_table(beta: float, k: int, ts, h: TestFunction, nu: NuChoice, m: int = 1, rel_tol: float = 1e-13):
    """g_{beta,k} on an array of t with one shared set of line nodes.

    The step is chosen for the largest |t| in ``ts``; values and errors are
    matrix products against the nodes, so large tables are cheap.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    ts = np.asarray(ts, dtype=float)
    X = h.cutoff(nu.nu)
    _check_contour(beta, m, nu, X, NU_MARGIN)
    d = max(min(_singularity_distance(nu), 1.0), 1e-3)
    growth = h.strip_growth(nu.nu, d) + d * float(np.max(np.abs(ts), initial=0.0)) + k * 0.5
    step = 2 * math.pi * d / (math.log(1.0 / rel_tol) + 4.0 + growth)
    n = int(math.ceil(X / step))
    n += n % 2
    x = np.linspace(-X, X, 2 * n + 1)
    rho = x - 1j * nu.nu
    f = h.derivative(rho) * denominator(rho, beta, m) ** (-k)
    w, wc, wq = trapezoid_weights(x)
    pref = (-1) ** k / (2j * math.pi * k)
    out = np.empty(ts.size)
    err = np.empty(ts.size)
    for lo in range(0, ts.size, 512):
        block = ts.ravel()[lo : lo + 512]
        phase = np.exp(-1j * np.outer(block, rho))
        full = phase @ (w * f)
        coarse = phase @ (wc * f)
        coarser = phase @ (wq * f)
        out[lo : lo + 512] = (pref * full).real
        err[lo : lo + 512] = abs(pref) * trapezoid_error(full, coarse, np.sum(w * np.abs(f)), coarser)
    return out.reshape(ts.shape), err.reshape(ts.shape)


def smooth_term(h: TestFunction, beta: float, m: int, nu: NuChoice, rel_tol: float = 1e-13, return_error: bool = False):
    """(1/2pi) int_{Im rho = -nu} h(rho) m beta psi'(1/2 + i rho) / (1 + m beta psi(1/2 + i rho)) d rho."""
    if beta == 0:
        return (0.0, 0.0) if return_error else 0.0
    X = h.cutoff(nu.nu)
    _check_contour(beta, m, nu, X, NU_MARGIN)
    d = _singularity_distance(nu)

    def f(rho):
        s = 0.5 + 1j * rho
        return h(rho) * m * beta * psi_scaled(s, 1) / (1.0 + m * beta * psi_scaled(s))

    val, err = line_integral(f, nu.nu, X, d, h.strip_growth(nu.nu, d) + 1.0, rel_tol)
    res = (val / (2 * math.pi)).real
    return (res, err / (2 * math.pi)) if return_error else res


def _unwrapped_log(values: np.ndarray, anchor: complex) -> np.ndarray:
    """log of ``values`` with the imaginary part continued from the principal log of ``anchor``."""
    ang = np.unwrap(np.angle(values))
    # re-anchor the unwrapped phase so the middle node carries the principal value
    mid = values.size // 2
    ang += np.angle(anchor) - ang[mid]
    return np.log(np.abs(values)) + 1j * ang


def smooth_term_by_parts(h: TestFunction, beta: float, m: int, nu: NuChoice, rel_tol: float = 1e-13) -> float:
    """-(1/2 pi i) int h'(rho) log(1 + m beta psi(1/2 + i rho)) d rho, with a continuous branch."""
    if beta == 0:
        return 0.0
    X = h.cutoff(nu.nu)
    d = _singularity_distance(nu)
    growth = h.strip_growth(nu.nu, d) + 1.0
    dd = max(min(d, 1.0), 1e-3)
    step = 2 * math.pi * dd / (math.log(1.0 / rel_tol) + 4.0 + growth)
    n = int(math.ceil(X / step))
    x = np.linspace(-X, X, 2 * n + 1)
    rho = x - 1j * nu.nu
    den = denominator(rho, beta, m)
    # the anchor sits at Re rho = 0, where the principal branch is the analytic continuation
    logd = _unwrapped_log(den, den[n])
    vals = h.derivative(rho) * logd
    w = np.full(x.size, x[1] - x[0])
    w[0] = w[-1] = 0.5 * (x[1] - x[0])
    return float((-np.sum(w * vals) / (2j * math.pi)).real)


def scattering_term(h: TestFunction, handle, dataset=None, r_max: float | None = None, step: float = 0.01):
    """(1/4pi i) int_R h(rho) d/drho log theta_alpha(1/2 + i rho) d rho and an error estimate.

    On the critical line theta = conj(S)/S, so the term equals
    (1/pi) int_0^inf h'(rho) (A(rho) - A(0+)) d rho with A the continuous
    argument of S(1/2 + i rho).  The integral is truncated where |h'| is
    negligible; the dropped tail is bounded by (1/pi) int_P^inf |h'| * pi.
    Returns (value, error_estimate, details).
    """
    from .maass import s_alpha_critical

    dataset = dataset if dataset is not None else handle.dataset
    if dataset is None:
        raise ValueError("the scattering term needs a Maass dataset")
    P = r_max if r_max is not None else h.cutoff(0.0, 1e-16)
    edges = np.arange(0.0, P + step, max(step * 20, 0.25))
    g, w = np.polynomial.legendre.leggauss(12)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * g)
        weights.append(half * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    # S has poles at the tabulated r_j only as boundary values; its argument is
    # continuous through them, so no pole margin is needed on this grid
    vals, errs = [], []
    for r in nodes:
        cv = s_alpha_critical(handle, r, dataset, {"margin": 1e-12})
        vals.append(cv.value)
        errs.append(cv.error)
    vals = np.array(vals, dtype=complex)
    errs = np.array(errs)
    # Im S >= 0 on the critical line, so arg S lies in [0, pi]; it drops by pi
    # where S passes through a pole while theta = conj(S)/S stays continuous,
    # hence the branch is continued modulo pi
    arg = np.arctan2(np.maximum(vals.imag, 0.0), vals.real)
    arg = np.unwrap(arg, period=math.pi)
    # anchor: A(0+) is 0 if S(1/2) > 0 and pi if S(1/2) < 0
    s_half = s_alpha_critical(handle, 0.0, dataset).value.real
    a0 = 0.0 if s_half > 0 else math.pi
    arg += a0 - math.pi * np.round((arg[0] - a0) / math.pi)
    hp = h.derivative(nodes).real
    value = float(np.sum(weights * hp * (arg - a0)) / math.pi)
    # error: quadrature of the argument error |dS|/|S| plus the truncated tail
    arg_err = errs / np.maximum(np.abs(vals), 1e-300)
    quad_err = float(np.sum(weights * np.abs(hp) * arg_err) / math.pi)
    tail_x = np.linspace(P, P + 10 * h.width, 2001)
    tail = float(np.trapezoid(np.abs(h.derivative(tail_x)), tail_x))
    details = {"r_max": float(P), "anchor": a0, "s_half": s_half, "nodes": int(nodes.size)}
    return value, quad_err + tail, details
