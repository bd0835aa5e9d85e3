"""Complex special functions used throughout the package.

Digamma/trigamma use upward recurrence plus the Stirling series, the
completed zeta function uses Euler-Maclaurin summation together with its
functional equation, Legendre Q comes from its integral representation, and
K-Bessel of complex order is evaluated by trapezoidal quadrature along a
shifted line through the saddle point of the cosh integral.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

__all__ = [
    "PoleError",
    "DomainError",
    "digamma",
    "trigamma",
    "psi_scaled",
    "legendre_q",
    "legendre_q_series",
    "zeta",
    "xi",
    "completed_zeta",
    "kbessel",
    "divisor_sigma",
    "divisor_sigma_table",
]

TWO_PI = 2.0 * math.pi

# B_2, B_4, ..., B_18
_BERNOULLI_EVEN = np.array(
    [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510, 43867 / 798]
)
_SHIFT_TARGET = 16.0


class PoleError(ValueError):
    """Raised when a function is evaluated at one of its poles."""


class DomainError(ValueError):
    """Raised when an argument lies outside the supported domain."""


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def _check_nonpositive_integer(z):
    bad = (np.abs(z.imag) < 1e-300) & (z.real <= 0) & (np.abs(z.real - np.round(z.real)) < 1e-14)
    if np.any(bad):
        raise PoleError(f"pole at nonpositive integer {z[bad].ravel()[0].real:g}")


def _cot_pi(z):
    # exp(2*pi*i*z) is kept bounded by choosing the sign by half-plane
    upper = z.imag >= 0
    q = np.where(upper, np.exp(2j * np.pi * np.where(upper, z, 0)), np.exp(-2j * np.pi * np.where(upper, 0, z)))
    return np.where(upper, 1j * (q + 1) / (q - 1), 1j * (1 + q) / (1 - q))


def _inv_sin2_pi(z):
    upper = z.imag >= 0
    q = np.where(upper, np.exp(2j * np.pi * np.where(upper, z, 0)), np.exp(-2j * np.pi * np.where(upper, 0, z)))
    return -4 * q / (q - 1) ** 2


def _shift_up(w, power):
    """Return (w + n, sum_{k<n} (w+k)^-power) with Re(w + n) >= target."""
    acc = np.zeros_like(w)
    w = w.copy()
    for _ in range(int(max(0, math.ceil(_SHIFT_TARGET - w.real.min()))) if w.size else 0):
        mask = w.real < _SHIFT_TARGET
        if not mask.any():
            break
        acc[mask] += w[mask] ** (-power)
        w[mask] += 1
    return w, acc


def digamma(z):
    """Standard digamma Gamma'/Gamma for complex arguments."""
    z, scalar = _as_complex(z)
    z = np.atleast_1d(z)
    _check_nonpositive_integer(z)
    reflect = z.real < 0.5
    w = np.where(reflect, 1 - z, z)
    w, acc = _shift_up(w, 1)
    inv2 = 1 / (w * w)
    series = np.zeros_like(w)
    p = inv2.copy()
    for k, b in enumerate(_BERNOULLI_EVEN, start=1):
        series += b / (2 * k) * p
        p = p * inv2
    val = np.log(w) - 0.5 / w - series - acc
    val = np.where(reflect, val - np.pi * _cot_pi(z), val)
    return val[0] if scalar else val


def trigamma(z):
    """Derivative of the digamma function for complex arguments."""
    z, scalar = _as_complex(z)
    z = np.atleast_1d(z)
    _check_nonpositive_integer(z)
    reflect = z.real < 0.5
    w = np.where(reflect, 1 - z, z)
    w, acc = _shift_up(w, 2)
    inv = 1 / w
    inv2 = inv * inv
    series = np.zeros_like(w)
    p = inv2 * inv
    for b in _BERNOULLI_EVEN:
        series += b * p
        p = p * inv2
    val = inv + 0.5 * inv2 + series + acc
    val = np.where(reflect, np.pi**2 * _inv_sin2_pi(z) - val, val)
    return val[0] if scalar else val


def psi_scaled(s, order: int = 0):
    """Digamma normalized by 1/(2 pi); ``order=1`` gives its s-derivative."""
    if order == 0:
        return digamma(s) / TWO_PI
    if order == 1:
        return trigamma(s) / TWO_PI
    raise ValueError("order must be 0 or 1")


# ---------------------------------------------------------------- Legendre Q


def _legendre_q_integrand(v, nu, t):
    # u = t + v^2 removes the inverse square-root endpoint singularity
    half = 0.5 * v * v
    denom = 2.0 * np.sqrt(np.sinh(t + half) * np.sinh(half)) if v > 0 else 0.0
    if v == 0:
        jac = 2.0 / math.sqrt(2.0 * math.sinh(t))
    else:
        jac = 2.0 * v / denom
    return np.exp(-(nu + 0.5) * (t + v * v)) * jac


def legendre_q(nu, t: float, epsabs: float = 1e-15, epsrel: float = 1e-13) -> complex:
    """Q_nu(cosh t) from its integral representation by adaptive quadrature."""
    if not t > 0:
        raise DomainError("legendre_q requires t > 0")
    nu = complex(nu)
    if nu.real <= -1:
        raise DomainError("legendre_q requires Re nu > -1")
    # Gaussian-type decay exp(-(Re nu + 1) v^2) sets the upper limit
    decay = nu.real + 1.0
    vmax = math.sqrt(45.0 / decay) + 1.0
    npieces = max(4, int(abs(nu.imag) * vmax * vmax / 20) + 4)
    edges = np.sqrt(np.linspace(0.0, vmax * vmax, npieces + 1))
    re = im = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        re += integrate.quad(lambda v: _legendre_q_integrand(v, nu, t).real, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
        im += integrate.quad(lambda v: _legendre_q_integrand(v, nu, t).imag, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return complex(re, im)


def legendre_q_series(nu, t, max_terms: int = 20000):
    """Vectorized Q_nu(cosh t) via the hypergeometric series in exp(-2t).

    Q_nu(cosh t) = sqrt(pi) Gamma(nu+1)/Gamma(nu+3/2) e^{-(nu+1)t}
    2F1(1/2, nu+1; nu+3/2; e^{-2t}).
    """
    nu, t = np.broadcast_arrays(np.asarray(nu, dtype=complex), np.asarray(t, dtype=float))
    scalar = nu.ndim == 0
    nu = np.atleast_1d(nu).astype(complex)
    t = np.atleast_1d(t).astype(float)
    if np.any(t <= 0):
        raise DomainError("legendre_q_series requires t > 0")
    if np.any(nu.real <= -1):
        raise DomainError("legendre_q_series requires Re nu > -1")
    z = np.exp(-2 * t)
    term = np.ones_like(nu)
    total = np.ones_like(nu)
    active = np.ones(nu.shape, dtype=bool)
    for n in range(max_terms):
        term = term * ((0.5 + n) * (nu + 1 + n) / ((nu + 1.5 + n) * (n + 1)) * z)
        total = total + term
        active = np.abs(term) > 1e-17 * np.abs(total)
        if not active.any():
            break
    pref = np.exp(0.5 * math.log(math.pi) + special.loggamma(nu + 1) - special.loggamma(nu + 1.5) - (nu + 1) * t)
    out = pref * total
    return out[0] if scalar else out


# ---------------------------------------------------------------- zeta


def _zeta_em_scalar(s: complex, times_pole: bool) -> complex:
    """Euler-Maclaurin for zeta(s) (or (s-1) zeta(s)) with Re s >= 1/2."""
    n_terms = max(20, int(abs(s) / 2) + 20)
    n = np.arange(1, n_terms, dtype=float)
    N = float(n_terms)
    head = np.sum(np.exp(-s * np.log(n)))
    nms = N ** (-s)
    tail = 0.5 * nms
    # Bernoulli correction terms
    poch = s
    power = nms / N
    fact = 2.0
    corr = 0.0
    for k, b in enumerate(_BERNOULLI_EVEN, start=1):
        term = b / fact * poch * power
        corr += term
        poch = poch * (s + 2 * k - 1) * (s + 2 * k)
        power = power / (N * N)
        fact = fact * (2 * k + 1) * (2 * k + 2)
    pole_part = N * nms  # N^{1-s}
    if times_pole:
        return (s - 1) * (head + tail + corr) + pole_part
    return head + tail + corr + pole_part / (s - 1)


def zeta(s):
    """Riemann zeta for complex s (Euler-Maclaurin, functional equation for Re s < 1/2)."""
    s_arr, scalar = _as_complex(s)
    flat = np.atleast_1d(s_arr).ravel()
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        if abs(v - 1) < 1e-300:
            raise PoleError("zeta has a pole at s = 1")
        if v.real >= 0.5:
            out[i] = _zeta_em_scalar(v, False)
        else:
            # zeta(s) = Lambda(1-s) / (pi^{-s/2} Gamma(s/2))
            w = 1 - v
            if abs(v) < 1e-300:
                out[i] = -0.5
                continue
            lam = 2 * _xi_scalar(w) / (w * (w - 1))
            out[i] = lam / np.exp(-0.5 * v * math.log(math.pi) + special.loggamma(0.5 * v))
    out = out.reshape(np.atleast_1d(s_arr).shape)
    return out[0] if scalar else out


def _xi_scalar(w: complex) -> complex:
    if w.real < 0.5:
        w = 1 - w
    return 0.5 * w * _zeta_em_scalar(w, True) * np.exp(-0.5 * w * math.log(math.pi) + special.loggamma(0.5 * w))


def xi(w):
    """Entire completed zeta xi(w) = w(w-1)/2 * Lambda(w); xi(w) = xi(1-w)."""
    w_arr, scalar = _as_complex(w)
    flat = np.atleast_1d(w_arr).ravel()
    out = np.array([_xi_scalar(v) for v in flat], dtype=complex).reshape(np.atleast_1d(w_arr).shape)
    return out[0] if scalar else out


def completed_zeta(s):
    """Lambda(s) = pi^{-s/2} Gamma(s/2) zeta(s); simple poles at 0 and 1."""
    s_arr, scalar = _as_complex(s)
    flat = np.atleast_1d(s_arr)
    if np.any(np.abs(flat) < 1e-14) or np.any(np.abs(flat - 1) < 1e-14):
        raise PoleError("completed_zeta has poles at s = 0 and s = 1")
    out = 2 * xi(flat) / (flat * (flat - 1))
    return out[0] if scalar else out


# ---------------------------------------------------------------- K-Bessel

_KB_LOG_FLOOR = 40.0


def _kbessel_line(nu: complex, x: float) -> complex:
    """K_nu(x) for Re nu >= 0, Im nu > 0 by the trapezoidal rule on Im u = c.

    K_nu(x) = 1/2 int_R exp(-x cosh u + nu u) du, shifted to pass near the
    saddle x sinh u = nu.  The integrand is entire, so the trapezoidal rule
    converges geometrically once the step resolves the analyticity strip.
    """
    a, b = nu.real, nu.imag
    saddle = np.arcsinh(nu / x)
    if b > x:
        delta = min(0.6, max(0.02, 2.0 / (b - x)))
    else:
        delta = 0.6
    c = min(float(saddle.imag), 0.5 * math.pi - delta)
    c = max(c, 0.0)
    cc = math.cos(c)
    d = 0.5 * min(0.5 * math.pi - c, 0.6)
    # location of the modulus maximum along the line
    w_peak = math.asinh(a / (x * cc)) if a > 0 else 0.0
    log_peak = -x * cc * math.cosh(w_peak) + a * w_peak

    def log_mod(w):
        return -x * cc * np.cosh(w) + a * w

    # bracket where the modulus drops by exp(-floor)
    span = 1.0
    while log_mod(w_peak + span) > log_peak - _KB_LOG_FLOOR:
        span *= 1.5
    hi = w_peak + span
    span = 1.0
    while log_mod(w_peak - span) > log_peak - _KB_LOG_FLOOR:
        span *= 1.5
    lo = w_peak - span
    # the strip half-width d trades growth exp(d*(b + x)) against exp(-2 pi d / h)
    h = min(2 * math.pi * d / (_KB_LOG_FLOOR + 8.0 + d * (abs(b) + x)), 0.25)
    n = int(math.ceil((hi - lo) / h)) + 1
    w = np.linspace(lo, hi, n)
    h = w[1] - w[0]
    u = w + 1j * c
    vals = np.exp(-x * np.cosh(u) + nu * u)
    return 0.5 * h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))


def kbessel(order, y):
    """Modified Bessel K_order(y) for complex order and real y > 0."""
    order_arr, y_arr = np.broadcast_arrays(np.asarray(order, dtype=complex), np.asarray(y, dtype=float))
    scalar = order_arr.ndim == 0
    nu = np.atleast_1d(order_arr).ravel()
    yy = np.atleast_1d(y_arr).ravel()
    if np.any(yy <= 0):
        raise DomainError("kbessel requires y > 0")
    out = np.empty(nu.shape, dtype=complex)
    real = nu.imag == 0
    if real.any():
        out[real] = special.kv(nu[real].real, yy[real])
    for i in np.nonzero(~real)[0]:
        v = nu[i]
        if v.real < 0:
            v = -v  # K_{-nu} = K_nu
        conj = v.imag < 0
        if conj:
            v = v.conjugate()
        val = _kbessel_line(v, float(yy[i]))
        out[i] = val.conjugate() if conj else val
    out = out.reshape(np.atleast_1d(order_arr).shape)
    return out[0] if scalar else out


# ---------------------------------------------------------------- divisor sums


def divisor_sigma(a, n: int):
    """sigma_a(n) = sum of d^a over the positive divisors d of n."""
    n = int(n)
    if n < 1:
        raise DomainError("divisor_sigma requires n >= 1")
    divs = []
    k = 1
    while k * k <= n:
        if n % k == 0:
            divs.append(k)
            if k * k != n:
                divs.append(n // k)
        k += 1
    total = sum(complex(d) ** a for d in sorted(divs))
    return total.real if np.isreal(a) and total.imag == 0 else total


def divisor_sigma_table(a, N: int) -> np.ndarray:
    """Array of sigma_a(n) for n = 1..N (index 0 holds n = 1)."""
    out = np.zeros(N + 1, dtype=complex)
    for d in range(1, N + 1):
        out[d::d] += complex(d) ** a
    return out[1:]
