"""Free and automorphic Green's functions and the spectral function S_alpha.

Conventions.  G_s(l) = -(1/2pi) Q_{s-1}(cosh l) is the free kernel as a
function of hyperbolic distance.  For Re s > 1 the spectral function is

    S_alpha(s) = 1/beta + m psi(s) + sum_{g not in Stab(z0)} G_s(l_g)

where psi = Gamma'/Gamma / (2 pi), m = |Stab(z0)| and beta = alpha/(1 - c0 alpha)
with c0 = m Re psi(t) + Re sum G_t, so that S_alpha(t) = 1/alpha + i Im(...).

Orbit sums are truncated at the table radius R and corrected by the smooth
part of the counting function, N(L) ~ 6 (cosh L - 1).  What remains is the
lattice-point fluctuation, for which an estimate (not a certified bound) is
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special as sp

from .eisenstein import eisenstein_eval
from .geometry import Point, reduce_fund_domain
from .orbits import OrbitTable, pair_displacements, stabilizer
from .special import DomainError, PoleError, legendre_q, legendre_q_series, psi_scaled

__all__ = [
    "SingularCouplingError",
    "ModeError",
    "TruncationError",
    "t_parameter",
    "free_green",
    "free_green_array",
    "LengthSpectrum",
    "green_sum",
    "automorphic_green",
    "ScattererConfig",
    "SpectralFunctionHandle",
    "make_handle",
    "c0_const",
    "beta_of_alpha",
    "coupling_phase",
    "s_alpha_orbit",
    "s_alpha_reflected",
    "MODES",
]

TWO_PI = 2.0 * math.pi
# exponent of the lattice-point remainder used by the tail estimate
COUNT_ERROR_EXPONENT = 2.0 / 3.0
MODES = ("orbit-sum", "reflected", "spectral-expansion", "synthetic")


class SingularCouplingError(ValueError):
    """alpha hits the pole of the renormalization map, or alpha = 0."""


class ModeError(ValueError):
    """A handle was asked to evaluate outside its mode's validity region."""


class TruncationError(RuntimeError):
    """Orbit radius too small for the requested tolerance; ``achieved`` holds the estimate."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def t_parameter() -> complex:
    """Root of t^2 - t + i = 0 with Re t > 1/2."""
    root = complex(np.sqrt(complex(1.0, -4.0)))
    t = 0.5 * (1.0 + root)
    return t if t.real > 0.5 else 1.0 - t


def free_green(s, l: float) -> complex:
    """-(1/2pi) Q_{s-1}(cosh l), by quadrature of the integral representation."""
    s = complex(s)
    if not s.real > 0:
        raise DomainError("free_green requires Re s > 0")
    if not l > 0:
        raise DomainError("free_green requires l > 0")
    return -legendre_q(s - 1.0, float(l)) / TWO_PI


def free_green_array(s, l) -> np.ndarray:
    """Vectorized free kernel through the hypergeometric series (broadcasts s and l)."""
    s = np.asarray(s, dtype=complex)
    if np.any(s.real <= 0):
        raise DomainError("free_green requires Re s > 0")
    return -legendre_q_series(s - 1.0, l) / TWO_PI


# ---------------------------------------------------------------- orbit sums


def _series_coefficients(nu: np.ndarray, n_terms: int) -> np.ndarray:
    """c[i, n] with 2F1(1/2, nu+1; nu+3/2; z) = sum_n c[i, n] z^n."""
    c = np.empty((nu.size, n_terms), dtype=complex)
    c[:, 0] = 1.0
    for n in range(1, n_terms):
        k = n - 1
        c[:, n] = c[:, k] * (0.5 + k) * (nu + 1 + k) / ((nu + 1.5 + k) * (k + 1))
    return c


def _terms_needed(l_min: float) -> int:
    # the hypergeometric coefficients stay O(1), so z^n < 1e-17 suffices
    return int(math.ceil(39.2 / (2.0 * l_min))) + 2


def _weighted_q_sum(nu: np.ndarray, lengths: np.ndarray, weights: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """sum_j weights_j Q_{nu_i}(cosh lengths_j) for every nu_i.

    Uses Q_nu(cosh l) = pref(nu) sum_n c_n(nu) exp(-(nu + 1 + 2n) l) and
    swaps the sums, so the work is a few dense products per chunk of lengths.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=complex))
    out = np.zeros(nu.size, dtype=complex)
    if lengths.size == 0:
        return out
    if np.any(nu.real <= -1):
        raise DomainError("orbit sums need Re nu > -1")
    pref = np.exp(0.5 * math.log(math.pi) + sp.loggamma(nu + 1) - sp.loggamma(nu + 1.5))
    # very short lengths would need long series; take them by quadrature
    short = lengths < 0.05
    for l, w in zip(lengths[short], weights[short]):
        out += w * np.array([legendre_q(v, float(l)) for v in nu])
    lengths, weights = lengths[~short], weights[~short]
    # group by the number of series terms each length needs
    bands = [(0.05, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0), (4.0, np.inf)]
    for lo, hi in bands:
        sel = (lengths >= lo) & (lengths < hi)
        if not sel.any():
            continue
        lb, wb = lengths[sel], weights[sel]
        n_terms = _terms_needed(float(lb.min()))
        coef = _series_coefficients(nu, n_terms)
        acc = np.zeros((nu.size, n_terms), dtype=complex)
        for start in range(0, lb.size, chunk):
            lc = lb[start : start + chunk]
            wc = wb[start : start + chunk]
            e = np.exp(-np.outer(nu + 1.0, lc)) * wc  # (n_nu, n_l)
            z = np.exp(-2.0 * np.outer(lc, np.arange(n_terms)))  # (n_l, n_terms)
            acc += e @ z
        out += np.sum(coef * acc, axis=1)
    return pref * out


@dataclass(frozen=True)
class LengthSpectrum:
    """Distinct lengths with multiplicities, all below ``radius``, plus count statistics."""

    lengths: np.ndarray
    multiplicities: np.ndarray
    radius: float
    fluctuation_constant: float

    @classmethod
    def from_lengths(cls, lengths: np.ndarray, radius: float, rel_tol: float = 1e-11) -> "LengthSpectrum":
        l = np.sort(np.asarray(lengths, dtype=float))
        if l.size:
            new = np.empty(l.size, dtype=bool)
            new[0] = True
            new[1:] = np.diff(l) > rel_tol * l[1:]
            starts = np.nonzero(new)[0]
            uniq, mult = l[starts], np.diff(np.append(starts, l.size)).astype(float)
        else:
            uniq, mult = np.zeros(0), np.zeros(0)
        return cls(uniq, mult, float(radius), _fluctuation_constant(l, float(radius)))

    @classmethod
    def from_table(cls, table: OrbitTable) -> "LengthSpectrum":
        return cls.from_lengths(table.lengths, table.radius)

    def restricted(self, radius: float) -> "LengthSpectrum":
        keep = self.lengths <= radius
        l = np.repeat(self.lengths[keep], self.multiplicities[keep].astype(int))
        return LengthSpectrum.from_lengths(l, radius)

    def count(self, L) -> np.ndarray:
        cum = np.concatenate([[0.0], np.cumsum(self.multiplicities)])
        return cum[np.searchsorted(self.lengths, np.asarray(L, dtype=float), side="right")]


def _fluctuation_constant(sorted_lengths: np.ndarray, radius: float) -> float:
    """max |N(L) - 6(cosh L - 1)| e^{-theta L} over L in [R/2, R]."""
    if radius <= 0:
        return 0.0
    grid = np.linspace(radius / 2.0, radius, 400)
    counts = np.searchsorted(sorted_lengths, grid, side="right")
    dev = np.abs(counts - 6.0 * (np.cosh(grid) - 1.0))
    return float(np.max(dev * np.exp(-COUNT_ERROR_EXPONENT * grid)))


def _smooth_tail(s: np.ndarray, radius: float) -> np.ndarray:
    """6 int_R^inf G_s(l) sinh l dl, from int_x^inf Q_nu = (Q_{nu-1}(x) - Q_{nu+1}(x))/(2 nu + 1)."""
    q_lo = legendre_q_series(s - 2.0, np.full(s.shape, radius))
    q_hi = legendre_q_series(s, np.full(s.shape, radius))
    return -(6.0 / TWO_PI) * (q_lo - q_hi) / (2.0 * s - 1.0)


def _tail_estimate(s: np.ndarray, spectrum: LengthSpectrum) -> np.ndarray:
    R = spectrum.radius
    g_edge = np.abs(legendre_q_series(s - 1.0, np.full(s.shape, R))) / TWO_PI
    theta = COUNT_ERROR_EXPONENT
    growth = spectrum.fluctuation_constant * math.exp(theta * R)
    return 2.0 * growth * g_edge * (1.0 + np.abs(s) / (s.real - theta))


def green_sum(s, spectrum: LengthSpectrum | OrbitTable, tail: bool = True):
    """sum over the length spectrum of G_s(l), for scalar or array s.

    With ``tail`` the smooth counting tail beyond the radius is added and an
    estimate of the remaining fluctuation error is returned; otherwise the
    plain truncated sum is returned with a zero estimate.  Requires Re s > 1
    when ``tail`` is set (the tail integral diverges otherwise).
    """
    if isinstance(spectrum, OrbitTable):
        spectrum = LengthSpectrum.from_table(spectrum)
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    vals = -_weighted_q_sum(s - 1.0, spectrum.lengths, spectrum.multiplicities) / TWO_PI
    errs = np.zeros(s.shape)
    if tail:
        if np.any(s.real <= 1.0):
            raise DomainError("orbit sums with tail correction need Re s > 1")
        if spectrum.radius > 0:
            vals = vals + _smooth_tail(s, spectrum.radius)
            errs = _tail_estimate(s, spectrum)
    real = s.imag == 0
    vals = np.where(real, vals.real + 0j, vals)
    if scalar:
        return complex(vals[0]), float(errs[0])
    return vals, errs


def automorphic_green(s, z: Point, w: Point, radius: float = 10.0, tol: float | None = None):
    """sum over all g in PSL(2,Z) of G_s(d(z, g w)), with tail correction and estimate.

    Returns (value, tail_estimate).  If ``tol`` is given and the estimate
    exceeds it, TruncationError is raised carrying the achieved estimate.
    """
    s = complex(s)
    if not s.real > 1:
        raise DomainError("automorphic_green requires Re s > 1")
    _, dists = pair_displacements(z, w, radius)
    if dists.size and dists[0] < 1e-9:
        raise DomainError("z lies on the orbit of w; the kernel is singular there")
    spectrum = LengthSpectrum.from_lengths(dists, radius)
    val, err = green_sum(s, spectrum)
    if tol is not None and err > tol:
        raise TruncationError(f"radius {radius} gives tail estimate {err:.3g} > {tol:.3g}", err)
    return val, err


# ---------------------------------------------------------------- scatterer


@dataclass(frozen=True)
class ScattererConfig:
    """Scatterer position (reduced), coupling and derived constants."""

    z0: Point
    alpha: float
    m: int
    t_param: complex

    def __post_init__(self):
        a = self.alpha
        if math.isnan(a):
            raise ValueError("alpha must be a number or +-inf")
        if a == 0:
            raise SingularCouplingError("alpha = 0 is the unperturbed operator and has no spectral function")
        t = self.t_param
        if abs(t * (1 - t) - 1j) > 1e-14 or not t.real > 0.5:
            raise ValueError("t_param must solve t(1-t) = i with Re t > 1/2")

    @classmethod
    def create(cls, z0: Point, alpha: float) -> "ScattererConfig":
        zr, _ = reduce_fund_domain(z0)
        _, m = stabilizer(zr)
        return cls(zr, float(alpha), m, t_parameter())


def _regular_part_at_t(config: ScattererConfig, spectrum: LengthSpectrum, m: int | None = None):
    m = config.m if m is None else m
    t = config.t_param
    g, err = green_sum(t, spectrum)
    return m * psi_scaled(t) + g, err


def c0_const(config: ScattererConfig, table, m: int | None = None) -> float:
    """c0 = m Re psi(t) + Re sum G_t.  ``m`` overrides the stabilizer order (diagnostics only)."""
    spectrum = table if isinstance(table, LengthSpectrum) else LengthSpectrum.from_table(table)
    val, _ = _regular_part_at_t(config, spectrum, m)
    return float(val.real)


def beta_of_alpha(alpha: float, c0: float) -> float:
    """beta = alpha/(1 - c0 alpha), and -1/c0 at alpha = +-inf."""
    alpha = float(alpha)
    if alpha == 0 or math.isnan(alpha):
        raise SingularCouplingError("alpha must be nonzero")
    if math.isinf(alpha):
        if c0 == 0:
            raise SingularCouplingError("c0 = 0: beta is infinite at alpha = inf")
        return -1.0 / c0
    den = 1.0 - c0 * alpha
    if abs(den) <= 1e-14 * max(1.0, abs(c0 * alpha)):
        raise SingularCouplingError(f"alpha = {alpha} equals 1/c0; beta is infinite")
    return alpha / den


def coupling_phase(config: ScattererConfig, table) -> float:
    """Extension phase with cot(phi/2) = -alpha Im[m psi(t) + sum G_t], in (-pi, pi]."""
    spectrum = table if isinstance(table, LengthSpectrum) else LengthSpectrum.from_table(table)
    val, _ = _regular_part_at_t(config, spectrum)
    if math.isinf(config.alpha):
        return 0.0
    x = -config.alpha * val.imag
    # cot(phi/2) = x  <=>  phi/2 = arccot(x) taken in (-pi/2, pi/2]
    if x == 0:
        return math.pi
    return 2.0 * math.atan(1.0 / x)


@dataclass(frozen=True)
class SpectralFunctionHandle:
    """Evaluator of S_alpha in one of ``MODES``.

    orbit-sum           Re s > 1
    reflected           Re s < 0, via the functional equation and the orbit sum at 1 - s
    spectral-expansion  Re s >= 1/2 (boundary values on the critical line), needs ``dataset``
    synthetic           anywhere the user-supplied ``synthetic`` callable is defined
    """

    config: ScattererConfig
    mode: str
    orbit_table: OrbitTable | None
    beta: float
    c0: float
    spectrum: LengthSpectrum | None = None
    dataset: object = None
    synthetic: Callable | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode in ("orbit-sum", "reflected") and self.spectrum is None:
            raise ValueError(f"mode {self.mode} needs an orbit table")
        if self.mode == "spectral-expansion" and self.dataset is None:
            raise ValueError("spectral-expansion mode needs a Maass dataset")
        if self.mode == "synthetic" and self.synthetic is None:
            raise ValueError("synthetic mode needs a callable")
        if not math.isinf(self.config.alpha) and self.beta != 0:
            resid = abs(1.0 / self.beta - (1.0 / self.config.alpha - self.c0))
            if resid > 1e-10 * max(1.0, abs(1.0 / self.beta)):
                raise ValueError("beta and c0 are inconsistent with the renormalization")

    @property
    def m(self) -> int:
        return self.config.m

    def with_mode(self, mode: str, **kwargs) -> "SpectralFunctionHandle":
        fields = dict(
            config=self.config,
            mode=mode,
            orbit_table=self.orbit_table,
            beta=self.beta,
            c0=self.c0,
            spectrum=self.spectrum,
            dataset=self.dataset,
            synthetic=self.synthetic,
            options=dict(self.options),
        )
        fields.update(kwargs)
        return SpectralFunctionHandle(**fields)

    def validity(self, s: complex) -> bool:
        s = complex(s)
        if self.mode == "orbit-sum":
            return s.real > 1
        if self.mode == "reflected":
            return s.real < 0
        if self.mode == "spectral-expansion":
            return s.real >= 0.5
        return True

    def __call__(self, s) -> complex:
        return self.evaluate(s)[0]

    def evaluate(self, s) -> tuple[complex, float]:
        """(S_alpha(s), error estimate) in this handle's mode."""
        s = complex(s)
        if not self.validity(s):
            raise ModeError(f"s = {s} is outside the validity region of mode {self.mode}")
        if self.mode == "orbit-sum":
            return s_alpha_orbit(self, s)
        if self.mode == "reflected":
            return s_alpha_reflected(self.with_mode("orbit-sum"), 1.0 - s), float("nan")
        if self.mode == "spectral-expansion":
            from .maass import s_alpha_critical

            cv = s_alpha_critical(self, -1j * (s - 0.5), self.dataset)
            return cv.value, cv.discrete_truncation_error + cv.continuous_truncation_error
        return complex(self.synthetic(s)), 0.0


def make_handle(
    z0: Point,
    alpha: float,
    table: OrbitTable,
    mode: str = "orbit-sum",
    dataset=None,
    synthetic: Callable | None = None,
) -> SpectralFunctionHandle:
    """Build a handle; the orbit table fixes c0 and therefore beta."""
    config = ScattererConfig.create(z0, alpha)
    if abs(table.z0.x - config.z0.x) > 1e-14 or abs(table.z0.y - config.z0.y) > 1e-14:
        raise ValueError("orbit table was built for a different (reduced) base point")
    spectrum = LengthSpectrum.from_table(table)
    c0 = c0_const(config, spectrum)
    beta = beta_of_alpha(config.alpha, c0)
    return SpectralFunctionHandle(config, mode, table, beta, c0, spectrum, dataset, synthetic)


def s_alpha_orbit(h: SpectralFunctionHandle, s) -> tuple[complex, float]:
    """1/beta + m psi(s) + orbit sum, with the orbit-sum tail estimate (Re s > 1)."""
    s = complex(s)
    if h.spectrum is None:
        raise ModeError("handle has no orbit table")
    if not s.real > 1:
        raise ModeError("orbit-sum evaluation requires Re s > 1")
    g, err = green_sum(s, h.spectrum)
    val = 1.0 / h.beta + h.m * psi_scaled(s) + g
    if s.imag == 0:
        val = complex(val.real, 0.0)
    return complex(val), err


def s_alpha_reflected(h: SpectralFunctionHandle, s, tol: float = 1e-12) -> complex:
    """S_alpha(1 - s) for Re s > 1, from S(1-s) = S(s) - E(z0,s) E(z0,1-s)/(1 - 2s)."""
    s = complex(s)
    if not s.real > 1:
        raise ModeError("s_alpha_reflected requires Re s > 1")
    direct, _ = s_alpha_orbit(h, s)
    z0 = h.config.z0
    e_s = eisenstein_eval(z0, s, tol).value
    if e_s == 0:
        return direct
    e_r = eisenstein_eval(z0, 1.0 - s, tol).value
    return direct - e_s * e_r / (1.0 - 2.0 * s)


def eisenstein_product_term(z0: Point, s, tol: float = 1e-12) -> complex:
    """E(z0, s) E(z0, 1-s)/(1 - 2s), the jump in the functional equation."""
    s = complex(s)
    if abs(s - 0.5) < 1e-14:
        raise PoleError("the functional-equation term is singular at s = 1/2")
    return eisenstein_eval(z0, s, tol).value * eisenstein_eval(z0, 1.0 - s, tol).value / (1.0 - 2.0 * s)
