"""Maass cusp form data and the spectral expansion of S_alpha near the critical line.

With s = 1/2 + i rho, lambda_j = 1/4 + rho_j^2 and rho_t^2 = i - 1/4 (the
deficiency parameter t), the regularized expansion reads

    S_alpha(1/2 + i rho) = 1/alpha
        + sum_j |phi_j(z0)|^2 (1/(rho^2 - rho_j^2) - Re 1/(rho_t^2 - rho_j^2))
        + (1/4pi) int_R |E(z0, 1/2 + i r)|^2 (1/(rho^2 - r^2) - Re 1/(rho_t^2 - r^2)) dr

for Im rho <= 0 (Re s >= 1/2, boundary values from below on the real axis).
The sum includes the constant form, |phi_0|^2 = 3/pi with rho_0^2 = -1/4.
Other s are reached through the functional equation.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize

from .eisenstein import eisenstein_eval, phi_scatter
from .geometry import Point, reduce_fund_domain
from .greens import (
    ModeError,
    SpectralFunctionHandle,
    automorphic_green,
    eisenstein_product_term,
    s_alpha_orbit,
)
from .special import kbessel

__all__ = [
    "MaassDataError",
    "PoleProximityError",
    "MaassToleranceError",
    "MaassForm",
    "MaassDataset",
    "CriticalValue",
    "SmallEigenvalue",
    "load_maass_dataset",
    "save_maass_dataset",
    "dataset_from_dict",
    "maass_value_at",
    "s_alpha_critical",
    "evaluate_s_alpha",
    "theta_phi_alpha",
    "perturbed_eisenstein",
    "find_small_eigenvalues",
    "critical_zero_scan",
    "default_dataset_path",
]

DATASET_FORMAT = "maass-dataset"
DATASET_VERSION = 1
VOLUME = math.pi / 3.0
POLE_MARGIN = 0.05
RHO_T_SQ = 1j - 0.25


class MaassDataError(ValueError):
    """A Maass data file is malformed or violates the dataset invariants."""


class PoleProximityError(ValueError):
    """rho is within the configured margin of a tabulated eigenvalue."""


class MaassToleranceError(RuntimeError):
    """Not enough coefficients for the requested accuracy; ``achieved`` holds the bound."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def default_dataset_path() -> Path:
    """Bundled dataset location (repository data directory)."""
    return Path(__file__).resolve().parents[2] / "data" / "maass_psl2z.json"


# ---------------------------------------------------------------- dataset


@dataclass(frozen=True)
class MaassForm:
    r: float
    parity: str
    coeffs: tuple
    l2_factor: float
    tag: str = "a1=1"
    extra: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @property
    def eigenvalue(self) -> float:
        return 0.25 + self.r * self.r


@dataclass(frozen=True)
class MaassDataset:
    forms: tuple
    residual_value: float
    source: str
    digest: str
    degraded: bool
    extra: dict = field(default_factory=dict, compare=False)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def r_max(self) -> float:
        return self.forms[-1].r if self.forms else 0.0

    def to_dict(self) -> dict:
        out = dict(self.extra)
        out.update(
            {
                "format": DATASET_FORMAT,
                "version": DATASET_VERSION,
                "source": self.source,
                "residual": {"lambda": 0.0, "value": self.residual_value},
                "forms": [
                    {
                        **f.extra,
                        "r": f.r,
                        "parity": f.parity,
                        "coeffs": list(f.coeffs),
                        "normalization": {"tag": f.tag, "l2_factor": f.l2_factor},
                    }
                    for f in self.forms
                ],
            }
        )
        return out

    def squared_values(self, z0: Point) -> np.ndarray:
        """|phi_j(z0)|^2 for every cusp form (memoized per point)."""
        key = (z0.x, z0.y)
        if key not in self._cache:
            self._cache[key] = np.array([maass_value_at(f, z0) ** 2 for f in self.forms])
        return self._cache[key]


def _digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def dataset_from_dict(payload: dict, min_coeffs: int = 50) -> MaassDataset:
    """Validate a parsed data file and build the dataset."""
    if not isinstance(payload, dict):
        raise MaassDataError("dataset must be a JSON object")
    if payload.get("format") != DATASET_FORMAT:
        raise MaassDataError(f"format tag must be {DATASET_FORMAT!r}")
    if payload.get("version") != DATASET_VERSION:
        raise MaassDataError(f"unsupported dataset version {payload.get('version')!r}")
    residual = payload.get("residual")
    if not isinstance(residual, dict) or "value" not in residual:
        raise MaassDataError("missing residual (constant) form")
    res_val = float(residual["value"])
    if abs(res_val - 1.0 / math.sqrt(VOLUME)) > 1e-12:
        raise MaassDataError("residual form value must be 1/sqrt(vol) = sqrt(3/pi)")
    raw_forms = payload.get("forms")
    if not isinstance(raw_forms, list):
        raise MaassDataError("'forms' must be a list")
    forms = []
    for i, f in enumerate(raw_forms):
        try:
            r = float(f["r"])
            parity = f["parity"]
            coeffs = tuple(float(c) for c in f["coeffs"])
            norm = f["normalization"]
            tag = norm["tag"]
            l2 = float(norm["l2_factor"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MaassDataError(f"form {i}: missing or malformed field ({exc})") from exc
        if parity not in ("even", "odd"):
            raise MaassDataError(f"form {i}: parity must be 'even' or 'odd'")
        if not (r > 0 and math.isfinite(r)):
            raise MaassDataError(f"form {i}: r must be positive")
        if len(coeffs) < min_coeffs:
            raise MaassDataError(f"form {i}: {len(coeffs)} coefficients, need at least {min_coeffs}")
        if tag != "a1=1" or coeffs[0] != 1.0:
            raise MaassDataError(f"form {i}: coefficients must be normalized with a1 = 1")
        if not (l2 > 0 and math.isfinite(l2)):
            raise MaassDataError(f"form {i}: l2_factor must be positive")
        if not all(math.isfinite(c) for c in coeffs):
            raise MaassDataError(f"form {i}: non-finite coefficient")
        known = ("r", "parity", "coeffs", "normalization")
        forms.append(MaassForm(r, parity, coeffs, l2, tag, {k: v for k, v in f.items() if k not in known}))
    for a, b in zip(forms, forms[1:]):
        if not b.r > a.r:
            raise MaassDataError(f"eigenvalue parameters must be strictly increasing (r = {a.r} then {b.r})")
    extra = {k: v for k, v in payload.items() if k not in ("format", "version", "source", "residual", "forms")}
    return MaassDataset(
        forms=tuple(forms),
        residual_value=res_val,
        source=str(payload.get("source", "unknown")),
        digest=_digest(payload),
        degraded=len(forms) == 0,
        extra=extra,
    )


def load_maass_dataset(path=None, min_coeffs: int = 50) -> MaassDataset:
    path = Path(path) if path is not None else default_dataset_path()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MaassDataError(f"dataset file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise MaassDataError(f"dataset file {path} is not valid JSON: {exc}") from exc
    return dataset_from_dict(payload, min_coeffs)


def save_maass_dataset(dataset: MaassDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- forms


def maass_value_at(form: MaassForm, z: Point, tol: float = 1e-13, reduce: bool = True) -> float:
    """L2-normalized value of the form at z from its Fourier expansion.

    With ``reduce`` the point is first moved into the fundamental domain.
    The truncation estimate uses |a_n| <= d(n) <= 2 sqrt(n) and
    |K_{ir}(x)| <= K_0(x).
    """
    if reduce:
        z, _ = reduce_fund_domain(z)
    x, y = z.x, z.y
    coeffs = np.asarray(form.coeffs)
    N = coeffs.size
    n = np.arange(1, N + 1)
    from scipy.special import k0

    tail_n = np.arange(N + 1, N + 400)
    bound = form.l2_factor * float(np.sum(2 * np.sqrt(tail_n) * math.sqrt(y) * k0(2 * math.pi * tail_n * y)))
    if bound > tol:
        raise MaassToleranceError(f"{N} coefficients leave a tail bound {bound:.2e} at y = {y:.3f}", bound)
    # drop terms far below the tolerance to save Bessel evaluations
    keep = form.l2_factor * 2 * np.sqrt(n) * math.sqrt(y) * k0(2 * math.pi * n * y) > 1e-3 * tol
    keep[0] = True
    last = int(np.nonzero(keep)[0][-1]) + 1
    n = n[:last]
    kb = kbessel(np.full(last, 1j * form.r), 2 * math.pi * n * y).real
    trig = np.cos(2 * math.pi * n * x) if form.parity == "even" else np.sin(2 * math.pi * n * x)
    return float(form.l2_factor * np.sum(coeffs[:last] * math.sqrt(y) * kb * trig))


# ---------------------------------------------------------------- critical line


@dataclass(frozen=True)
class CriticalValue:
    value: complex
    discrete_truncation_error: float
    continuous_truncation_error: float

    @property
    def error(self) -> float:
        return self.discrete_truncation_error + self.continuous_truncation_error


@dataclass(frozen=True)
class _EisensteinProfile:
    """|E(z0, 1/2 + ir)|^2 on composite Gauss panels over [0, r_cut]."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    coarse_nodes: np.ndarray
    coarse_weights: np.ndarray
    coarse_values: np.ndarray
    r_cut: float
    tail_mean: float


def _panel_rule(r_cut: float, width: float, order: int):
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.arange(0.0, r_cut + 1e-12, width)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * width
    nodes = (mids[:, None] + half * g[None, :]).ravel()
    weights = np.tile(half * w, mids.size)
    return nodes, weights


def _abs_e_squared(z0: Point, r: np.ndarray) -> np.ndarray:
    return np.array([abs(eisenstein_eval(z0, 0.5 + 1j * v, 1e-13).value) ** 2 for v in r])


@lru_cache(maxsize=16)
def _profile(x0: float, y0: float, r_cut: float, width: float) -> _EisensteinProfile:
    z0 = Point(x0, y0)
    nodes, weights = _panel_rule(r_cut, width, 16)
    values = _abs_e_squared(z0, nodes)
    cn, cw = _panel_rule(r_cut, width, 11)
    cv = _abs_e_squared(z0, cn)
    tail = values[nodes > r_cut - 10.0]
    return _EisensteinProfile(nodes, weights, values, cn, cw, cv, r_cut, float(np.mean(tail)))


def _log_primitive(rho: complex, r_cut: float) -> complex:
    """int_0^{r_cut} dr/(rho^2 - r^2) for Im rho <= 0, Re rho > 0 (boundary value from below)."""
    if rho.imag == 0:
        r0 = rho.real
        return (math.log((r_cut + r0) / (r_cut - r0)) + 1j * math.pi) / (2 * r0)
    return (np.log(rho + r_cut) - np.log(rho - r_cut)) / (2 * rho)


def _continuous_part(z0: Point, rho: complex, r_cut: float, width: float) -> tuple[complex, float]:
    """(1/4pi) int_R |E|^2 (1/(rho^2 - r^2) - Re 1/(rho_t^2 - r^2)) dr and its error estimate."""
    prof = _profile(z0.x, z0.y, r_cut, width)
    rho2 = rho * rho

    def integrate_rule(nodes, weights, values):
        reg = np.real(1.0 / (RHO_T_SQ - nodes**2))
        if abs(rho.imag) >= 0.5 or rho.real <= 0:
            total = np.sum(weights * values * (1.0 / (rho2 - nodes**2) - reg))
        else:
            # subtract the value at Re rho, whose singular integral is known in closed form
            f0 = abs(eisenstein_eval(z0, 0.5 + 1j * rho.real, 1e-13).value) ** 2
            den = rho2 - nodes**2
            hit = den == 0
            quot = np.divide(values - f0, den, out=np.zeros(nodes.shape, dtype=complex), where=~hit)
            if np.any(hit):
                # a node sits exactly at rho: use the limit -f'(rho)/(2 rho)
                r0, eps = rho.real, 1e-5
                fp = (abs(eisenstein_eval(z0, 0.5 + 1j * (r0 + eps), 1e-13).value) ** 2 - abs(eisenstein_eval(z0, 0.5 + 1j * (r0 - eps), 1e-13).value) ** 2) / (2 * eps)
                quot[hit] = -fp / (2 * r0)
            total = np.sum(weights * (quot - values * reg))
            total += f0 * _log_primitive(rho, r_cut)
        return total

    fine = integrate_rule(prof.nodes, prof.weights, prof.values)
    coarse = integrate_rule(prof.coarse_nodes, prof.coarse_weights, prof.coarse_values)
    # beyond r_cut the bracket behaves like -(rho^2 - Re rho_t^2)/r^4
    tail = -(rho2 - RHO_T_SQ.real) * prof.tail_mean / (3 * r_cut**3)
    value = (fine + tail) / (2 * math.pi)  # even integrand: (1/4pi) int_R = (1/2pi) int_0^inf
    err = (abs(fine - coarse) + abs(tail)) / (2 * math.pi)
    return complex(value), float(err)


def _discrete_part(dataset: MaassDataset, z0: Point, rho: complex, margin: float) -> tuple[complex, float]:
    rho2 = rho * rho
    total = dataset.residual_value**2 * (1.0 / (rho2 + 0.25) - (1.0 / (RHO_T_SQ + 0.25)).real)
    if dataset.forms:
        r = np.array([f.r for f in dataset.forms])
        if np.min(np.minimum(np.abs(rho - r), np.abs(rho + r))) < margin:
            raise PoleProximityError(f"rho = {rho} lies within {margin} of a tabulated eigenvalue")
        w = dataset.squared_values(z0)
        total += np.sum(w * (1.0 / (rho2 - r**2) - np.real(1.0 / (RHO_T_SQ - r**2))))
    # forms beyond the table: local Weyl law, mean |phi_j|^2 = 1/vol, density r/6
    R = max(dataset.r_max, 1.0)
    est = abs(rho2 - RHO_T_SQ.real) / (4 * math.pi * R * R)
    return complex(total), float(est)


def s_alpha_critical(
    h: SpectralFunctionHandle, rho, dataset: MaassDataset | None = None, quad_params: dict | None = None
) -> CriticalValue:
    """S_alpha(1/2 + i rho) from the spectral expansion.

    Im rho <= 0 is evaluated directly (real rho as the boundary value from
    Re s > 1/2); Im rho > 0 goes through the functional equation.
    """
    dataset = dataset if dataset is not None else h.dataset
    if dataset is None:
        raise ModeError("the spectral expansion needs a Maass dataset")
    q = {"r_cut": 80.0, "width": 0.5, "margin": POLE_MARGIN}
    q.update(h.options.get("quad", {}))
    q.update(quad_params or {})
    rho = complex(rho)
    z0 = h.config.z0
    if rho.imag > 0:
        base = s_alpha_critical(h, -rho, dataset, quad_params)
        jump = eisenstein_product_term(z0, 0.5 + 1j * rho)
        return CriticalValue(base.value + jump, base.discrete_truncation_error, base.continuous_truncation_error)
    if rho.real < 0:
        base = s_alpha_critical(h, -rho.conjugate(), dataset, quad_params)
        return CriticalValue(base.value.conjugate(), base.discrete_truncation_error, base.continuous_truncation_error)
    inv_alpha = 0.0 if math.isinf(h.config.alpha) else 1.0 / h.config.alpha
    disc, disc_err = _discrete_part(dataset, z0, rho, q["margin"])
    cont, cont_err = _continuous_part(z0, rho, q["r_cut"], q["width"])
    return CriticalValue(inv_alpha + disc + cont, disc_err, cont_err)


def evaluate_s_alpha(h: SpectralFunctionHandle, s) -> tuple[complex, float]:
    """S_alpha(s) using whichever representation is valid at s.

    Orbit sum for Re s > 1, reflection for Re s < 0 (both need the orbit
    table), otherwise the spectral expansion; synthetic handles use their callable.
    """
    s = complex(s)
    if h.mode == "synthetic":
        return h.evaluate(s)
    if h.spectrum is not None and s.real > 1:
        return s_alpha_orbit(h, s)
    if h.spectrum is not None and s.real < 0:
        return h.with_mode("reflected").evaluate(s)
    if h.dataset is not None:
        cv = s_alpha_critical(h, -1j * (s - 0.5), h.dataset)
        return cv.value, cv.error
    raise ModeError(f"no representation of S_alpha available at s = {s}")


def theta_phi_alpha(h: SpectralFunctionHandle, s) -> tuple[complex, complex]:
    """theta_alpha(s) = S(1-s)/S(s) and phi_alpha(s) = phi(s) theta_alpha(s)."""
    s = complex(s)
    num, _ = evaluate_s_alpha(h, 1.0 - s)
    den, _ = evaluate_s_alpha(h, s)
    if den == 0:
        raise ZeroDivisionError(f"S_alpha vanishes at s = {s}")
    theta = num / den
    return theta, phi_scatter(s) * theta


def perturbed_eisenstein(h: SpectralFunctionHandle, z: Point, s, radius: float | None = None) -> complex:
    """E(z, s) - E(z0, s)/S_alpha(s) * G^Gamma_s(z, z0), for Re s > 1."""
    s = complex(s)
    if not s.real > 1:
        raise ModeError("perturbed_eisenstein uses the orbit sum and needs Re s > 1")
    z0 = h.config.z0
    e0 = eisenstein_eval(z0, s).value
    ez = eisenstein_eval(z, s).value
    if e0 == 0:
        return ez
    S, _ = evaluate_s_alpha(h, s)
    if S == 0:
        raise ZeroDivisionError(f"S_alpha vanishes at s = {s}")
    radius = radius if radius is not None else h.options.get("green_radius", 10.0)
    g, _ = automorphic_green(s, z, z0, radius)
    return ez - e0 / S * g


# ---------------------------------------------------------------- roots


@dataclass(frozen=True)
class SmallEigenvalue:
    v: float
    bracket: tuple
    residual: float

    @property
    def s(self) -> float:
        return 0.5 + self.v

    @property
    def eigenvalue(self) -> float:
        return self.s * (1.0 - self.s)


def find_small_eigenvalues(h: SpectralFunctionHandle, v_range=(0.6, 5.0), grid: int = 200, tol: float = 1e-10) -> list:
    """Real zeros v of S_alpha(1/2 + v) inside ``v_range``, by sign change and Brent refinement.

    Sign changes across a pole (the constant form at v = 1/2) are rejected
    because |S| does not fall below ``tol`` there.
    """
    lo, hi = map(float, v_range)
    if not 0 < lo < hi:
        raise ValueError("v_range must satisfy 0 < lo < hi")

    def f(v):
        return evaluate_s_alpha(h, 0.5 + v)[0].real

    vs = np.linspace(lo, hi, grid + 1)
    vs = vs[np.abs(vs - 0.5) > 1e-9]
    vals = np.array([f(v) for v in vs])
    roots = []
    for a, b, fa, fb in zip(vs[:-1], vs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(SmallEigenvalue(float(a), (float(a), float(a)), 0.0))
            continue
        if fa * fb > 0 or (a < 0.5 < b):
            continue
        v = optimize.brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        res = abs(f(v))
        if res > tol:
            # refine once more around the Brent point before declaring a pole
            lo_b, hi_b = max(a, v - 1e-9), min(b, v + 1e-9)
            if f(lo_b) * f(hi_b) < 0:
                v = optimize.brentq(f, lo_b, hi_b, xtol=1e-16, rtol=1e-15)
                res = abs(f(v))
        if res > tol:
            if res > 1e3 * max(abs(fa), abs(fb)):
                continue  # pole, not a root
            warnings.warn(f"sign change near v = {v:.12f} could not be refined below {tol:g} (|S| = {res:.2e})")
            continue
        roots.append(SmallEigenvalue(float(v), (float(a), float(b)), float(res)))
    return roots


def critical_zero_scan(
    h: SpectralFunctionHandle,
    r_range=(0.1, 15.0),
    dataset: MaassDataset | None = None,
    e_threshold: float = 1e-3,
    re_threshold: float = 1e-3,
    points: int = 600,
) -> list:
    """Grid points r where both |E(z0, 1/2 + ir)| and |Re S_alpha| fall below thresholds."""
    dataset = dataset if dataset is not None else h.dataset
    z0 = h.config.z0
    out = []
    if e_threshold <= 0 or re_threshold <= 0:
        return out
    handle = h if h.dataset is dataset else h.with_mode(h.mode, dataset=dataset)
    r_tab = np.array([f.r for f in dataset.forms]) if dataset is not None else np.zeros(0)
    for r in np.linspace(r_range[0], r_range[1], points):
        if r_tab.size and np.min(np.abs(r_tab - r)) < POLE_MARGIN:
            continue
        e = abs(eisenstein_eval(z0, 0.5 + 1j * r).value)
        if e >= e_threshold:
            continue
        val = s_alpha_critical(handle, r, dataset).value
        if abs(val.real) < re_threshold:
            out.append(float(r))
    return out

