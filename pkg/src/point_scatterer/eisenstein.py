"""Eisenstein series and scattering coefficient for the modular group.

E(z, s) = sum over the cosets of the parabolic subgroup of Im(g z)^s, continued
to all s through its Fourier expansion

    E(z, s) = y^s + phi(s) y^{1-s}
              + (4 / Lambda(2s)) sum_{n>=1} n^{s-1/2} sigma_{1-2s}(n) sqrt(y) K_{s-1/2}(2 pi n y) cos(2 pi n x)

with Lambda the completed zeta function and phi(s) = Lambda(2s-1)/Lambda(2s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .geometry import Point, reduce_fund_domain
from .special import PoleError, divisor_sigma_table, kbessel, xi

__all__ = ["EisensteinValue", "EisensteinToleranceError", "phi_scatter", "eisenstein_eval", "eisenstein_critical"]

_MAX_TERMS = 4000


class EisensteinToleranceError(RuntimeError):
    """Requested tolerance cannot be met; ``achieved`` holds the best bound."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class EisensteinValue:
    value: complex
    truncation_n: int
    tail_bound: float


def phi_scatter(s):
    """phi(s) = Lambda(2s-1)/Lambda(2s), written with the entire xi to stay finite at s = 1/2."""
    s = complex(s)
    if abs(s - 1) < 1e-14:
        raise PoleError("phi has a pole at s = 1")
    den = xi(2 * s)
    if den == 0:
        raise PoleError("phi has a pole at a zero of xi(2s)")
    return -(xi(2 * s - 1) / den) * s / (1 - s)


def _coefficient_prefactor(s: complex) -> complex:
    # 4 / Lambda(2s) = 4 s (2s - 1) / xi(2s)
    return 4 * s * (2 * s - 1) / xi(2 * s)


def _tail_bound(s: complex, y: float, n_start: int, pref_abs: float) -> float:
    """Bound on sum_{n >= n_start} of the modulus of the Fourier terms."""
    mu = abs(s.real - 0.5)
    expo = (s.real - 0.5) + max(0.0, 1 - 2 * s.real) + 0.5  # d(n) <= 2 sqrt(n)
    n = np.arange(n_start, n_start + 400, dtype=float)
    kv = sp.kv(mu, 2 * math.pi * n * y)
    terms = pref_abs * 2.0 * n**expo * math.sqrt(y) * kv
    total = float(terms.sum())
    last, prev = terms[-1], terms[-2]
    if last > 0:
        ratio = last / prev
        total += last * ratio / (1 - ratio)
    return total


def _fourier_terms(s: complex, y: float, N: int) -> np.ndarray:
    n = np.arange(1, N + 1, dtype=float)
    sig = divisor_sigma_table(1 - 2 * s, N)
    kb = kbessel(np.full(N, s - 0.5), 2 * math.pi * n * y)
    return np.exp((s - 0.5) * np.log(n)) * sig * math.sqrt(y) * kb


def eisenstein_eval(z: Point, s, tol: float = 1e-12) -> EisensteinValue:
    """E(z, s) with a bound on the dropped Fourier tail below ``tol``."""
    s = complex(s)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if abs(s - 1) < 1e-14:
        raise PoleError("E(z, s) has a pole at s = 1")
    zr, _ = reduce_fund_domain(z)
    x, y = zr.x, zr.y
    if xi(2 * s) == 0:
        # Gamma(s) underflows far up the line; no Fourier coefficient is computable
        raise EisensteinToleranceError(f"|Im s| = {abs(s.imag):g} is beyond the reach of the completed zeta", math.inf)
    pref = _coefficient_prefactor(s)
    pref_abs = abs(pref)
    N = 1
    bound = _tail_bound(s, y, N + 1, pref_abs)
    while bound > tol:
        N = N + max(1, N // 2)
        if N > _MAX_TERMS:
            raise EisensteinToleranceError(f"tolerance {tol:g} unreachable at y = {y:g}", bound)
        bound = _tail_bound(s, y, N + 1, pref_abs)
    terms = _fourier_terms(s, y, N)
    cosines = np.cos(2 * math.pi * np.arange(1, N + 1) * x)
    series = pref * np.sum(terms * cosines)
    value = y**s + phi_scatter(s) * y ** (1 - s) + series
    if s.imag == 0:
        value = complex(value.real, 0.0)
    return EisensteinValue(complex(value), N, float(bound))


def eisenstein_critical(z: Point, r, tol: float = 1e-12) -> np.ndarray:
    """E(z, 1/2 + i r) for an array of real r (cached per call)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return np.array([eisenstein_eval(z, 0.5 + 1j * v, tol).value for v in r])
