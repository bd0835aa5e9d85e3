"""Generate a Maass cusp form dataset for PSL(2,Z) with Hejhal's method.

Standalone data-preparation script (not part of the library).  For each
parity the eigenvalue parameter r is located by scanning a collocation
defect over r, refined by Brent's method, then a large collocation system at
small height gives 70+ Fourier coefficients.  The L2 normalization over the
fundamental domain is computed by quadrature.

Usage:  python3 tools/hejhal_maass.py --rmax 30 --out data/maass_psl2z.json
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from point_scatterer.geometry import Point, reduce_fund_domain  # noqa: E402
from point_scatterer.special import kbessel  # noqa: E402

Y0 = math.sqrt(3.0) / 2.0


def _cs(parity: str):
    return np.cos if parity == "even" else np.sin


class Collocation:
    """Collocation data at fixed height Y, reusable across r."""

    def __init__(self, M: int, Q: int, Y: float):
        self.M, self.Q, self.Y = M, Q, Y
        self.x = (np.arange(1, Q + 1) - 0.5) / (2 * Q)
        pts = [reduce_fund_domain(Point(float(x), Y))[0] for x in self.x]
        self.xs = np.array([p.x for p in pts])
        self.ys = np.array([p.y for p in pts])
        if np.any(self.ys < Y + 1e-9):
            raise ValueError("collocation height must lie below the fundamental domain")
        self.n = np.arange(1, M + 1)

    def matrix(self, r: float, parity: str) -> np.ndarray:
        cs = _cs(parity)
        M, Q = self.M, self.Q
        # K-Bessel values at the pulled-back points, shape (Q, M)
        arg = 2 * math.pi * np.outer(self.ys, self.n)
        kb = kbessel(np.full(arg.size, 1j * r), arg.ravel()).real.reshape(Q, M)
        w = np.sqrt(self.ys)[:, None] * kb * cs(2 * math.pi * np.outer(self.xs, self.n))
        diag = math.sqrt(self.Y) * kbessel(np.full(M, 1j * r), 2 * math.pi * self.n * self.Y).real
        proj = (2.0 / Q) * cs(2 * math.pi * np.outer(self.n, self.x))  # (M, Q)
        V = -(proj @ w) / diag[:, None]
        V[np.diag_indices(M)] += 1.0
        return V

    def solve(self, r: float, parity: str) -> np.ndarray:
        V = self.matrix(r, parity)
        a_rest = np.linalg.solve(V[1:, 1:], -V[1:, 0])
        return np.concatenate([[1.0], a_rest])


def choose_m(r: float, Y: float, extra: float = 32.0) -> int:
    return int(math.ceil((r + 4.0 * r ** (1.0 / 3.0) + extra) / (2 * math.pi * Y)))


class Defect:
    def __init__(self, rmax: float):
        # truncation is governed by the lowest pulled-back height Y0; the
        # collocation heights sit well below it so large-n errors are damped
        M = choose_m(rmax, Y0) + 2
        self.c1 = Collocation(M, M + 15, 0.50)
        self.c2 = Collocation(M, M + 15, 0.44)

    def __call__(self, r: float, parity: str, k: int = 2) -> float:
        return float(self.c1.solve(r, parity)[k - 1] - self.c2.solve(r, parity)[k - 1])

    def both(self, r, parity):
        a = self.c1.solve(r, parity)
        b = self.c2.solve(r, parity)
        return a, b


def find_eigenvalues(parity: str, rmin: float, rmax: float, step: float, log) -> list[float]:
    """Common zeros of the defects in a_2, a_3, a_4.

    A single component can cross zero spuriously (or twice between grid
    points), so a sign change in any of the three starts a refinement and the
    root is kept only if all low coefficients agree between the two heights.
    """
    defect = Defect(rmax)
    grid = np.arange(rmin, rmax + step, step)
    vals = []
    for r in grid:
        a, b = defect.both(r, parity)
        vals.append(a[1:4] - b[1:4])
    vals = np.array(vals)
    roots: list[float] = []
    for i in range(len(grid) - 1):
        for k in range(3):
            f0, f1 = vals[i, k], vals[i + 1, k]
            if not (np.isfinite(f0) and np.isfinite(f1)) or f0 * f1 > 0:
                continue
            if max(abs(f0), abs(f1)) > 1.0:  # jump through a pole of the normalized system
                continue
            try:
                r = optimize.brentq(lambda v: defect(v, parity, k + 2), grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15)
            except ValueError:
                continue
            a, b = defect.both(r, parity)
            agree = np.max(np.abs(a[1:6] - b[1:6]))
            if agree < 1e-6 and abs(a[1]) < 2.5 and all(abs(r - q) > 1e-6 for q in roots):
                roots.append(r)
                log(f"  {parity:4s} r = {r:.12f}  a2 = {a[1]: .10f}  a3 = {a[2]: .10f}  spread {agree:.1e}")
    return sorted(roots)


def coefficients(r: float, parity: str, count: int) -> tuple[np.ndarray, float]:
    """Fourier coefficients a_1..a_count (a_1 = 1) and a Hecke-relation check."""
    M = count + 10
    Y = min(0.5, (r + 25.0) / (2 * math.pi * M))
    c = Collocation(M, M + 30, Y)
    a = c.solve(r, parity)
    # multiplicativity a_6 = a_2 a_3 and a_4 = a_2^2 - 1 serve as accuracy checks
    hecke = max(abs(a[5] - a[1] * a[2]), abs(a[3] - (a[1] ** 2 - 1.0)), abs(a[9] - a[1] * a[4]))
    return a[:count], float(hecke)


def form_value(r, parity, coeffs, x, y):
    n = np.arange(1, len(coeffs) + 1)
    kb = kbessel(np.full(len(n), 1j * r), 2 * math.pi * n * y).real
    return float(np.sum(coeffs * math.sqrt(y) * kb * _cs(parity)(2 * math.pi * n * x)))


def l2_norm_squared(r: float, parity: str, coeffs: np.ndarray) -> float:
    """int over the fundamental domain of |f|^2 dx dy / y^2."""
    n = np.arange(1, len(coeffs) + 1)
    # y >= 1: Parseval in x gives (1/2) sum a_n^2 K(2 pi n y)^2 / y
    # K_{ir} carries a factor e^{-pi r/2}; rescale so the quadrature tolerance is relative
    scale = math.exp(math.pi * r)
    upper = 0.0
    for k, a in zip(n, coeffs):
        val, _ = integrate.quad(
            lambda y: scale * kbessel(1j * r, 2 * math.pi * k * y).real ** 2 / y, 1.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=200
        )
        upper += 0.5 * a * a * val / scale
    # arc region sqrt(1 - x^2) <= y <= 1, Gauss-Legendre in both variables, x in [0, 1/2] doubled
    gx, gw = np.polynomial.legendre.leggauss(48)
    xs = 0.25 * (gx + 1.0)
    wx = 0.25 * gw
    lower = 0.0
    for x, wxi in zip(xs, wx):
        ylo = math.sqrt(1 - x * x)
        ys = ylo + 0.5 * (gx + 1.0) * (1.0 - ylo)
        wy = 0.5 * gw * (1.0 - ylo)
        vals = np.array([form_value(r, parity, coeffs, x, y) for y in ys])
        lower += wxi * np.sum(wy * vals**2 / ys**2)
    return upper + 2.0 * lower


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rmin", type=float, default=1.0)
    ap.add_argument("--rmax", type=float, default=30.0)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--coeffs", type=int, default=60)
    ap.add_argument("--out", type=Path, default=Path("data/maass_psl2z.json"))
    args = ap.parse_args(argv)

    log = lambda msg: print(msg, flush=True)  # noqa: E731
    start = time.time()
    forms = []
    for parity in ("even", "odd"):
        log(f"scanning {parity} forms on [{args.rmin}, {args.rmax}]")
        for r in find_eigenvalues(parity, args.rmin, args.rmax, args.step, log):
            coeffs, hecke = coefficients(r, parity, args.coeffs)
            norm2 = l2_norm_squared(r, parity, coeffs)
            forms.append(
                {
                    "r": r,
                    "parity": parity,
                    "coeffs": [float(c) for c in coeffs],
                    "normalization": {"tag": "a1=1", "l2_factor": 1.0 / math.sqrt(norm2)},
                    "hecke_defect": hecke,
                }
            )
            log(f"    coefficients ok (Hecke defect {hecke:.1e}), L2 factor {1 / math.sqrt(norm2):.6e}")
    forms.sort(key=lambda f: f["r"])
    payload = {
        "format": "maass-dataset",
        "version": 1,
        "group": "PSL(2,Z)",
        "source": "tools/hejhal_maass.py (Hejhal collocation, Brent refinement)",
        "residual": {"lambda": 0.0, "value": 1.0 / math.sqrt(math.pi / 3.0)},
        "forms": forms,
    }
    text = json.dumps(payload, indent=1, sort_keys=True)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text + "\n", encoding="utf-8")
    log(f"wrote {len(forms)} forms to {args.out} in {time.time() - start:.0f} s; sha256 {hashlib.sha256(text.encode()).hexdigest()[:16]}")


if __name__ == "__main__":
    main()
