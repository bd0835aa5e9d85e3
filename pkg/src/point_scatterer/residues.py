"""Contour integrals of h * (log F)' and planted-spectrum residue checks.

Functions here work in the spectral variable rho (s = 1/2 + i rho).  A
contour is a closed rectangle or an open polyline.  Integrals use adaptive
Gauss-Kronrod quadrature; the argument of F is tracked separately along the
same path by accumulating increments between nodes, refining any step whose
increment exceeds pi/2, so winding numbers come out as exact integers.

The synthetic functions are finite products of (rho - p)^(+-k) times exp of a
polynomial.  Their logarithmic derivative is exact, so every residue
prediction is an independent oracle for the quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "ContourViolation",
    "Rectangle",
    "Polyline",
    "SyntheticSpectralFunction",
    "ResidueReport",
    "ContourResult",
    "contour_log_derivative_integral",
    "contour_integral",
    "track_argument",
    "continuous_log",
    "verify_resonance_lemma",
    "verify_truncated_formula",
    "random_configuration",
    "run_random_suite",
]

DEFAULT_MARGIN = 1e-3
ARG_STEP_LIMIT = math.pi / 2


class ContourViolation(ValueError):
    """A zero or pole of F lies on, or within the margin of, the contour."""


@dataclass(frozen=True)
class Polyline:
    """Open path through the given vertices."""

    vertices: tuple[complex, ...]

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("a polyline needs at least two vertices")
        object.__setattr__(self, "vertices", tuple(complex(v) for v in self.vertices))

    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    def distance(self, p: complex) -> float:
        return min(_segment_distance(p, a, b) for a, b in self.segments())

    def describe(self) -> str:
        return "polyline " + " -> ".join(f"{v.real:+.4g}{v.imag:+.4g}i" for v in self.vertices)


@dataclass(frozen=True)
class Rectangle:
    """Counter-clockwise boundary of [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("rectangle must have positive width and height")

    @property
    def corners(self):
        return (
            complex(self.x0, self.y0),
            complex(self.x1, self.y0),
            complex(self.x1, self.y1),
            complex(self.x0, self.y1),
        )

    def segments(self):
        c = self.corners
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def contains(self, p: complex) -> bool:
        return self.x0 < p.real < self.x1 and self.y0 < p.imag < self.y1

    def distance(self, p: complex) -> float:
        return min(_segment_distance(p, a, b) for a, b in self.segments())

    def describe(self) -> str:
        return f"rectangle [{self.x0:.4g}, {self.x1:.4g}] x [{self.y0:.4g}, {self.y1:.4g}] (ccw)"


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    d = b - a
    t = ((p - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


@dataclass(frozen=True)
class SyntheticSpectralFunction:
    """F(rho) = exp(sum c_k rho^k) * prod (rho - z)^n / prod (rho - p)^n.

    ``zeros`` and ``poles`` are tuples of (location, order).  The exponential
    prefactor is entire and zero-free, so the planted data is the complete
    list of zeros and poles.
    """

    zeros: tuple = ()
    poles: tuple = ()
    exp_coeffs: tuple = (0.0,)

    def __post_init__(self):
        zs = tuple((complex(z), int(k)) for z, k in self.zeros)
        ps = tuple((complex(p), int(k)) for p, k in self.poles)
        for loc, k in zs + ps:
            if k < 1:
                raise ValueError("orders must be positive integers")
            if not np.isfinite(loc):
                raise ValueError("planted points must be finite")
        locs = [loc for loc, _ in zs + ps]
        for i in range(len(locs)):
            for j in range(i):
                if abs(locs[i] - locs[j]) < 1e-12:
                    raise ValueError("planted zeros and poles must be distinct")
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "poles", ps)
        object.__setattr__(self, "exp_coeffs", tuple(complex(c) for c in self.exp_coeffs))

    @property
    def planted(self):
        """(location, signed order) with zeros positive and poles negative."""
        return [(z, k) for z, k in self.zeros] + [(p, -k) for p, k in self.poles]

    def reflected(self) -> "SyntheticSpectralFunction":
        """rho -> F(-rho), up to a constant sign."""
        c = tuple(((-1) ** k) * ck for k, ck in enumerate(self.exp_coeffs))
        return SyntheticSpectralFunction(
            zeros=tuple((-z, k) for z, k in self.zeros),
            poles=tuple((-p, k) for p, k in self.poles),
            exp_coeffs=c,
        )

    def log(self, rho):
        """A branch of log F (sum of principal logs of the factors)."""
        rho = np.asarray(rho, dtype=complex)
        out = np.polyval(self.exp_coeffs[::-1], rho)
        for z, k in self.zeros:
            out = out + k * np.log(rho - z)
        for p, k in self.poles:
            out = out - k * np.log(rho - p)
        return out

    def __call__(self, rho):
        return np.exp(self.log(rho))

    def log_derivative(self, rho):
        rho = np.asarray(rho, dtype=complex)
        c = np.array(self.exp_coeffs)
        dc = (np.arange(1, len(c)) * c[1:])[::-1] if len(c) > 1 else np.array([0j])
        out = np.polyval(dc, rho) + 0j
        for z, k in self.zeros:
            out = out + k / (rho - z)
        for p, k in self.poles:
            out = out - k / (rho - p)
        return out

    def derivative(self, rho):
        return self(rho) * self.log_derivative(rho)

    def count_inside(self, rect: Rectangle, h=None):
        """Sum of order * h over planted points strictly inside ``rect``."""
        h = h or (lambda r: 1.0)
        return sum(k * complex(h(loc)) for loc, k in self.planted if rect.contains(loc))


@dataclass
class ContourResult:
    value: complex
    error: float
    winding: int | None
    arg_change: float
    nodes: int


@dataclass
class ResidueReport:
    """Quadrature value versus the residue sum predicted from planted data."""

    integral: complex
    predicted: complex
    contour: str
    quadrature_error: float = 0.0
    parts: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return abs(self.integral - self.predicted)

    def passed(self, tol: float = 1e-8) -> bool:
        return self.residual < tol

    def to_dict(self) -> dict:
        return {
            "integral": [self.integral.real, self.integral.imag],
            "predicted": [self.predicted.real, self.predicted.imag],
            "residual": self.residual,
            "quadrature_error": self.quadrature_error,
            "contour": self.contour,
            "parts": {k: [complex(v).real, complex(v).imag] for k, v in self.parts.items()},
        }


def _check_margin(F, contour, margin: float):
    planted = getattr(F, "planted", None)
    if planted is None:
        return
    for loc, _ in planted:
        if contour.distance(loc) < margin:
            raise ContourViolation(f"planted point {loc} lies within {margin} of the contour")


def _segment_integral(f, a: complex, b: complex, tol: float):
    d = b - a

    def g(u):
        v = f(a + u * d) * d
        return np.array([v.real, v.imag])

    val, err = integrate.quad_vec(g, 0.0, 1.0, epsabs=tol, epsrel=tol, norm="max", limit=2000)
    return complex(val[0], val[1]), float(err)


def contour_integral(f, contour, tol: float = 1e-13) -> tuple[complex, float]:
    """Plain integral of f along the contour, with an error estimate."""
    total, err = 0j, 0.0
    for a, b in contour.segments():
        v, e = _segment_integral(f, a, b, tol)
        total += v
        err += e
    return total, err


def _arg_along(F, a: complex, b: complex, n0: int, max_depth: int = 40) -> tuple[float, int]:
    """Accumulated change of arg F from a to b with step refinement."""
    ts = np.linspace(0.0, 1.0, n0 + 1)
    vals = np.asarray(F(a + ts * (b - a)), dtype=complex)
    if np.any(vals == 0) or not np.all(np.isfinite(vals)):
        raise ContourViolation("F vanishes or is singular on the contour")
    total, nodes = 0.0, len(ts)
    stack = [(ts[i], ts[i + 1], vals[i], vals[i + 1], 0) for i in range(n0)]
    while stack:
        t0, t1, v0, v1, depth = stack.pop()
        step = float(np.angle(v1 / v0))
        if abs(step) <= ARG_STEP_LIMIT:
            total += step
            continue
        if depth >= max_depth:
            raise ContourViolation("argument increment could not be resolved; a zero or pole sits on the path")
        tm = 0.5 * (t0 + t1)
        vm = complex(F(a + tm * (b - a)))
        nodes += 1
        if vm == 0 or not np.isfinite(vm):
            raise ContourViolation("F vanishes or is singular on the contour")
        stack.append((t0, tm, v0, vm, depth + 1))
        stack.append((tm, t1, vm, v1, depth + 1))
    return total, nodes


def track_argument(F, contour, nodes_per_segment: int = 64) -> tuple[float, int]:
    """Total change of arg F along the contour and the number of evaluations."""
    total, count = 0.0, 0
    for a, b in contour.segments():
        d, n = _arg_along(F, a, b, nodes_per_segment)
        total += d
        count += n
    return total, count


def continuous_log(F, points: np.ndarray, anchor_log: complex | None = None) -> np.ndarray:
    """log F at successive points with a continuous imaginary part.

    Between consecutive points the increment is resolved by bisection, so
    the points may be spaced coarsely relative to the phase variation.
    """
    points = np.asarray(points, dtype=complex)
    vals = np.asarray(F(points), dtype=complex)
    if np.any(vals == 0) or not np.all(np.isfinite(vals)):
        raise ContourViolation("F vanishes or is singular on the path")
    out = np.empty(len(points), dtype=complex)
    base = complex(np.log(vals[0])) if anchor_log is None else complex(anchor_log)
    out[0] = base
    for i in range(1, len(points)):
        d, _ = _arg_along(F, points[i - 1], points[i], 1)
        out[i] = complex(math.log(abs(vals[i])), out[i - 1].imag + d)
    return out


def contour_log_derivative_integral(
    F,
    h,
    contour,
    tol: float = 1e-12,
    margin: float = DEFAULT_MARGIN,
    log_derivative=None,
    full: bool = False,
):
    """(1/2 pi i) * integral of h(rho) F'(rho)/F(rho) along the contour.

    ``F`` must expose ``log_derivative`` or one must be passed explicitly.
    For closed contours the winding number of F is also returned when
    ``full`` is set; it is the rounded arg change over 2 pi and a
    ContourViolation is raised if it is not close to an integer.
    """
    _check_margin(F, contour, margin)
    dlog = log_derivative or getattr(F, "log_derivative", None)
    if dlog is None:
        raise TypeError("F must provide log_derivative")
    val, err = contour_integral(lambda r: h(r) * dlog(r), contour, tol=tol * 2 * math.pi)
    val /= 2j * math.pi
    err /= 2 * math.pi
    arg_change, nodes = track_argument(F, contour)
    winding = None
    if isinstance(contour, Rectangle):
        w = arg_change / (2 * math.pi)
        winding = int(round(w))
        if abs(w - winding) > 1e-6:
            raise ContourViolation(f"non-integer winding {w}")
    if full:
        return ContourResult(val, err, winding, arg_change, nodes)
    return val


def _even_check(h):
    for r in (0.37 + 0.21j, 1.3 - 0.4j):
        if abs(h(r) - h(-r)) > 1e-12 * max(1.0, abs(h(r))):
            raise ValueError("test function must be even")


def verify_resonance_lemma(S: SyntheticSpectralFunction, h, sigma: float, T: float, tol: float = 1e-12, margin: float = DEFAULT_MARGIN) -> ResidueReport:
    """Argument principle for theta(rho) = S(-rho)/S(rho) on [-T, T] x [-sigma, 0].

    theta has zeros at the reflected resonances -r of S with Im r in
    (0, sigma) and at poles of S in the lower box; its poles are the zeros of
    S in the lower box (small eigenvalues) and the reflected unperturbed
    resonances.  With h even this gives

        sum h(zeros of S above) - sum h(poles of S above)
        - sum h(zeros of S below) + sum h(poles of S below)

    equal to the four edge integrals of h (log theta)' / (2 pi i).
    """
    _even_check(h)
    rect = Rectangle(-T, T, -sigma, 0.0)
    upper = Rectangle(-T, T, 0.0, sigma)
    Sr = S.reflected()
    theta = SyntheticSpectralFunction(
        zeros=Sr.zeros + S.poles,
        poles=S.zeros + Sr.poles,
        exp_coeffs=tuple(a - b for a, b in zip(*_pad(Sr.exp_coeffs, S.exp_coeffs))),
    )
    res = contour_log_derivative_integral(theta, h, rect, tol=tol, margin=margin, full=True)
    parts = {
        "perturbed_resonances": sum(k * complex(h(z)) for z, k in S.zeros if upper.contains(z)),
        "unperturbed_resonances": -sum(k * complex(h(p)) for p, k in S.poles if upper.contains(p)),
        "small_eigenvalues": -sum(k * complex(h(z)) for z, k in S.zeros if rect.contains(z)),
        "lower_poles": sum(k * complex(h(p)) for p, k in S.poles if rect.contains(p)),
    }
    return ResidueReport(res.value, sum(parts.values()), rect.describe(), res.error, parts)


def _pad(a, b):
    n = max(len(a), len(b))
    a = tuple(a) + (0j,) * (n - len(a))
    b = tuple(b) + (0j,) * (n - len(b))
    return a, b


def _pv_theta_term(S: SyntheticSpectralFunction, h, T: float, tol: float) -> tuple[complex, float]:
    """Principal value of integral_{-T}^{T} h (log theta)' d rho.

    Real-axis singularities of (log theta)' are simple poles; their
    principal parts are subtracted and integrated in closed form.
    """
    def dlog_theta(r):
        return _dlog_reflect(S, r) - S.log_derivative(r)

    sing = []
    for loc, k in S.planted:
        if abs(loc.imag) < 1e-14 and loc.real != 0.0:
            # S has order k at x: (log S)' ~ k/(r-x); (log S(-r))' ~ k/(r+x)
            sing.append((loc.real, -k))
            sing.append((-loc.real, k))
    sing = [(x, c) for x, c in sing if abs(x) < T]

    def reg(r):
        out = h(r) * dlog_theta(r)
        for x, c in sing:
            out = out - c * h(x) / (r - x)
        return out

    breaks = [x for x, _ in sing] + [0.0]
    pts = sorted({-T, T, *breaks})
    val, err = 0j, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = _segment_integral(reg, complex(a), complex(b), tol)
        val += v
        err += e
    for x, c in sing:
        val += c * complex(h(x)) * math.log((T - x) / (T + x))
    return val, err


def _dlog_reflect(S: SyntheticSpectralFunction, r):
    """d/d rho of log S(-rho)."""
    return -S.log_derivative(-np.asarray(r, dtype=complex))


def verify_truncated_formula(
    S: SyntheticSpectralFunction,
    h,
    sigma: float,
    T: float,
    delta_flag="auto",
    tol: float = 1e-12,
    margin: float = DEFAULT_MARGIN,
) -> ResidueReport:
    """Box identity for S on [-T, T] x [-sigma, 0] split at the real axis.

    Predicted side: sum over zeros minus poles of S strictly inside the lower
    box, plus real-axis points away from 0 at half weight (so a +-paired
    embedded eigenvalue counts fully), plus the half-weight contribution at
    rho = 0 from its pole order, i.e. -delta/2 * h(0) where delta is the pole
    order minus the zero order of S at 0.  ``delta_flag`` overrides that
    order; "auto" reads it from the planted data.

    Quadrature side: (1/2 pi i) times the three edges below the real axis of
    h S'/S, plus (1/4 pi i) times the principal-value integral of
    h (log theta)' over [-T, T].
    """
    _even_check(h)
    rect = Rectangle(-T, T, -sigma, 0.0)
    for loc, _ in S.planted:
        if abs(loc.imag) > 1e-14 and rect.distance(loc) < margin:
            raise ContourViolation(f"planted point {loc} lies within {margin} of the contour")
        if abs(loc.imag) <= 1e-14 and T - abs(loc.real) < margin:
            raise ContourViolation("real-axis point too close to the box corner")
    corners = rect.corners
    three = Polyline((corners[3], corners[0], corners[1], corners[2]))
    v3, e3 = contour_integral(lambda r: h(r) * S.log_derivative(r), three, tol=tol * 2 * math.pi)
    vt, et = _pv_theta_term(S, h, T, tol * 4 * math.pi)
    integral = v3 / (2j * math.pi) + vt / (4j * math.pi)

    order0 = sum(-k for loc, k in S.planted if loc == 0)  # pole order minus zero order
    delta = order0 if delta_flag == "auto" else int(delta_flag)
    inside = sum(k * complex(h(loc)) for loc, k in S.planted if rect.contains(loc))
    edge = sum(0.5 * k * complex(h(loc)) for loc, k in S.planted if abs(loc.imag) <= 1e-14 and loc != 0)
    parts = {"interior": inside, "real_axis": edge, "delta_term": -0.5 * delta * complex(h(0.0))}
    return ResidueReport(integral, sum(parts.values()), rect.describe() + ", top edge as principal value", e3 / (2 * math.pi) + et / (4 * math.pi), parts)


def random_configuration(rng: np.random.Generator, n_zeros: int = 5, n_poles: int = 3, box: Rectangle | None = None, max_order: int = 3, margin: float = 0.05):
    """A planted function with points scattered in and around ``box``.

    Points are drawn in a box twice the size and rejected if closer than
    ``margin`` to the contour or to each other.
    """
    box = box or Rectangle(-2.0, 2.0, -1.5, 1.5)
    cx, cy = 0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1)
    wx, wy = box.x1 - box.x0, box.y1 - box.y0
    pts: list[complex] = []
    while len(pts) < n_zeros + n_poles:
        p = complex(cx + wx * (rng.random() - 0.5) * 1.6, cy + wy * (rng.random() - 0.5) * 1.6)
        if box.distance(p) < margin or any(abs(p - q) < margin for q in pts):
            continue
        pts.append(p)
    orders = rng.integers(1, max_order + 1, size=len(pts))
    coeffs = tuple(rng.normal(scale=0.3, size=3) + 1j * rng.normal(scale=0.3, size=3))
    F = SyntheticSpectralFunction(
        zeros=tuple((pts[i], orders[i]) for i in range(n_zeros)),
        poles=tuple((pts[i], orders[i]) for i in range(n_zeros, n_zeros + n_poles)),
        exp_coeffs=coeffs,
    )
    return F, box


def run_random_suite(h, seed: int = 0, count: int = 100, tol: float = 1e-12) -> list[ResidueReport]:
    """Argument principle on ``count`` seeded random planted configurations."""
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(count):
        F, box = random_configuration(rng)
        res = contour_log_derivative_integral(F, h, box, tol=tol, margin=0.0, full=True)
        predicted = F.count_inside(box, h)
        winding = int(round(F.count_inside(box).real))
        rep = ResidueReport(res.value, predicted, box.describe(), res.error, {"winding_expected": winding, "winding_tracked": res.winding})
        reports.append(rep)
    return reports
