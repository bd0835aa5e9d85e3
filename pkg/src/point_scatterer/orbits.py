"""Enumeration of PSL(2,Z) elements by displacement of a base point.

Elements are grouped by bottom row (c, d).  Every element with d(z0, g z0) <= R
satisfies |c z0 + d|^2 <= 2 cosh R, because cosh d(z0, g z0) is at least
(|c z0 + d|^2 + |c z0 + d|^-2) / 2.  Each admissible coprime bottom row fixes a
coset {T^k g0}, and the displacement is a quadratic in k, so the admissible k
form an explicit integer interval.  This gives an exhaustive enumeration
without the cusp blind spot a generator walk with a distance prune would have.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import GroupElement, Point, canonicalize, mobius_apply

__all__ = [
    "CapacityError",
    "CacheError",
    "OrbitTable",
    "DEFAULT_HARD_CAP",
    "CACHE_FORMAT_VERSION",
    "stabilizer",
    "pair_displacements",
    "enumerate_orbits",
    "orbit_lengths",
    "expected_count",
    "save_table",
    "load_table",
    "cache_key",
    "cached_orbits",
]

DEFAULT_HARD_CAP = 10_000_000
CACHE_FORMAT_VERSION = 1
_STAB_TOL = 1e-9


class CapacityError(RuntimeError):
    """The requested radius would exceed the configured entry cap."""


class CacheError(ValueError):
    """A cache file is malformed or fails its consistency checks."""


def orbit_lengths(entries: np.ndarray, z0: Point) -> np.ndarray:
    """Displacements d(z0, g z0) for rows (a, b, c, d) of ``entries``."""
    e = np.asarray(entries, dtype=float).reshape(-1, 4)
    w = z0.z
    poly = e[:, 1] + (e[:, 0] - e[:, 3]) * w - e[:, 2] * w * w
    return 2.0 * np.arcsinh(np.abs(poly) / (2.0 * z0.y))


def expected_count(radius: float) -> float:
    """Leading-order count of group elements with displacement <= radius.

    The translates of the fundamental domain (area pi/3) tile the plane, so the
    count is area(ball)/(pi/3) whatever the stabilizer of the base point.
    """
    return 6.0 * (math.cosh(radius) - 1.0)


def _raw_enumerate(z0: Point, radius: float, cap: int, w: Point | None = None) -> np.ndarray:
    """Rows (a, b, c, d), up to sign, with d(z0, g w) <= radius (w defaults to z0)."""
    if w is None:
        w = z0
    x0, y0 = w.x, w.y
    # |c w + d|^2 <= 2 (y_w / y_z) cosh R, from cosh d >= y_z / (2 Im g w)
    bound = 2.0 * (w.y / z0.y) * math.cosh(radius) * (1.0 + 1e-12) + 1e-12
    target = 4.0 * z0.y * math.sinh(0.5 * radius) ** 2 * (1.0 + 1e-12) + 1e-300
    blocks = []
    total = 0
    cmax = int(math.floor(math.sqrt(bound) / y0))
    for c in range(0, cmax + 1):
        rem = bound - (c * y0) ** 2
        if rem < 0:
            continue
        half = math.sqrt(rem)
        if c == 0:
            ds = np.array([1], dtype=np.int64)
        else:
            ds = np.arange(math.ceil(-c * x0 - half), math.floor(-c * x0 + half) + 1, dtype=np.int64)
            ds = ds[np.gcd(ds, c) == 1]
        if ds.size == 0:
            continue
        if c == 0:
            a0 = np.array([1], dtype=np.int64)
            b0 = np.array([0], dtype=np.int64)
        elif c == 1:
            a0 = np.zeros_like(ds)
            b0 = -np.ones_like(ds)
        else:
            a0 = np.array([pow(int(d), -1, c) for d in ds], dtype=np.int64)
            b0 = (a0 * ds - 1) // c
        # g0 w = X + iY with Y = y_w/|c w + d|^2
        den = (c * x0 + ds) ** 2 + (c * y0) ** 2
        Y = y0 / den
        zc = complex(x0, y0)
        X = ((a0 * zc + b0) / (c * zc + ds)).real
        # |g w + k - z0|^2 <= 4 y_z Y sinh^2(R/2) is a quadratic condition on k
        slack = target * Y - (Y - z0.y) ** 2
        ok = slack >= 0
        if not ok.any():
            continue
        ds, a0, b0, X, slack = ds[ok], a0[ok], b0[ok], X[ok], slack[ok]
        width = np.sqrt(slack)
        kmin = np.ceil(z0.x - X - width).astype(np.int64)
        kmax = np.floor(z0.x - X + width).astype(np.int64)
        n = np.maximum(kmax - kmin + 1, 0)
        total += int(n.sum())
        if total > cap:
            raise CapacityError(f"orbit enumeration exceeded the hard cap of {cap} entries")
        rep = np.repeat(np.arange(ds.size), n)
        offs = np.arange(rep.size) - np.repeat(np.cumsum(n) - n, n)
        k = kmin[rep] + offs
        block = np.empty((rep.size, 4), dtype=np.int64)
        block[:, 0] = a0[rep] + k * c
        block[:, 1] = b0[rep] + k * ds[rep]
        block[:, 2] = c
        block[:, 3] = ds[rep]
        blocks.append(block)
    if not blocks:
        return np.zeros((0, 4), dtype=np.int64)
    return np.concatenate(blocks)


def _canonical_rows(e: np.ndarray) -> np.ndarray:
    flip = (e[:, 2] < 0) | ((e[:, 2] == 0) & (e[:, 0] < 0))
    e = e.copy()
    e[flip] *= -1
    return e


def pair_displacements(z: Point, w: Point, radius: float, cap: int = DEFAULT_HARD_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Canonical elements g with d(z, g w) <= radius and the distances, sorted."""
    raw = _canonical_rows(_raw_enumerate(z, radius, cap, w))
    if raw.size == 0:
        return raw, np.zeros(0)
    e = raw.astype(float)
    zc, wc = z.z, w.z
    gw = (e[:, 0] * wc + e[:, 1]) / (e[:, 2] * wc + e[:, 3])
    im = w.y / np.abs(e[:, 2] * wc + e[:, 3]) ** 2
    dist = 2.0 * np.arcsinh(np.abs(gw - zc) / (2.0 * np.sqrt(z.y * im)))
    keep = dist <= radius
    raw, dist = raw[keep], dist[keep]
    order = np.lexsort((raw[:, 3], raw[:, 2], raw[:, 1], raw[:, 0], dist))
    return raw[order], dist[order]


def stabilizer(z0: Point) -> tuple[list[GroupElement], int]:
    """All elements fixing z0 (identity included) and their count m."""
    raw = _canonical_rows(_raw_enumerate(z0, 1e-6, DEFAULT_HARD_CAP))
    lens = orbit_lengths(raw, z0)
    elems = []
    for row, l in zip(raw, lens):
        if l < _STAB_TOL:
            g = canonicalize(row)
            w = mobius_apply(g, z0)
            if abs(w.z - z0.z) <= 1e-12 * max(1.0, abs(z0.z)):
                elems.append(g)
    elems = sorted(set(elems))
    return elems, len(elems)


@dataclass(frozen=True)
class OrbitTable:
    """Elements g outside the stabilizer with d(z0, g z0) <= radius.

    ``entries`` is an (n, 4) integer array of canonical matrices and
    ``lengths`` the matching displacements, sorted by (length, a, b, c, d).
    """

    z0: Point
    radius: float
    entries: np.ndarray
    lengths: np.ndarray
    stabilizer_order: int
    stabilizer_elements: tuple = field(default=())

    def __len__(self) -> int:
        return int(self.lengths.size)

    def elements(self) -> list[GroupElement]:
        return [GroupElement(*map(int, row)) for row in self.entries]

    def restricted(self, radius: float) -> "OrbitTable":
        """Sub-table with lengths <= radius (radius must not exceed this table's)."""
        if radius > self.radius + 1e-15:
            raise ValueError("cannot extend a table by restriction")
        n = int(np.searchsorted(self.lengths, radius, side="right"))
        return OrbitTable(self.z0, float(radius), self.entries[:n], self.lengths[:n], self.stabilizer_order, self.stabilizer_elements)

    def distinct_lengths(self, rel_tol: float = 1e-11) -> tuple[np.ndarray, np.ndarray]:
        """Distinct displacement values and their multiplicities."""
        if self.lengths.size == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        l = self.lengths
        new = np.empty(l.size, dtype=bool)
        new[0] = True
        new[1:] = np.diff(l) > rel_tol * l[1:]
        starts = np.nonzero(new)[0]
        counts = np.diff(np.append(starts, l.size))
        return l[starts].copy(), counts.astype(np.int64)


def enumerate_orbits(z0: Point, radius: float, cap: int = DEFAULT_HARD_CAP) -> OrbitTable:
    """Complete, deterministically ordered table of elements with 0 < l <= radius."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    stab, m = stabilizer(z0)
    if expected_count(radius) > 2 * cap:
        raise CapacityError(
            f"radius {radius} implies roughly {expected_count(radius):.3g} entries, above the cap {cap}"
        )
    raw = _canonical_rows(_raw_enumerate(z0, radius, cap))
    lens = orbit_lengths(raw, z0)
    keep = (lens >= _STAB_TOL) & (lens <= radius)
    raw, lens = raw[keep], lens[keep]
    order = np.lexsort((raw[:, 3], raw[:, 2], raw[:, 1], raw[:, 0], lens))
    raw, lens = raw[order], lens[order]
    if raw.shape[0] > 1:
        dup = np.all(raw[1:] == raw[:-1], axis=1)
        if dup.any():  # pragma: no cover - cosets are disjoint by construction
            raise RuntimeError("duplicate elements in enumeration")
    return OrbitTable(z0, float(radius), raw, lens, m, tuple(stab))


# ---------------------------------------------------------------- cache


def cache_key(z0: Point, radius: float) -> str:
    payload = json.dumps(
        {"kind": "orbits", "format": CACHE_FORMAT_VERSION, "code": __version__, "z0": [z0.x.hex(), z0.y.hex()], "R": float(radius).hex()},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def save_table(table: OrbitTable, path) -> None:
    header = {
        "format": "orbit-table",
        "version": CACHE_FORMAT_VERSION,
        "code_version": __version__,
        "z0": [table.z0.x, table.z0.y],
        "radius": table.radius,
        "stabilizer_order": table.stabilizer_order,
        "count": len(table),
    }
    buf = io.BytesIO()
    np.savez(
        buf,
        header=np.array(json.dumps(header, sort_keys=True)),
        entries=table.entries.astype(np.int64),
        lengths=table.lengths.astype(np.float64),
        stabilizer=np.array([g.as_tuple() for g in table.stabilizer_elements], dtype=np.int64).reshape(-1, 4),
    )
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def load_table(path) -> OrbitTable:
    try:
        with np.load(Path(path), allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            entries = data["entries"].astype(np.int64)
            lengths = data["lengths"].astype(np.float64)
            stab_rows = data["stabilizer"].astype(np.int64)
    except (OSError, KeyError, ValueError) as exc:
        raise CacheError(f"unreadable orbit cache {path}: {exc}") from exc
    if header.get("format") != "orbit-table" or header.get("version") != CACHE_FORMAT_VERSION:
        raise CacheError(f"unsupported cache format in {path}")
    if header["count"] != entries.shape[0] or entries.shape[0] != lengths.size:
        raise CacheError("cache entry count does not match header")
    z0 = Point(*header["z0"])
    det = entries[:, 0] * entries[:, 3] - entries[:, 1] * entries[:, 2]
    if entries.size and not np.all(det == 1):
        raise CacheError("cache contains matrices with determinant != 1")
    recomputed = orbit_lengths(entries, z0)
    if entries.size and np.max(np.abs(recomputed - lengths)) > 1e-12:
        raise CacheError("stored lengths disagree with recomputed lengths")
    stab = tuple(GroupElement(*map(int, r)) for r in stab_rows)
    return OrbitTable(z0, float(header["radius"]), entries, recomputed, int(header["stabilizer_order"]), stab)


def cached_orbits(z0: Point, radius: float, cache_dir=None, cap: int = DEFAULT_HARD_CAP) -> tuple[OrbitTable, bool]:
    """Enumerate with an on-disk cache; returns (table, served_from_cache)."""
    if cache_dir is None:
        return enumerate_orbits(z0, radius, cap), False
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"orbits-{cache_key(z0, radius)}.npz"
    if path.exists():
        return load_table(path), True
    table = enumerate_orbits(z0, radius, cap)
    save_table(table, path)
    return table, False
