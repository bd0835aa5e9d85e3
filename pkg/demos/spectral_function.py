"""Tabulate S_alpha along the real axis and on the critical line at z0 = 2i, alpha = 1."""

import numpy as np

from point_scatterer.geometry import Point
from point_scatterer.greens import make_handle
from point_scatterer.maass import find_small_eigenvalues, load_maass_dataset, s_alpha_critical
from point_scatterer.orbits import enumerate_orbits

z0 = Point(0.0, 2.0)
data = load_maass_dataset()
handle = make_handle(z0, 1.0, enumerate_orbits(z0, 10.0), dataset=data)
print(f"beta = {handle.beta:.6f}, c0 = {handle.c0:.6f}, m = {handle.m}")

print("\n   s      S(s)          error estimate")
for s in np.linspace(1.1, 3.0, 8):
    val, err = handle.evaluate(s)
    print(f"{s:5.2f}  {val.real:12.6f}  {err:.1e}")

print("\n   r      Re S          Im S          arg S / pi")
for r in (1.0, 4.0, 7.0, 10.0, 15.0):
    v = s_alpha_critical(handle, r, data).value
    print(f"{r:5.1f}  {v.real:12.6f}  {v.imag:12.6f}  {np.angle(v) / np.pi:.4f}")

for root in find_small_eigenvalues(handle, (1e-3, 2.0)):
    print(f"\nsmall eigenvalue: s = {root.s:.10f}, lambda = {root.eigenvalue:.10f}")
