"""Print both sides of the trace formula, term by term, at the reference parameters."""

import sys

from point_scatterer.geometry import Point
from point_scatterer.greens import make_handle
from point_scatterer.maass import load_maass_dataset
from point_scatterer.orbits import enumerate_orbits
from point_scatterer.trace import trace_report
from point_scatterer.transforms import make_test_function

width = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
z0 = Point(0.0, 2.0)
data = load_maass_dataset()
handle = make_handle(z0, 1.0, enumerate_orbits(z0, 10.0), dataset=data)
rep = trace_report(make_test_function(width), handle, data)

print(f"perturbed sum      {rep.lhs_perturbed_sum: .12f}")
print(f"unperturbed sum    {rep.lhs_unperturbed_sum: .12f}")
print(f"smooth term        {rep.smooth_term: .12f}")
print(f"delta term         {rep.delta_term: .12f}")
print(f"scattering term    {rep.scattering_term: .12f}")
for k, v in rep.diffractive_sums.items():
    print(f"diffractive k={k}    {v: .12f}")
print(f"\nLHS {rep.lhs:.10f}   RHS {rep.rhs:.10f}")
print(f"|LHS - RHS| = {rep.residual:.2e}, error budget {rep.budget:.2e} (estimates)")
for w in rep.warnings:
    print("note:", w)
