"""Compare the two evaluations of the line integral of h' log S while K and L grow."""

from point_scatterer.geometry import Point
from point_scatterer.greens import make_handle
from point_scatterer.orbits import enumerate_orbits
from point_scatterer.trace import choose_sigma, geometric_identity_check
from point_scatterer.transforms import make_test_function

z0 = Point(0.0, 2.0)
handle = make_handle(z0, 1.0, enumerate_orbits(z0, 12.0))
h = make_test_function(1.0)
sigma = choose_sigma(handle).sigma
print(f"sigma = {sigma}")
print(" K   L   log-derivative      diffractive         residual   budget")
for K, L in ((3, 6.0), (4, 8.0), (5, 10.0), (6, 12.0)):
    chk = geometric_identity_check(h, handle, sigma, K=K, L=L)
    print(f"{K:2d} {L:4.0f}   {chk.log_side.value:.12f}   {chk.diffractive.total:.12f}   {chk.residual:.1e}    {chk.budget:.1e}")
