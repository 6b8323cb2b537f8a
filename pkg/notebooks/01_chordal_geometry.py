"""
Chordal geometry on the compactified plane
==========================================

Distances between values of meromorphic and quasimeromorphic maps are
measured on the sphere, so infinity is an ordinary point.
"""

# %%
# The chordal distance is half the Euclidean distance between stereographic
# images on the unit sphere. Zero and infinity are antipodal.
import numpy as np

from qrlab import ExtendedPoint, chordal_distance, lambda_n, sphere_grid
from qrlab.sphere import stereographic

zero, inf = ExtendedPoint.of(0, 0), ExtendedPoint.inf(2)
print("q(0, inf)  =", chordal_distance(zero, inf))
print("q(1, -1)   =", chordal_distance(ExtendedPoint.of(1, 0), ExtendedPoint.of(-1, 0)))
print("q(1e8, inf) =", chordal_distance(ExtendedPoint.of(1e8, 0), inf))

# %%
# Value grids used by the covering checks are near-uniform on the sphere.
vals, at_inf = sphere_grid(500, seed=0)
E = stereographic(vals, at_inf)
print("mean of embedded grid:", np.round(E.mean(axis=0), 4))

# %%
# The total chordal area of R^n, lambda_n, normalises every counting average.
for n in (2, 3, 4):
    print(f"lambda_{n} = {lambda_n(n):.10f}")
