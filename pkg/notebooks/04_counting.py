"""
Counting a-points and the average counting function
===================================================

The average number of preimages in B(0, r), taken over the sphere, grows at
most like r^n for maps whose translates are normal. Two independent routes
estimate it: counting preimages of random values, and integrating the
spherical Jacobian.
"""

# %%
import math

from qrlab import afr_curve, afr_domain, afr_sphere, count_apoints, growth_fit, make_zoo_map

expo, wp = make_zoo_map("exponential"), make_zoo_map("elliptic")
print("solutions of e^z = 1 in B(0, 10):", count_apoints(expo, [0, 0], 10.0, 1.0).count)

# %%
for f, r in ((expo, 10.0), (wp, 10.0)):
    s, d = afr_sphere(f, r, samples=50_000), afr_domain(f, r)
    print(f"{f.label:<22} A({r:g}): sphere {s.value:.4f} +- {s.stderr:.4f}, domain {d.value:.4f}")

# %%
# Growth exponents: 1 for e^z, 2 for the doubly periodic map, whose limit
# A(r) / r^2 is (degree per cell) * pi / (cell area) = pi / 2.
for f, radii in ((expo, [2.5, 5, 10, 20, 40]), (wp, [1.25, 2.5, 5, 10, 20])):
    curve = afr_curve(f, radii, samples=50_000)
    fit = growth_fit(curve)
    print(f"{f.label:<22} s = {fit.exponent:.3f}")
print("A(20) / 400 for the elliptic map:", curve.values[-1] / 400, "vs", math.pi / 2)
