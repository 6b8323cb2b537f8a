"""
The map zoo and finite-scale Hoelder quotients
==============================================

A family is normal when its spherical Hoelder quotients stay bounded. For a
single map the sup of the quotient over the plane separates maps whose
translates form a normal family from maps whose translates do not.
"""

# %%
import numpy as np

from qrlab import HoelderConfig, list_zoo, make_zoo_map, quotient_profile, yosida_indicator

for entry in list_zoo():
    print(f"{entry['kind']:<12} n={entry['dim']} K={entry['K']:g}")

# %%
# The quotient profile over the probe ladder. For e^z the smallest scales
# approach the spherical derivative 1 / (2 cosh x).
expo = make_zoo_map("exponential")
cfg = HoelderConfig.for_map(expo)
prof = quotient_profile(expo, [0.0, 0.0], cfg)
for scale, value, _ in prof.rows():
    print(f"scale {scale:.0e}: {value:.6f}")

# %%
# Sup over a grid: bounded for e^z, growing along the diagonals for e^(z^2).
t = np.arange(-20, 20.25, 0.5)
grid = np.stack(np.meshgrid(t, t), -1).reshape(-1, 2)
for kind in ("exponential", "elliptic", "exp_square"):
    f = make_zoo_map(kind)
    res = yosida_indicator(f, grid, HoelderConfig.for_map(f))
    print(f"{kind:<12} sup {res.estimate:9.4f}  growth {res.trend['growth']:7.2f}  {res.verdict}")
