"""
Escaping sequences and where a map is wild
==========================================

Weighted distances compare two escaping sequences at the scale
|x|^(2-p). Around the points of a sequence one can ask whether the map covers
almost every value on small weighted balls.
"""

# %%
from qrlab import D_p, PointSequence, both_zero_check, make_zoo_map, mp_detect, mu_p_cover_check

X = PointSequence.from_generator("m*e1", 400)
Y = PointSequence.from_generator("m*e1 + e2/m", 400)
print("D_2(X, Y) =", D_p(X, Y, 2.0))
print(both_zero_check(X, Y, 2.0, eps=1e-2).verdict)

# %%
# On the real axis e^(z^2) is huge and nearly constant, so unit balls there
# miss most values. On the diagonal it takes almost every value near every
# point, except 0 and infinity.
sq = make_zoo_map("exp_square")
axis = PointSequence.from_generator("m*e1", 20)
diag = PointSequence.from_generator("m*(e1+e2)/sqrt(2)", 20)
for name, seq in (("axis", axis), ("diagonal", diag)):
    for p in (1.5, 2.0, 3.0):
        mp = mp_detect(sq, seq, p, 1.0)
        mu = mu_p_cover_check(sq, seq, p)
        print(f"{name:<9} p={p:g}: {mp.verdict:<28} {mu.verdict}")
