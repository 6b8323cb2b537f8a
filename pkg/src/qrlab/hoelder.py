"""Finite-scale spherical Hoelder quotients and the normality criteria built on them.

All limsup quantities are estimated on a decreasing ladder of probe scales.
The point estimate ``q_hat`` is the larger of the two smallest-scale maxima;
the full per-scale profile is always kept.  Sampled sups are lower bounds for
the true sups, so verdicts read "consistent at this resolution" rather than
proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.stats import special_ortho_group

from .sphere import _fibonacci_s2, chordal
from .zoo import Mapping, p_rescale

YOSIDA_CONSISTENT = "Yosida-consistent at this resolution"
NON_YOSIDA = "non-Yosida evidence"
P_YOSIDA_CONSISTENT = "p-Yosida-consistent at this resolution"
NON_P_YOSIDA = "non-p-Yosida evidence"

DEFAULT_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)


class ProbeError(RuntimeError):
    """A probe evaluation produced no usable value."""


def alpha_of(n: int, K: float) -> float:
    """Hoelder exponent ``K^(1/(1-n))`` of a K-quasimeromorphic map of R^n."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if not K >= 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return 1.0 if K == 1 else float(K) ** (1.0 / (1.0 - n))


def unit_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic, seeded, near-evenly spread unit vectors in R^n."""
    rng = np.random.default_rng(seed)
    if n == 2:
        t = 2 * np.pi * (np.arange(count) + rng.random()) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        return _fibonacci_s2(count) @ Rotation.random(random_state=rng).as_matrix().T
    R = special_ortho_group.rvs(n, random_state=rng)
    G = rng.standard_normal((count, n))
    return (G / np.linalg.norm(G, axis=1, keepdims=True)) @ R.T


@dataclass(frozen=True)
class HoelderConfig:
    alpha: float
    ladder: tuple[float, ...] = DEFAULT_LADDER
    directions: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        lad = tuple(float(d) for d in self.ladder)
        if len(lad) < 2 or any(b >= a for a, b in zip(lad, lad[1:])) or lad[0] <= 0:
            raise ValueError("ladder must hold >= 2 strictly decreasing positive scales")
        if lad[-1] < 1e-8:
            raise ValueError("smallest ladder scale must be >= 1e-8")
        if self.directions < 8:
            raise ValueError("need at least 8 directions")
        object.__setattr__(self, "ladder", lad)

    @classmethod
    def for_map(cls, f: Mapping, ladder=DEFAULT_LADDER, directions: int | None = None, seed: int = 0):
        if directions is None:
            directions = 8 if f.dim == 2 else 32
        return cls(alpha_of(f.dim, f.distortion), tuple(ladder), directions, seed)

    def unit_vectors(self, n: int) -> np.ndarray:
        return unit_directions(n, self.directions, self.seed)


@dataclass
class QuotientProfile:
    point: np.ndarray
    scales: np.ndarray
    maxima: np.ndarray
    witnesses: np.ndarray
    q_hat: float

    def rows(self):
        return [(float(d), float(m), w.tolist()) for d, m, w in zip(self.scales, self.maxima, self.witnesses)]


def quotient_field(f: Mapping, X, cfg: HoelderConfig):
    """Per-scale maxima of ``q(f(x + d u), f(x)) / d^alpha`` for a batch of base points.

    Returns ``(maxima, witness_index)`` shaped ``(m, L)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = cfg.unit_vectors(f.dim)
    lad = np.array(cfg.ladder)
    base_v, base_inf = f.evaluate(X)
    H = lad[:, None, None] * U[None, :, :]                    # (L, D, n)
    probes = X[:, None, None, :] + H[None]                    # (m, L, D, n)
    pv, pinf = f.evaluate(probes)
    if np.isnan(pv).any() or np.isnan(base_v).any():
        bad = np.argwhere(np.isnan(pv).any(axis=-1))[0]
        raise ProbeError(f"{f.label}: evaluation failed at probe {probes[tuple(bad)].tolist()}")
    q = chordal(pv, pinf, base_v[:, None, None, :], base_inf[:, None, None])
    ratio = q / lad[None, :, None] ** cfg.alpha
    return ratio.max(axis=-1), ratio.argmax(axis=-1)


def _q_hat(maxima):
    return np.max(maxima[..., -2:], axis=-1)


def quotient_profile(f: Mapping, x, cfg: HoelderConfig) -> QuotientProfile:
    x = np.asarray(x, dtype=float)
    maxima, idx = quotient_field(f, x[None, :], cfg)
    U = cfg.unit_vectors(f.dim)
    return QuotientProfile(x, np.array(cfg.ladder), maxima[0], U[idx[0]], float(_q_hat(maxima)[0]))


def q_hat_field(f: Mapping, X, cfg: HoelderConfig, chunk: int = 4096) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty(len(X))
    for i in range(0, len(X), chunk):
        out[i:i + chunk] = _q_hat(quotient_field(f, X[i:i + chunk], cfg)[0])
    return out


def _trend(values, radii, ratio, floor, bins: int = 12):
    """Growth of the radial envelope of ``values``.

    Points are binned in log-radius; the per-bin maxima form the witness path.
    A least-squares line through log(max) against log(radius) gives the growth
    factor across the sampled radius range.
    """
    values = np.asarray(values, dtype=float)
    radii = np.asarray(radii, dtype=float)
    pos = radii > 0
    out = {"growth": 1.0, "slope": 0.0, "outer_max": float(values.max(initial=0.0)), "increasing": False}
    if pos.sum() < 3:
        return out
    lr = np.log(radii[pos])
    edges = np.linspace(lr.min(), lr.max() + 1e-12, bins + 1)
    which = np.clip(np.digitize(lr, edges) - 1, 0, bins - 1)
    vp = values[pos]
    env_r, env_v = [], []
    for b in range(bins):
        sel = which == b
        if sel.any() and vp[sel].max() > 0:
            j = np.argmax(vp[sel])
            env_r.append(lr[sel][j])
            env_v.append(np.log(vp[sel][j]))
    if len(env_r) < 3:
        return out
    slope = float(np.polyfit(env_r, env_v, 1)[0])
    growth = float(np.exp(slope * (lr.max() - lr.min())))
    outer = float(np.exp(env_v[-1]))
    out.update(growth=growth, slope=slope, outer_max=outer,
               increasing=bool(slope > 0 and growth >= ratio and outer >= floor))
    return out


@dataclass
class IndicatorResult:
    estimate: float
    witness: np.ndarray
    verdict: str
    values: np.ndarray = field(repr=False)
    trend: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.verdict in (YOSIDA_CONSISTENT, P_YOSIDA_CONSISTENT)


def yosida_indicator(f: Mapping, grid, cfg: HoelderConfig, threshold: float = 1e3,
                     trend_ratio: float = 10.0, trend_floor: float = 1.0) -> IndicatorResult:
    """Empirical ``sup Q_f`` over a grid.

    Evidence of unboundedness is a value above ``threshold``, or a radial
    envelope that grows at least ``trend_ratio``-fold across the grid (see
    :func:`_trend`) and ends above ``trend_floor``.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    qh = q_hat_field(f, grid, cfg)
    i = int(np.argmax(qh))
    tr = _trend(qh, np.linalg.norm(grid, axis=1), trend_ratio, trend_floor)
    bad = qh[i] > threshold or tr["increasing"]
    return IndicatorResult(float(qh[i]), grid[i], NON_YOSIDA if bad else YOSIDA_CONSISTENT, qh, tr)


def p_yosida_indicator(f: Mapping, p: float, anchors, cfg: HoelderConfig, threshold: float = 1e3,
                       trend_ratio: float = 10.0, trend_floor: float = 1.0) -> IndicatorResult:
    """Estimate ``limsup |a|^((2-p) alpha) Q_f(a)`` as the max over the top decile of ``|a|``."""
    if not p > 1:
        raise ValueError("p must be > 1")
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    r = np.linalg.norm(A, axis=1)
    if np.any(r == 0):
        raise ValueError("anchors must be nonzero")
    if np.any(np.diff(r) < -1e-12 * r[1:]):
        raise ValueError("anchors must be sorted by increasing |a|")
    if r[-1] / r[0] < 100:
        raise ValueError("anchor magnitudes must span a factor >= 100")
    vals = r ** ((2.0 - p) * cfg.alpha) * q_hat_field(f, A, cfg)
    k = max(1, len(vals) // 10)
    top = np.arange(len(vals) - k, len(vals))
    j = top[int(np.argmax(vals[top]))]
    tr = _trend(vals, r, trend_ratio, trend_floor)
    bad = vals[j] > threshold or tr["increasing"]
    return IndicatorResult(float(vals[j]), A[j], NON_P_YOSIDA if bad else P_YOSIDA_CONSISTENT, vals, tr)


def rescale_identity_check(f: Mapping, a, p: float, delta: float, directions) -> float:
    """Max relative gap between the quotient of ``f_a`` at the origin and
    ``|a|^((2-p) alpha)`` times the quotient of ``f`` at ``a``, at matched scales."""
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ValueError("anchor must be nonzero")
    U = unit_directions(f.dim, directions) if np.ndim(directions) == 0 else np.asarray(directions, float)
    alpha = f.alpha
    fa = p_rescale(f, a, p)
    s = fa.transform.scale
    H = delta * U
    v0, i0 = fa.evaluate(np.zeros(f.dim))
    v1, i1 = fa.evaluate(H)
    lhs = chordal(v1, i1, v0, i0) / delta**alpha
    # the base map sees the very same probe points a + s*(delta*u)
    w0, j0 = f.evaluate(a)
    w1, j1 = f.evaluate(a + s * H)
    na = float(np.linalg.norm(a))
    rhs = na ** ((2.0 - p) * alpha) * chordal(w1, j1, w0, j0) / (delta * s) ** alpha
    den = np.maximum(np.abs(lhs), np.abs(rhs))
    rel = np.where(den > 0, np.abs(lhs - rhs) / np.where(den > 0, den, 1.0), 0.0)
    return float(rel.max())


@dataclass
class NormalityConstant:
    value: float
    map_index: int
    x1: np.ndarray
    x2: np.ndarray


def normality_constant(family, G, probes, alpha: float) -> NormalityConstant:
    """Empirical ``sup q(f(x1), f(x2)) / |x1 - x2|^alpha`` over the family, ``x1 in G``, ``x2 in probes``."""
    family = list(family)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    if not family or G.size == 0 or P.size == 0:
        raise ValueError("family, G and probes must be non-empty")
    dist = np.linalg.norm(G[:, None, :] - P[None, :, :], axis=-1)
    keep = dist > 0
    best = NormalityConstant(0.0, 0, G[0], P[0])
    for k, f in enumerate(family):
        gv, gi = f.evaluate(G)
        pv, pi = f.evaluate(P)
        q = chordal(gv[:, None, :], gi[:, None], pv[None, :, :], pi[None, :])
        ratio = np.where(keep, q / np.where(keep, dist, 1.0) ** alpha, 0.0)
        i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[i, j] > best.value:
            best = NormalityConstant(float(ratio[i, j]), k, G[i], P[j])
    return best


@dataclass
class LimitCheck:
    holds: bool
    slack: float
    lhs: float
    rhs: float
    qf_bound: float


def limit_inequality_check(f: Mapping, p: float, anchors, x, stage: int, cfg: HoelderConfig,
                           qf_bound: float | None = None, rtol: float = 1e-9) -> LimitCheck:
    """Finite-stage form of ``Q_g(x) <= Q_f limsup |e_a + |a|^(1-p) x|^((p-2) alpha)``.

    The left side is the quotient of the rescaled map ``f(a_n + |a_n|^(2-p) y)`` at ``x``.
    Unless ``qf_bound`` is given, ``Q_f`` is estimated as the max over stages
    ``k >= stage`` of ``|b_k|^((2-p) alpha) Q_f(b_k)`` with ``b_k = a_k + |a_k|^(2-p) x``,
    each measured at the scale matched to its stage.
    """
    if not p > 1:
        raise ValueError("p must be > 1")
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    x = np.asarray(x, dtype=float)
    alpha = cfg.alpha
    fn = p_rescale(f, A[stage], p)
    lhs = quotient_profile(fn, x, cfg).q_hat
    if qf_bound is None:
        qf_bound = 0.0
        for a in A[stage:]:
            s = float(np.linalg.norm(a)) ** (2.0 - p)
            b = a + s * x
            scaled = HoelderConfig(alpha, tuple(s * d for d in cfg.ladder), cfg.directions, cfg.seed) \
                if s * cfg.ladder[-1] >= 1e-8 else cfg
            qb = quotient_profile(f, b, scaled).q_hat * s**alpha
            # qb is |a|^((2-p) alpha) Q_f(b); convert to the |b| weighting
            qf_bound = max(qf_bound, qb * (np.linalg.norm(b) / np.linalg.norm(a)) ** ((2.0 - p) * alpha))
    a = A[stage]
    na = float(np.linalg.norm(a))
    factor = float(np.linalg.norm(a / na + na ** (1.0 - p) * x)) ** ((p - 2.0) * alpha)
    rhs = qf_bound * factor
    slack = rhs - lhs
    return LimitCheck(bool(slack >= -rtol * max(1.0, abs(rhs))), float(slack), float(lhs), float(rhs), float(qf_bound))
