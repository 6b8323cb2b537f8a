"""Counting functions, the average counting function A_f(r) and oscillation profiles.

``A_f(r)`` is estimated by two independent routes: a value-side Monte Carlo
average of ``n(0, r, y)`` under the normalised chordal measure, and a
domain-side quasi-Monte Carlo integral of the spherical Jacobian over
``B(0, r)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma
from scipy.stats import norm, qmc

from .argument import BoundaryMarginError
from .sphere import ExtendedPoint, chordal_measure_sample, lambda_n, stereographic
from .zoo import Mapping, argument_principle_count, enumerate_apoints

JITTER = 1e-5


@dataclass(frozen=True)
class CountingSample:
    center: tuple[float, ...]
    radius: float
    value: ExtendedPoint
    count: int
    method: str
    jittered: bool = False


def _as_value(a, dim):
    if a is None:
        return ExtendedPoint.inf(dim)
    if isinstance(a, ExtendedPoint):
        return a
    return ExtendedPoint.of(complex(a)) if np.ndim(a) == 0 else ExtendedPoint.of(a)


def count_apoints(f: Mapping, x, r: float, a, method: str = "auto") -> CountingSample:
    """Multiplicity-weighted number of solutions of ``f = a`` in ``B(x, r)``.

    ``method`` is ``"analytic"`` (a-point enumeration), ``"argument"``
    (winding of the map along the circle, plane maps only) or ``"auto"``.
    ``a=None`` stands for infinity.
    """
    x = np.asarray(x, dtype=float)
    a = _as_value(a, f.dim)
    if not r > 0:
        raise ValueError("radius must be positive")
    if method == "auto":
        method = "analytic" if f.apoints is not None else "argument"
    if method == "analytic":
        n = sum(m for _, m in enumerate_apoints(f, a, x, r))
    elif method == "argument":
        n = argument_principle_count(f, a, x, r)
    else:
        raise ValueError(f"unknown counting method {method!r}")
    if n < 0:
        raise ArithmeticError(f"negative count {n}: the map has poles in the ball")
    return CountingSample(tuple(x.tolist()), float(r), a, int(n), method)


def multiplicity_sum(f: Mapping, y, a, r: float, method: str = "auto") -> int:
    """``N(f, y, B(a, r))``: total local index of the preimages of ``y`` in ``B(a, r)``."""
    return count_apoints(f, a, r, y, method).count


def _counts(f: Mapping, Y: np.ndarray, at_inf: np.ndarray, center, radii, rng=None):
    """Counts for many values and radii; returns ``(counts, jitter_count)``."""
    radii = np.asarray(radii, dtype=float)
    if f.counter is not None:
        return f.counter(Y, at_inf, np.asarray(center, dtype=float), radii), 0
    out = np.zeros((len(Y), radii.size), dtype=int)
    jitters = 0
    rng = rng or np.random.default_rng(0)
    for i in range(len(Y)):
        y = Y[i]
        for _ in range(8):
            v = ExtendedPoint.inf(f.dim) if at_inf[i] else ExtendedPoint.of(y)
            try:
                out[i] = [count_apoints(f, center, r, v).count for r in radii]
                break
            except BoundaryMarginError:
                jitters += 1
                y = y + JITTER * rng.uniform(-1, 1, size=f.dim) / np.sqrt(f.dim)
        else:
            raise BoundaryMarginError(f"value {Y[i]} stays on the boundary image after jitter")
    return out, jitters


@dataclass
class AfrEstimate:
    value: float
    stderr: float
    samples: int
    seed: int
    method: str
    jitters: int = 0


def _sphere_counts(f: Mapping, radii, samples: int, seed: int, center=None):
    rng = np.random.default_rng(seed)
    Y = chordal_measure_sample(samples, rng, f.dim)
    center = np.zeros(f.dim) if center is None else np.asarray(center, dtype=float)
    return _counts(f, Y, np.zeros(samples, dtype=bool), center, radii, rng)


def afr_sphere(f: Mapping, r: float, samples: int = 100_000, seed: int = 0) -> AfrEstimate:
    """``A_f(r)`` as the mean of ``n(0, r, y)`` with ``y`` drawn from the normalised chordal measure."""
    if not r > 0:
        raise ValueError("radius must be positive")
    c, jit = _sphere_counts(f, [r], samples, seed)
    c = c[:, 0]
    return AfrEstimate(float(c.mean()), float(c.std(ddof=1) / np.sqrt(samples)), samples, seed,
                       "sphere-integral", jit)


def _spherical_jacobian(f: Mapping):
    if f.spherical_jacobian is not None:
        return f.spherical_jacobian
    if f.jacobian is None:
        raise ValueError(f"{f.label} has no Jacobian evaluator")

    def sph(X):
        v, inf = f.evaluate(X)
        with np.errstate(all="ignore"):
            out = f.jacobian(X) / (1.0 + np.sum(v**2, axis=-1)) ** f.dim
        return np.where(inf | ~np.isfinite(out), 0.0, out)
    return sph


def _ball_qmc(n: int, samples: int, seed: int, shifts: int):
    """``shifts`` independent scrambled Sobol sets mapped to the unit ball (volume preserving)."""
    m = int(np.ceil(np.log2(max(samples // shifts, 2))))
    sets = []
    for s in range(shifts):
        rng = np.random.default_rng([seed, s])
        if n == 2:
            u = qmc.Sobol(2, scramble=True, seed=rng).random_base2(m)
            rad, th = np.sqrt(u[:, 0]), 2 * np.pi * u[:, 1]
            sets.append(np.column_stack([rad * np.cos(th), rad * np.sin(th)]))
        else:
            # radius from the first coordinate, direction from n Gaussian coordinates
            u = qmc.Sobol(n + 1, scramble=True, seed=rng).random_base2(m)
            g = norm.ppf(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            sets.append(g * u[:, :1] ** (1.0 / n))
    return sets


def _unit_ball_volume(n: int) -> float:
    return float(np.pi ** (n / 2) / gamma(n / 2 + 1))


def afr_local(f: Mapping, x, r: float, samples: int = 100_000, seed: int = 0,
              shifts: int = 8) -> AfrEstimate:
    """``A_f(x, r) = (1/lambda_n) * integral over B(x, r) of J(y, f) / (1 + |f(y)|^2)^n``.

    Samples are uniform in the ball, so accuracy degrades when the integrand
    is concentrated in a small part of it (e.g. a rational map on a huge disk).
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    sph = _spherical_jacobian(f)
    x = np.asarray(x, dtype=float)
    vol = _unit_ball_volume(f.dim) * r**f.dim
    ests = []
    for U in _ball_qmc(f.dim, samples, seed, shifts):
        vals = sph(x + r * U)
        ests.append(vol * float(np.mean(np.where(np.isfinite(vals), vals, 0.0))) / lambda_n(f.dim))
    ests = np.array(ests)
    return AfrEstimate(float(ests.mean()), float(ests.std(ddof=1) / np.sqrt(len(ests))),
                       int(shifts * len(U)), seed, "domain-integral")


def afr_domain(f: Mapping, r: float, samples: int = 100_000, seed: int = 0, shifts: int = 8) -> AfrEstimate:
    """Domain-side ``A_f(r)``: :func:`afr_local` centred at the origin."""
    return afr_local(f, np.zeros(f.dim), r, samples, seed, shifts)


@dataclass
class AfrCurve:
    radii: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    method: str
    samples: int
    seed: int
    fit: dict = field(default_factory=dict)


def dyadic_radii(r0: float, count: int) -> np.ndarray:
    return r0 * 2.0 ** np.arange(count)


def afr_curve(f: Mapping, radii, method: str = "sphere", samples: int = 100_000, seed: int = 0) -> AfrCurve:
    """``A_f`` over a radius grid.  The sphere route reuses one value sample for every
    radius, so the curve is non-decreasing exactly."""
    radii = np.sort(np.asarray(radii, dtype=float))
    if method == "sphere":
        c, _ = _sphere_counts(f, radii, samples, seed)
        vals = c.mean(axis=0)
        se = c.std(axis=0, ddof=1) / np.sqrt(samples)
        tag = "sphere-integral"
    elif method == "domain":
        est = [afr_domain(f, r, samples, seed) for r in radii]
        vals = np.array([e.value for e in est])
        se = np.array([e.stderr for e in est])
        tag = "domain-integral"
    else:
        raise ValueError(f"unknown method {method!r}")
    return AfrCurve(radii, vals, se, tag, samples, seed)


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    prefactor: float
    residual: float
    used: int


def growth_fit(curve: AfrCurve) -> GrowthFit:
    """Least-squares fit of ``log A = log C + s log r`` over the upper half of the radius grid."""
    r, A = np.asarray(curve.radii, dtype=float), np.asarray(curve.values, dtype=float)
    if r.size < 5 or r.max() / r.min() < 8:
        raise ValueError("need >= 5 radii spanning a factor >= 8")
    upper = np.arange(r.size) >= r.size // 2
    use = upper & (A > 0)
    if use.sum() < 3:
        raise ValueError(f"only {int(use.sum())} usable points (A > 0) in the upper half")
    lr, lA = np.log(r[use]), np.log(A[use])
    (s, lc), res, *_ = np.polyfit(lr, lA, 1, full=True)
    resid = float(np.sqrt(res[0] / use.sum())) if res.size else 0.0
    fit = GrowthFit(float(s), float(np.exp(lc)), resid, int(use.sum()))
    curve.fit = {"exponent": fit.exponent, "prefactor": fit.prefactor, "residual": fit.residual}
    return fit


# ---------------------------------------------------------------------------
# oscillation


def _sphere_diameter(E: np.ndarray) -> np.ndarray:
    """Chordal diameters of stacked embedded sets ``(..., k, n+1)``."""
    g = np.einsum("...ik,...jk->...ij", E, E)
    return np.sqrt(np.clip(2.0 - 2.0 * g.min(axis=(-1, -2)), 0.0, 4.0)) / 2.0


def _closed_ball_pattern(n: int, per_radius: int, seed: int) -> np.ndarray:
    from .sequences import ball_samples
    U = ball_samples(n, per_radius, seed)
    rim = U[np.linalg.norm(U, axis=1) > 0.999]
    return np.vstack([U, rim])


def oscillation_profile(f: Mapping, radii, grid, per_radius: int = 48, seed: int = 0,
                        chunk: int = 64) -> np.ndarray:
    """Per radius, the sup over ``grid`` of the sampled chordal diameter of ``f(B(x, r))``.

    The sample set at radius ``r_k`` is the union of the scaled patterns for
    all ``r_j <= r_k``, so each row is non-decreasing in ``r``.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    return _diameters(f, radii, grid, per_radius, seed, chunk).max(axis=0)


def _diameters(f, radii, grid, per_radius, seed, chunk):
    U = _closed_ball_pattern(f.dim, per_radius, seed)
    out = np.zeros((len(grid), radii.size))
    for i in range(0, len(grid), chunk):
        G = grid[i:i + chunk]
        E = np.zeros((len(G), 0, f.dim + 1))
        for j, r in enumerate(radii):
            v, inf = f.evaluate(G[:, None, :] + r * U[None])
            new = stereographic(v.reshape(-1, f.dim), inf.ravel()).reshape(len(G), len(U), -1)
            E = np.concatenate([E, new], axis=1)
            out[i:i + chunk, j] = _sphere_diameter(E)
    return out


def min_oscillation(f: Mapping, r: float, grid, per_radius: int = 48, seed: int = 0,
                    chunk: int = 64) -> tuple[float, np.ndarray]:
    """``inf`` over ``grid`` of the sampled chordal diameter of ``f(B(x, r))``, with its location."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    d = _diameters(f, np.array([float(r)]), grid, per_radius, seed, chunk)[:, 0]
    i = int(np.argmin(d))
    return float(d[i]), grid[i]


@dataclass
class MultiplicitySweep:
    max_count: int
    argmax: tuple
    counts: np.ndarray


def multiplicity_sweep(f: Mapping, r: float, samples: int, box: float, seed: int = 0) -> MultiplicitySweep:
    """Max of ``N(f, y, B(a, r))`` over random centres ``a`` in ``[-box, box]^n`` and
    values ``y`` from the chordal measure.  Sample ``k`` depends only on ``(seed, k)``."""
    A = np.empty((samples, f.dim))
    Y = np.empty((samples, f.dim))
    for k in range(samples):
        g = np.random.default_rng([seed, k])
        A[k] = g.uniform(-box, box, f.dim)
        Y[k] = chordal_measure_sample(1, g, f.dim)[0]
    counts = np.empty(samples, dtype=int)
    for k in range(samples):
        if f.counter is not None:
            counts[k] = f.counter(Y[k:k + 1], np.zeros(1, bool), A[k], [r])[0, 0]
        else:
            counts[k] = multiplicity_sum(f, Y[k], A[k], r)
    k = int(np.argmax(counts))
    return MultiplicitySweep(int(counts[k]), (A[k].tolist(), Y[k].tolist()), counts)
