"""Chordal geometry on the compactified space R^n u {inf}.

Points at infinity are a tagged alternative: an :class:`ExtendedPoint` has
``coords is None`` rather than IEEE infinities inside a coordinate vector.
Vectorised helpers work on *batches*, i.e. pairs ``(values, at_inf)`` where
``values`` has shape ``(m, n)`` (rows at infinity hold zeros) and ``at_inf``
is a boolean mask of shape ``(m,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.special import gammaln
from scipy.stats import beta, special_ortho_group

GOLDEN = (1.0 + 5.0**0.5) / 2.0


class DimensionError(ValueError):
    """Raised when points of different dimensions are combined."""


@dataclass(frozen=True)
class ExtendedPoint:
    """A point of R^n or the point at infinity."""

    dim: int
    coords: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionError(f"dimension must be >= 2, got {self.dim}")
        if self.coords is not None:
            if len(self.coords) != self.dim:
                raise DimensionError(f"expected {self.dim} coordinates, got {len(self.coords)}")
            if not all(math.isfinite(c) for c in self.coords):
                raise ValueError("finite points must have finite coordinates")

    @classmethod
    def inf(cls, dim: int = 2) -> "ExtendedPoint":
        return cls(dim, None)

    @classmethod
    def of(cls, *coords) -> "ExtendedPoint":
        """Build a finite point; a single complex number is read as a point of R^2."""
        if len(coords) == 1 and np.ndim(coords[0]) == 0 and isinstance(coords[0], complex):
            z = complex(coords[0])
            coords = (z.real, z.imag)
        elif len(coords) == 1 and np.ndim(coords[0]) == 1:
            coords = tuple(coords[0])
        c = tuple(float(v) for v in coords)
        return cls(len(c), c)

    @property
    def is_inf(self) -> bool:
        return self.coords is None

    def array(self) -> np.ndarray:
        if self.coords is None:
            raise ValueError("the point at infinity has no coordinates")
        return np.array(self.coords)

    def to_complex(self) -> complex:
        if self.dim != 2:
            raise DimensionError("complex view needs dim == 2")
        if self.coords is None:
            return complex(np.inf, 0.0)
        return complex(self.coords[0], self.coords[1])

    def __repr__(self):
        if self.coords is None:
            return f"ExtendedPoint(inf, dim={self.dim})"
        return f"ExtendedPoint({', '.join(f'{c:.6g}' for c in self.coords)})"


def _as_batch(points) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    if not pts:
        raise ValueError("empty point set")
    dim = pts[0].dim
    if any(p.dim != dim for p in pts):
        raise DimensionError("mixed dimensions in point set")
    vals = np.zeros((len(pts), dim))
    at_inf = np.zeros(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        if p.is_inf:
            at_inf[i] = True
        else:
            vals[i] = p.coords
    return vals, at_inf


def batch_to_points(vals: np.ndarray, at_inf: np.ndarray) -> list[ExtendedPoint]:
    dim = vals.shape[-1]
    return [ExtendedPoint.inf(dim) if inf else ExtendedPoint.of(v) for v, inf in zip(vals, at_inf)]


def _norm(v: np.ndarray) -> np.ndarray:
    # scaled 2-norm over the last axis; safe for coordinates up to ~1e300
    scale = np.max(np.abs(v), axis=-1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((v / safe[..., None]) ** 2, axis=-1))


def chordal(a: np.ndarray, a_inf: np.ndarray, b: np.ndarray, b_inf: np.ndarray) -> np.ndarray:
    """Vectorised chordal distance between two broadcastable batches."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    a_inf = np.asarray(a_inf, dtype=bool)
    b_inf = np.asarray(b_inf, dtype=bool)
    na, nb = _norm(a), _norm(b)
    ra, rb = np.hypot(1.0, na), np.hypot(1.0, nb)
    d = _norm(a - b)
    # the product form is symmetric and exact on simple inputs; the scaled form avoids overflow
    big = (na > 1e150) | (nb > 1e150)
    with np.errstate(over="ignore", invalid="ignore"):
        plain = d / np.sqrt((1.0 + na**2) * (1.0 + nb**2))
    scaled = (d / np.maximum(ra, rb)) / np.minimum(ra, rb)
    finite = np.where(big, scaled, plain)
    q = np.where(a_inf, 1.0 / rb, finite)
    q = np.where(b_inf, 1.0 / ra, q)
    q = np.where(a_inf & b_inf, 0.0, q)
    return np.minimum(q, 1.0)


def chordal_distance(a: ExtendedPoint, b: ExtendedPoint) -> float:
    """Chordal distance q(a, b) on the sphere of diameter one."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_inf and b.is_inf:
        return 0.0
    va = np.zeros(a.dim) if a.is_inf else a.array()
    vb = np.zeros(b.dim) if b.is_inf else b.array()
    return float(chordal(va, a.is_inf, vb, b.is_inf))


def pairwise_chordal(vals: np.ndarray, at_inf: np.ndarray) -> np.ndarray:
    return chordal(vals[:, None, :], at_inf[:, None], vals[None, :, :], at_inf[None, :])


def spherical_diameter(points) -> float:
    """Largest pairwise chordal distance of a non-empty finite set."""
    vals, at_inf = _as_batch(points)
    return float(pairwise_chordal(vals, at_inf).max())


def batch_diameter(vals: np.ndarray, at_inf: np.ndarray) -> np.ndarray:
    """Chordal diameters of a stack of sets, ``vals`` shaped ``(..., k, n)``."""
    d = chordal(vals[..., :, None, :], at_inf[..., :, None], vals[..., None, :, :], at_inf[..., None, :])
    return d.max(axis=(-1, -2))


@dataclass(frozen=True)
class WeightedBall:
    """The ball ``|x - a| < r |a|^(2-p)`` around a nonzero centre ``a``."""

    center: tuple[float, ...]
    radius: float
    p: float = 2.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise DimensionError("centre must be a point of R^n, n >= 2")
        if not np.any(c):
            raise ValueError("weighted ball centre must be nonzero")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.p >= 1:
            raise ValueError("exponent p must be >= 1")
        object.__setattr__(self, "center", tuple(float(v) for v in c))

    @property
    def euclidean_radius(self) -> float:
        return self.radius * float(np.linalg.norm(self.center)) ** (2.0 - self.p)

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x.array() if isinstance(x, ExtendedPoint) else x, dtype=float)
        inside = np.linalg.norm(x - np.array(self.center), axis=-1) < self.euclidean_radius
        return bool(inside) if inside.ndim == 0 else inside


def weighted_ball_contains(ball: WeightedBall, x) -> bool:
    if isinstance(x, ExtendedPoint) and x.is_inf:
        raise ValueError("weighted balls contain finite points only")
    return ball.contains(x)


def inverse_stereographic(X: np.ndarray, pole_tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Map unit vectors of R^(n+1) to R^n u {inf}, projecting from the last axis pole."""
    denom = 1.0 - X[:, -1]
    at_inf = denom <= pole_tol
    vals = np.where(at_inf[:, None], 0.0, X[:, :-1] / np.where(at_inf, 1.0, denom)[:, None])
    return vals, at_inf


def stereographic(vals: np.ndarray, at_inf: np.ndarray) -> np.ndarray:
    """Unit-sphere embedding of a batch; the inverse of :func:`inverse_stereographic`."""
    s2 = np.sum(vals**2, axis=-1)
    X = np.concatenate([2 * vals, (s2 - 1.0)[..., None]], axis=-1) / (1.0 + s2)[..., None]
    X[at_inf] = 0.0
    X[at_inf, -1] = 1.0
    return X


def _fibonacci_s2(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = 2.0 * np.pi * i / GOLDEN
    rho = np.sqrt(1.0 - z**2)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _kronecker_sphere(count: int, ambient: int) -> np.ndarray:
    # R_d additive recurrence, pushed to the sphere through Gaussian normalisation
    g = 2.0
    for _ in range(64):
        g = (1.0 + g) ** (1.0 / (ambient + 1))
    alpha = (1.0 / g) ** np.arange(1, ambient + 1)
    u = (0.5 + np.outer(np.arange(1, count + 1), alpha)) % 1.0
    from scipy.stats import norm

    G = norm.ppf(u)
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def sphere_grid(count: int, seed: int = 0, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic near-uniform values on the chordal sphere, as a batch."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim < 2:
        raise DimensionError("dim must be >= 2")
    if dim == 2:
        X = _fibonacci_s2(count)
        R = Rotation.random(random_state=seed).as_matrix()
    else:
        X = _kronecker_sphere(count, dim + 1)
        R = special_ortho_group.rvs(dim + 1, random_state=seed)
    return inverse_stereographic(X @ R.T)


def sample_sphere_values(count: int, seed: int = 0, dim: int = 2) -> list[ExtendedPoint]:
    return batch_to_points(*sphere_grid(count, seed, dim))


def chordal_measure_sample(count: int, rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Random points of R^n with density (1+|y|^2)^(-n) / lambda_n.

    The radius is drawn by inverse transform: ``s = t^2/(1+t^2)`` is
    Beta(n/2, n/2) distributed under this measure.
    """
    u = rng.random(count)
    s = u if dim == 2 else beta.ppf(u, dim / 2.0, dim / 2.0)
    s = np.clip(s, 0.0, 1.0 - 1e-16)
    t = np.sqrt(s / (1.0 - s))
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return t[:, None] * d


def lambda_n(n: int) -> float:
    """Integral of (1+|y|^2)^(-n) over R^n, i.e. pi^(n/2) Gamma(n/2) / Gamma(n)."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    return float(np.exp(0.5 * n * np.log(np.pi) + gammaln(n / 2.0) - gammaln(n)))
