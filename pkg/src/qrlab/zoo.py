"""Explicit quasimeromorphic mappings with declared dimension and distortion.

Every map evaluates batches of points of R^n, shaped ``(m, n)``, to value
batches ``(values, at_inf)`` as in :mod:`qrlab.sphere`.  Values whose
magnitude exceeds :data:`POLE_MAGNITUDE` are reported as infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .argument import BoundaryMarginError, contour_winding
from .elliptic import WeierstrassP
from .sphere import ExtendedPoint, chordal

POLE_MAGNITUDE = 1e12
DEDUP_TOL = 1e-6


class UnknownMapError(ValueError):
    pass


class NoEnumeratorError(RuntimeError):
    """No a-point enumerator exists for this map and dimension."""


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MapTransform:
    """Record of ``x -> base(anchor + scale * x)`` with ``scale = |anchor|^(2-p)``."""

    base: "Mapping"
    anchor: tuple[float, ...]
    exponent: float
    scale: float

    @property
    def direction(self) -> np.ndarray:
        a = np.array(self.anchor)
        return a / np.linalg.norm(a)


class Mapping:
    """An evaluable map R^n -> R^n u {inf} with optional analytic extras.

    Parameters
    ----------
    evaluate : callable
        ``(m, n)`` array -> ``(values, at_inf)`` batch.
    jacobian : callable, optional
        Jacobian determinant ``J(x, f)`` on an ``(m, n)`` batch.
    spherical_jacobian : callable, optional
        ``J(x, f) / (1 + |f(x)|^2)^n``, evaluated in a form that stays finite at poles.
    apoints : callable, optional
        ``(value, center, radius) -> [(location, multiplicity), ...]`` for the
        open ball ``B(center, radius)``; ``value`` is an :class:`ExtendedPoint`.
    kernel : callable, optional
        Plane maps only: ``(z, a) -> (w, extra_phase)`` describing the argument of
        an entire function whose zeros are the a-points (``a=None`` for poles).
    complex_fn : callable, optional
        Plane maps only: the raw complex function, used by root refinement.
    counter : callable, optional
        Vectorised counts: ``(values, at_inf, center, radii) -> (m, k)`` integer
        array of multiplicity-weighted a-point counts in ``B(center, radii[j])``.
    """

    def __init__(self, label: str, dim: int, distortion: float, evaluate: Callable, *,
                 jacobian=None, spherical_jacobian=None, apoints=None, kernel=None,
                 complex_fn=None, counter=None, meta: dict | None = None,
                 transform: MapTransform | None = None):
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        if not distortion >= 1:
            raise ValueError("distortion K must be >= 1")
        self.label = label
        self.dim = dim
        self.distortion = float(distortion)
        self._evaluate = evaluate
        self.jacobian = jacobian
        self.spherical_jacobian = spherical_jacobian
        self.apoints = apoints
        self.kernel = kernel
        self.complex_fn = complex_fn
        self.counter = counter
        self.meta = dict(meta or {})
        self.transform = transform

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ValueError(f"{self.label} expects points of R^{self.dim}, got shape {X.shape}")
        flat = X.reshape(-1, self.dim)
        with np.errstate(all="ignore"):
            vals, at_inf = self._evaluate(flat)
        return vals.reshape(X.shape), at_inf.reshape(X.shape[:-1])

    def __call__(self, x) -> ExtendedPoint:
        x = np.asarray(x.array() if isinstance(x, ExtendedPoint) else x, dtype=float)
        vals, at_inf = self.evaluate(x[None, :])
        return ExtendedPoint.inf(self.dim) if at_inf[0] else ExtendedPoint.of(vals[0])

    @property
    def alpha(self) -> float:
        return self.distortion ** (1.0 / (1.0 - self.dim))

    def capabilities(self) -> dict:
        return {
            "jacobian": self.jacobian is not None,
            "apoints": self.apoints is not None,
            "argument_principle": self.kernel is not None,
            "spherical_jacobian": self.spherical_jacobian is not None,
        }

    def __repr__(self):
        return f"Mapping({self.label!r}, n={self.dim}, K={self.distortion:g})"


# ---------------------------------------------------------------------------
# plane helpers


def _to_complex(X):
    return X[:, 0] + 1j * X[:, 1]


def complex_batch(w) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=complex)
    with np.errstate(invalid="ignore"):
        at_inf = ~np.isfinite(w) | (np.abs(w) > POLE_MAGNITUDE)
    vals = np.column_stack([w.real, w.imag])
    vals[at_inf] = 0.0
    return vals, at_inf


def _value_to_complex(value: ExtendedPoint):
    return None if value.is_inf else value.to_complex()


def _plane_map(label, K, fz, *, dfz=None, rho2=None, enum=None, kernel=None, counter=None,
               meta=None):
    """Wrap complex callables as a plane :class:`Mapping`."""

    def evaluate(X):
        return complex_batch(fz(_to_complex(X)))

    jac = None
    if dfz is not None:
        def jac(X):
            with np.errstate(all="ignore"):
                return np.abs(dfz(_to_complex(X))) ** 2

    sph = None
    if rho2 is not None:
        def sph(X):
            with np.errstate(all="ignore"):
                return rho2(_to_complex(X))

    apoints = None
    if enum is not None:
        def apoints(value, center, radius):
            c = complex(center[0], center[1])
            roots = enum(_value_to_complex(value), c, float(radius))
            return [(np.array([z.real, z.imag]), m) for z, m in roots]

    return Mapping(label, 2, K, evaluate, jacobian=jac, spherical_jacobian=sph,
                   apoints=apoints, kernel=kernel, complex_fn=fz, counter=counter, meta=meta)


def _merge_roots(roots, tol=DEDUP_TOL):
    """Merge (complex location, multiplicity) pairs closer than ``tol``."""
    out: list[list] = []
    for z, m in roots:
        for item in out:
            if abs(item[0] - z) < tol:
                item[1] += m
                break
        else:
            out.append([complex(z), int(m)])
    return [(z, m) for z, m in out]


def _in_ball(zs, c, R):
    zs = np.asarray(zs, dtype=complex)
    return zs[np.abs(zs - c) < R]


def _simple_kernel(fz):
    def kernel(z, a):
        if a is None:
            return np.ones_like(z, dtype=complex), 0.0
        return fz(z) - a, 0.0
    return kernel


# ---------------------------------------------------------------------------
# zoo builders


def _constant(value=0.0):
    c = complex(value)

    def fz(z):
        return np.full(np.shape(z), c, dtype=complex)

    def enum(a, center, R):
        if a is not None and a == c:
            raise ValueError("a-points of a constant map at its own value are not discrete")
        return []

    def counter(vals, at_inf, center, radii):
        hit = ~at_inf & (vals[:, 0] == c.real) & (vals[:, 1] == c.imag)
        if hit.any():
            raise ValueError("a-points of a constant map at its own value are not discrete")
        return np.zeros((len(vals), np.size(radii)), dtype=int)

    return _plane_map(f"constant({c:g})", 1.0, fz, dfz=lambda z: np.zeros_like(z),
                      rho2=lambda z: np.zeros(np.shape(z)), enum=enum, counter=counter,
                      kernel=_simple_kernel(fz), meta={"value": [c.real, c.imag]})


def _exponential():
    def enum(a, c, R):
        if a is None or a == 0:
            return []
        base = np.log(a)
        lo = math.ceil((c.imag - R - base.imag) / (2 * np.pi))
        hi = math.floor((c.imag + R - base.imag) / (2 * np.pi))
        ks = np.arange(lo, hi + 1)
        return [(z, 1) for z in _in_ball(base + 2j * np.pi * ks, c, R)]

    def counter(vals, at_inf, center, radii):
        # a-points x + i(theta + 2 pi k); count integers k strictly inside each disc
        y = vals[:, 0] + 1j * vals[:, 1]
        ok = ~at_inf & (y != 0)
        with np.errstate(divide="ignore"):
            x = np.log(np.abs(y)) - center[0]
        th = np.angle(y) - center[1]
        R = np.asarray(radii, dtype=float)[None, :]
        h2 = R**2 - x[:, None] ** 2
        h = np.sqrt(np.where(h2 > 0, h2, 0.0))
        lo = (-h - th[:, None]) / (2 * np.pi)
        hi = (h - th[:, None]) / (2 * np.pi)
        n = np.ceil(hi) - np.floor(lo) - 1
        return np.where(ok[:, None] & (h2 > 0), np.maximum(n, 0), 0).astype(int)

    return _plane_map("exponential", 1.0, np.exp, dfz=np.exp,
                      rho2=lambda z: (0.5 / np.cosh(z.real)) ** 2, enum=enum,
                      kernel=_simple_kernel(np.exp), counter=counter,
                      meta={"periods": [[0.0, 2 * np.pi]], "omitted": ["0", "inf"]})


def _sine():
    def rho2(z):
        s = np.sin(z)
        return (np.abs(np.cos(z)) / (1.0 + np.abs(s) ** 2)) ** 2

    def enum(a, c, R):
        if a is None:
            return []
        b = complex(np.arcsin(complex(a)))
        out = []
        for base in (b, np.pi - b):
            lo = math.ceil((c.real - R - base.real) / (2 * np.pi))
            hi = math.floor((c.real + R - base.real) / (2 * np.pi))
            out += [(z, 1) for z in _in_ball(base + 2 * np.pi * np.arange(lo, hi + 1), c, R)]
        return _merge_roots(out)

    return _plane_map("sine", 1.0, np.sin, dfz=np.cos, rho2=rho2, enum=enum,
                      kernel=_simple_kernel(np.sin), meta={"periods": [[2 * np.pi, 0.0]]})


def _exp_square():
    def fz(z):
        return np.exp(z * z)

    def rho2(z):
        return (np.abs(z) / np.cosh((z * z).real)) ** 2

    def enum(a, c, R):
        if a is None or a == 0:
            return []
        base = np.log(a)
        bound = (abs(c) + R) ** 2
        lo = math.ceil((-bound - base.imag) / (2 * np.pi))
        hi = math.floor((bound - base.imag) / (2 * np.pi))
        w = base + 2j * np.pi * np.arange(lo, hi + 1)
        w = w[np.abs(w) <= bound]
        out = []
        for wk in w:
            if abs(wk) < 1e-300:
                out.append((0j, 2))
                continue
            r = np.sqrt(wk)
            out += [(r, 1), (-r, 1)]
        zs = [(z, m) for z, m in out if abs(z - c) < R]
        return _merge_roots(zs)

    return _plane_map("exp_square", 1.0, fz, dfz=lambda z: 2 * z * np.exp(z * z), rho2=rho2,
                      enum=enum, kernel=_simple_kernel(fz),
                      meta={"note": "a-points from z^2 = log a + 2 pi i k", "omitted": ["0", "inf"]})


def _power(k=2):
    k = int(k)
    if k < 1:
        raise ValueError("power map needs integer k >= 1")

    def fz(z):
        return z**k

    def rho2(z):
        r = np.abs(z)
        return (k * r ** (k - 1) / (1.0 + r ** (2 * k))) ** 2

    def enum(a, c, R):
        if a is None:
            return []
        if a == 0:
            return [(0j, k)] if abs(c) < R else []
        roots = abs(a) ** (1.0 / k) * np.exp(1j * (np.angle(a) + 2 * np.pi * np.arange(k)) / k)
        return [(z, 1) for z in _in_ball(roots, c, R)]

    def counter(vals, at_inf, center, radii):
        y = vals[:, 0] + 1j * vals[:, 1]
        c = complex(center[0], center[1])
        roots = np.abs(y)[:, None] ** (1.0 / k) * np.exp(
            1j * (np.angle(y)[:, None] + 2 * np.pi * np.arange(k)[None, :]) / k)
        d = np.abs(roots - c)
        R = np.asarray(radii, dtype=float)
        out = (d[:, :, None] < R[None, None, :]).sum(axis=1)
        return np.where(at_inf[:, None], 0, out).astype(int)

    return _plane_map("identity" if k == 1 else f"power(k={k})", 1.0, fz,
                      dfz=lambda z: k * z ** (k - 1), rho2=rho2, enum=enum,
                      kernel=_simple_kernel(fz), counter=counter, meta={"k": k})


def _rational(numerator, denominator=(1.0,)):
    P = np.trim_zeros(np.asarray(numerator, dtype=complex), "f")
    Q = np.trim_zeros(np.asarray(denominator, dtype=complex), "f")
    if Q.size == 0:
        raise ValueError("denominator polynomial is zero")
    if P.size == 0:
        P = np.zeros(1, dtype=complex)
    dP, dQ = np.polyder(P), np.polyder(Q)

    def fz(z):
        with np.errstate(all="ignore"):
            return np.polyval(P, z) / np.polyval(Q, z)

    def dfz(z):
        q = np.polyval(Q, z)
        return (np.polyval(dP, z) * q - np.polyval(P, z) * np.polyval(dQ, z)) / q**2

    def rho2(z):
        p, q = np.polyval(P, z), np.polyval(Q, z)
        num = np.abs(np.polyval(dP, z) * q - p * np.polyval(dQ, z))
        return (num / (np.abs(q) ** 2 + np.abs(p) ** 2)) ** 2

    def enum(a, c, R):
        poly = Q if a is None else np.polysub(P, a * Q)
        poly = np.trim_zeros(poly, "f")
        if poly.size == 0:
            raise ValueError("rational map is constant at this value")
        if poly.size == 1:
            return []
        roots = np.roots(poly)
        # Newton polish against the polynomial itself
        dpoly = np.polyder(poly)
        for _ in range(3):
            d = np.polyval(dpoly, roots)
            ok = np.abs(d) > 1e-300
            roots = np.where(ok, roots - np.polyval(poly, roots) / np.where(ok, d, 1.0), roots)
        merged = _merge_roots([(z, 1) for z in roots], tol=1e-5)
        return [(z, m) for z, m in merged if abs(z - c) < R]

    def kernel(z, a):
        if a is None:
            return np.polyval(Q, z), 0.0
        return np.polyval(P, z) - a * np.polyval(Q, z), 0.0

    label = "rational(deg %d/%d)" % (P.size - 1, Q.size - 1)
    return _plane_map(label, 1.0, fz, dfz=dfz, rho2=rho2, enum=enum, kernel=kernel,
                      meta={"numerator": [[c.real, c.imag] for c in P],
                            "denominator": [[c.real, c.imag] for c in Q]})


def _elliptic(periods=((2.0, 0.0), (0.0, 2.0))):
    p1, p2 = (complex(*v) if np.ndim(v) else complex(v) for v in periods)
    wp = WeierstrassP(p1, p2)

    def enum(a, c, R):
        if a is None:
            base = [(0j, 2)]
        else:
            u = complex(wp.inverse(np.array([a]))[0])
            u_red = complex(wp.reduce(np.array([u]))[0][0])
            v_red = complex(wp.reduce(np.array([-u]))[0][0])
            if abs(u_red - v_red) < DEDUP_TOL or abs(wp.derivative(np.array([u]))[0]) < 1e-7:
                base = [(u_red, 2)]
            else:
                base = [(u_red, 1), (v_red, 1)]
        lat = wp.lattice_points(c, R)
        out = []
        for b, m in base:
            out += [(z, m) for z in _in_ball(b + lat, c, R)]
        return out

    def counter(vals, at_inf, center, radii, chunk=2048):
        # translates of u and -u; a double point is hit by both and so counts twice
        R = np.asarray(radii, dtype=float)
        c = complex(center[0], center[1])
        y = vals[:, 0] + 1j * vals[:, 1]
        u = np.zeros(len(y), dtype=complex)
        if (~at_inf).any():
            u[~at_inf] = wp.inverse(y[~at_inf])
        lat = wp.lattice_points(c, float(R.max()))
        out = np.zeros((len(y), R.size), dtype=int)
        for i in range(0, len(y), chunk):
            ui = u[i:i + chunk, None]
            d1 = np.abs(ui + lat[None, :] - c)
            d2 = np.abs(-ui + lat[None, :] - c)
            for j, r in enumerate(R):
                out[i:i + chunk, j] = (d1 < r).sum(axis=1) + (d2 < r).sum(axis=1)
        return out

    return _plane_map("elliptic(weierstrass)", 1.0, wp, dfz=wp.derivative,
                      rho2=wp.spherical_density, enum=enum, kernel=wp.argument_kernel,
                      counter=counter,
                      meta={"periods": [[p1.real, p1.imag], [p2.real, p2.imag]],
                            "degree_per_cell": wp.degree, "cell_area": wp.cell_area,
                            "critical_values": [[e.real, e.imag] for e in wp.critical_values()]})


def _winding(k=2, dim=2, distortion=None):
    k, dim = int(k), int(dim)
    if k < 1:
        raise ValueError("winding map needs integer k >= 1")
    K = float(k ** (dim - 1)) if distortion is None else float(distortion)

    def evaluate(X):
        rho = np.hypot(X[:, 0], X[:, 1])
        th = np.arctan2(X[:, 1], X[:, 0])
        out = X.copy()
        out[:, 0] = rho * np.cos(k * th)
        out[:, 1] = rho * np.sin(k * th)
        return out, np.zeros(len(X), dtype=bool)

    def jac(X):
        return np.full(len(X), float(k))

    def sph(X):
        return k / (1.0 + np.sum(X**2, axis=1)) ** dim

    def apoints(value, center, radius):
        if value.is_inf:
            return []
        y = value.array()
        rho = math.hypot(y[0], y[1])
        if rho == 0.0:
            locs = [(y.copy(), k)]
        else:
            phi = math.atan2(y[1], y[0])
            locs = []
            for j in range(k):
                x = y.copy()
                ang = (phi + 2 * np.pi * j) / k
                x[0], x[1] = rho * math.cos(ang), rho * math.sin(ang)
                locs.append((x, 1))
        return [(x, m) for x, m in locs if np.linalg.norm(x - center) < radius]

    kernel = None
    if dim == 2:
        def kernel(z, a):
            if a is None:
                return np.ones_like(z, dtype=complex), 0.0
            th = np.angle(z)
            return np.abs(z) * np.exp(1j * k * th) - a, 0.0

    return Mapping(f"winding(k={k}, n={dim})", dim, K, evaluate, jacobian=jac,
                   spherical_jacobian=sph, apoints=apoints, kernel=kernel,
                   meta={"k": k, "K_rule": "k^(n-1) unless configured"})


def _fold(t):
    """Reduce to [-1, 1] under the reflection group of the lines t = odd; returns (t, flipped)."""
    s = np.mod(t + 1.0, 4.0) - 1.0
    flip = s > 1.0
    return np.where(flip, 2.0 - s, s), flip


def _zorich(distortion=2.0):
    def evaluate(X):
        b1, f1 = _fold(X[:, 0])
        b2, f2 = _fold(X[:, 1])
        m = np.maximum(np.abs(b1), np.abs(b2))
        r = np.hypot(b1, b2)
        safe = np.where(r > 0, r, 1.0)
        s = np.sin(0.5 * np.pi * m) / safe
        h3 = np.cos(0.5 * np.pi * m) * np.where(f1 ^ f2, -1.0, 1.0)
        scale = np.exp(X[:, 2])
        out = np.column_stack([scale * s * b1, scale * s * b2, scale * h3])
        at_inf = ~np.isfinite(scale) | (scale > POLE_MAGNITUDE)
        out[at_inf] = 0.0
        return out, at_inf

    def apoints(value, center, radius):
        if value.is_inf:
            return []
        y = value.array()
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return []
        u = y / ny
        x3 = math.log(ny)
        m = (2.0 / np.pi) * math.acos(min(1.0, abs(u[2])))
        ru = math.hypot(u[0], u[1])
        if ru == 0.0:
            b = np.zeros(2)
        else:
            d = u[:2] / ru
            b = d * m / max(abs(d[0]), abs(d[1]))
        corner = abs(abs(b[0]) - 1) < 1e-9 and abs(abs(b[1]) - 1) < 1e-9
        upper = u[2] >= 0
        c = np.asarray(center, dtype=float)
        span = radius + 4.0
        locs = []
        for j in range(math.floor((c[0] - span) / 4), math.ceil((c[0] + span) / 4) + 1):
            for l in range(math.floor((c[1] - span) / 4), math.ceil((c[1] + span) / 4) + 1):
                for fx in (False, True):
                    for fy in (False, True):
                        if (fx ^ fy) == upper and u[2] != 0:
                            continue
                        x1 = (2.0 - b[0] if fx else b[0]) + 4 * j
                        x2 = (2.0 - b[1] if fy else b[1]) + 4 * l
                        locs.append(np.array([x1, x2, x3]))
        out = []
        for x in locs:
            if np.linalg.norm(x - c) >= radius:
                continue
            if any(np.linalg.norm(x - z) < DEDUP_TOL for z, _ in out):
                continue
            out.append((x, 2 if corner else 1))
        return out

    return Mapping("zorich", 3, float(distortion), evaluate, apoints=apoints,
                   meta={"periods": [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0]],
                         "K_rule": "declared constant, not derived"})


ZOO = {
    "constant": (_constant, {"value": "complex constant, default 0"}, "n=2, K=1"),
    "identity": (lambda: _power(1), {}, "n=2, K=1"),
    "exponential": (_exponential, {}, "n=2, K=1"),
    "sine": (_sine, {}, "n=2, K=1"),
    "rational": (_rational, {"numerator": "coefficients, highest degree first",
                             "denominator": "coefficients, default [1]"}, "n=2, K=1"),
    "exp_square": (_exp_square, {}, "n=2, K=1"),
    "elliptic": (_elliptic, {"periods": "two lattice generators, default [[2,0],[0,2]]"}, "n=2, K=1"),
    "power": (_power, {"k": "integer exponent, default 2"}, "n=2, K=1"),
    "winding": (_winding, {"k": "integer winding, default 2", "dim": "n >= 2, default 2",
                           "distortion": "optional override of k^(n-1)"}, "n>=2, K=k^(n-1)"),
    "zorich": (_zorich, {"distortion": "declared K, default 2"}, "n=3, K declared"),
}


def _complexish(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    return complex(v)


def make_zoo_map(descriptor) -> Mapping:
    """Build a zoo map from ``{"kind": ..., <params>, "pre": {...}, "post": {...}}`` or a kind name."""
    if isinstance(descriptor, str):
        descriptor = {"kind": descriptor}
    opts = dict(descriptor)
    kind = opts.pop("kind", None)
    if kind not in ZOO:
        raise UnknownMapError(f"unknown map kind {kind!r}; known: {sorted(ZOO)}")
    pre = opts.pop("pre", None)
    post = opts.pop("post", None)
    builder, params, _ = ZOO[kind]
    unknown = set(opts) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
    if kind == "constant" and "value" in opts:
        opts["value"] = _complexish(opts["value"])
    if kind == "rational":
        if "numerator" not in opts:
            raise ValueError("rational map needs a numerator")
        for key in ("numerator", "denominator"):
            if key in opts:
                opts[key] = [_complexish(c) for c in opts[key]]
    f = builder(**opts)
    f.meta["kind"] = kind
    f.meta["descriptor"] = dict(descriptor)
    if pre is not None or post is not None:
        f = affine(f, pre=pre, post=post)
    return f


def list_zoo() -> list[dict]:
    catalog = []
    for kind, (_, params, decl) in ZOO.items():
        f = make_zoo_map({"kind": kind, "numerator": [1.0, 0.0]} if kind == "rational" else kind)
        entry = {"kind": kind, "params": params, "declared": decl, "dim": f.dim,
                 "K": f.distortion, **f.capabilities()}
        if kind == "exp_square":
            entry["apoints_note"] = f.meta["note"]
        catalog.append(entry)
    return catalog


# ---------------------------------------------------------------------------
# combinators


def _affine_pullback(f: Mapping, scale: float, shift: np.ndarray, label: str, meta=None,
                     transform=None) -> Mapping:
    """``x -> f(shift + scale * x)`` with every capability carried along."""
    n = f.dim
    shift = np.asarray(shift, dtype=float)
    sc = complex(shift[0], shift[1]) if n == 2 else None

    def evaluate(X):
        return f.evaluate(shift + scale * X)

    jac = sph = apoints = kernel = cfn = counter = None
    if f.jacobian is not None:
        def jac(X):
            return scale**n * f.jacobian(shift + scale * X)
    if f.counter is not None:
        def counter(vals, at_inf, center, radii):
            c = shift + scale * np.asarray(center, dtype=float)
            return f.counter(vals, at_inf, c, abs(scale) * np.asarray(radii, dtype=float))
    if f.spherical_jacobian is not None:
        def sph(X):
            return scale**n * f.spherical_jacobian(shift + scale * X)
    if f.apoints is not None:
        def apoints(value, center, radius):
            c = shift + scale * np.asarray(center, dtype=float)
            return [((x - shift) / scale, m) for x, m in f.apoints(value, c, abs(scale) * radius)]
    if f.kernel is not None:
        def kernel(z, a):
            return f.kernel(sc + scale * z, a)
    if f.complex_fn is not None:
        def cfn(z):
            return f.complex_fn(sc + scale * z)
    return Mapping(label, n, f.distortion, evaluate, jacobian=jac, spherical_jacobian=sph,
                   apoints=apoints, kernel=kernel, complex_fn=cfn, counter=counter,
                   meta={**f.meta, **(meta or {})}, transform=transform)


def translate(f: Mapping, a) -> Mapping:
    """The translate ``x -> f(x + a)``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (f.dim,) or not np.all(np.isfinite(a)):
        raise ValueError("translation vector must be a finite point of R^n")
    return _affine_pullback(f, 1.0, a, f"{f.label} o (x+{a.tolist()})", meta={"translation": a.tolist()})


def p_rescale(f: Mapping, a, p: float) -> Mapping:
    """The rescaled map ``x -> f(a + |a|^(2-p) x)``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (f.dim,) or not np.all(np.isfinite(a)):
        raise ValueError("anchor must be a finite point of R^n")
    na = float(np.linalg.norm(a))
    if na == 0.0:
        raise ValueError("anchor must be nonzero")
    if not p >= 1:
        raise ValueError("exponent p must be >= 1")
    s = na ** (2.0 - p)
    tr = MapTransform(f, tuple(a.tolist()), float(p), s)
    return _affine_pullback(f, s, a, f"{f.label} o ({a.tolist()} + {s:.3g} x)", transform=tr)


def affine(f: Mapping, pre=None, post=None) -> Mapping:
    """Pre- and post-compose with similarities ``x -> scale*x + shift``."""
    g = f
    if pre is not None:
        s = float(pre.get("scale", 1.0))
        b = np.asarray(pre.get("shift", np.zeros(f.dim)), dtype=float)
        if s == 0:
            raise ValueError("pre scale must be nonzero")
        g = _affine_pullback(g, s, b, f"{g.label} o ({s:g} x + {b.tolist()})")
    if post is None:
        return g
    s = float(post.get("scale", 1.0))
    b = np.asarray(post.get("shift", np.zeros(f.dim)), dtype=float)
    if s == 0:
        raise ValueError("post scale must be nonzero")
    inner = g
    n = inner.dim

    def evaluate(X):
        v, inf = inner.evaluate(X)
        out = s * v + b
        big = np.linalg.norm(out, axis=-1) > POLE_MAGNITUDE
        inf = inf | big
        out[inf] = 0.0
        return out, inf

    jac = sph = apoints = kernel = cfn = counter = None
    if inner.jacobian is not None:
        def jac(X):
            return abs(s) ** n * inner.jacobian(X)
    if inner.counter is not None:
        def counter(vals, at_inf, center, radii):
            return inner.counter((vals - b) / s, at_inf, center, radii)
    if inner.apoints is not None:
        def apoints(value, center, radius):
            if value.is_inf:
                return inner.apoints(value, center, radius)
            return inner.apoints(ExtendedPoint.of((value.array() - b) / s), center, radius)
    if inner.kernel is not None and n == 2:
        bc = complex(b[0], b[1])

        def kernel(z, a):
            return inner.kernel(z, None if a is None else (a - bc) / s)
    if inner.complex_fn is not None:
        bc2 = complex(b[0], b[1])

        def cfn(z):
            return s * inner.complex_fn(z) + bc2
    return Mapping(f"{s:g} {inner.label} + {b.tolist()}", n, inner.distortion, evaluate,
                   jacobian=jac, spherical_jacobian=sph, apoints=apoints, kernel=kernel,
                   complex_fn=cfn, counter=counter, meta=dict(inner.meta))


# ---------------------------------------------------------------------------
# a-point enumeration


def _dedupe(locs, tol=DEDUP_TOL):
    out: list[list] = []
    for x, m in locs:
        for item in out:
            if np.linalg.norm(item[0] - x) < tol:
                item[1] += m
                break
        else:
            out.append([np.asarray(x, dtype=float), int(m)])
    return [(x, m) for x, m in out]


def _phase_fn(f: Mapping, a):
    def phase(z):
        w, extra = f.kernel(z, a)
        return np.angle(w) + extra
    return phase


def argument_principle_count(f: Mapping, value: ExtendedPoint, center, radius: float,
                             margin: float = 1e-6) -> int:
    """Multiplicity-weighted a-point count in ``B(center, radius)`` from the winding of the kernel."""
    if f.dim != 2 or f.kernel is None:
        raise NoEnumeratorError(f"{f.label}: argument principle needs a plane map with a kernel")
    c = complex(center[0], center[1])
    a = _value_to_complex(value)
    wnd, zs = contour_winding(_phase_fn(f, a), c, float(radius))
    vals, inf = f.evaluate(np.column_stack([zs.real, zs.imag]))
    va = np.zeros(2) if value.is_inf else value.array()
    q = chordal(vals, inf, va, value.is_inf)
    if q.min() < margin:
        raise BoundaryMarginError(f"value within chordal {q.min():.2e} of f(boundary)")
    return wnd


def _refine_roots(f: Mapping, value: ExtendedPoint, center, radius, seed=0, n_starts=256):
    """Seeded Newton refinement for plane meromorphic maps, validated by winding counts."""
    total = argument_principle_count(f, value, center, radius)
    if total == 0:
        return []
    c = complex(center[0], center[1])
    a = _value_to_complex(value)
    fz = f.complex_fn
    if fz is None:
        raise NoEnumeratorError(f"{f.label}: no complex representation for root refinement")

    def g(z):
        with np.errstate(all="ignore"):
            w = fz(z)
            return 1.0 / w if a is None else w - a

    rng = np.random.default_rng(seed)
    found: list[complex] = []
    for _ in range(8):
        rr = radius * np.sqrt(rng.random(n_starts))
        z = c + rr * np.exp(2j * np.pi * rng.random(n_starts))
        for _ in range(60):
            h = 1e-7 * (1 + np.abs(z))
            with np.errstate(all="ignore"):
                d = (g(z + h) - g(z - h)) / (2 * h)
                step = g(z) / d
            step = np.where(np.isfinite(step), step, 0.0)
            z = z - np.clip(np.abs(step), 0, radius) * np.exp(1j * np.angle(step))
        with np.errstate(all="ignore"):
            res = np.abs(g(z))
        good = (np.abs(z - c) < radius) & (res < 1e-9)
        for zz in z[good]:
            if all(abs(zz - w) >= DEDUP_TOL for w in found):
                found.append(complex(zz))
        # multiplicity of each root from a small circle around it
        roots = []
        for i, zz in enumerate(found):
            others = [abs(zz - w) for j, w in enumerate(found) if j != i]
            rho = min([1e-3, 0.4 * (radius - abs(zz - c))] + [0.4 * d for d in others])
            m, _ = contour_winding(_phase_fn(f, a), zz, rho)
            roots.append((zz, m))
        if sum(m for _, m in roots) == total:
            return [(np.array([z.real, z.imag]), m) for z, m in roots]
    raise NonConvergenceError(
        f"{f.label}: refinement found {sum(m for _, m in roots)} of {total} a-points")


def enumerate_apoints(f: Mapping, value, center, radius: float, seed: int = 0):
    """All solutions of ``f(x) = value`` in the open ball ``B(center, radius)`` with multiplicities."""
    if not isinstance(value, ExtendedPoint):
        value = ExtendedPoint.of(value) if np.ndim(value) else ExtendedPoint.of(complex(value))
    center = np.asarray(center, dtype=float)
    if value.dim != f.dim or center.shape != (f.dim,):
        raise ValueError("dimension mismatch between map, value and centre")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if f.apoints is not None:
        locs = f.apoints(value, center, radius)
    elif f.dim == 2 and f.kernel is not None:
        locs = _refine_roots(f, value, center, radius, seed=seed)
    else:
        raise NoEnumeratorError(f"no a-point enumerator for {f.label} (n={f.dim})")
    return _dedupe(locs)
