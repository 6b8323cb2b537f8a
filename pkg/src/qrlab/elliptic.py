"""Weierstrass p-function of a general lattice via Jacobi theta series.

Periods are ``2*w1`` and ``2*w3`` with ``Im(w3/w1) > 0``.  Arguments are
reduced to the cell around the origin before the theta series are summed,
so every series converges geometrically in the nome ``q = exp(i*pi*tau)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import elliprf

def _n_terms(q: complex, tau: complex) -> int:
    # reduced |Im v| <= pi*(|Im tau| + 1)/2; stop once the tail is below 1e-20
    lq = -np.log(abs(q))
    grow = np.pi * (abs(tau.imag) + abs(tau.real) + 1.0) / 2.0
    n = 1
    while lq * (n + 0.5) ** 2 - grow * (2 * n + 1) < 46.0:
        n += 1
    return n + 1


def _theta_all(v: np.ndarray, q: complex, nterms: int = 14):
    """theta_1..theta_4 at ``v`` for nome ``q`` (v already reduced)."""
    v = np.asarray(v, dtype=complex)
    n = np.arange(nterms)
    # (n + 1/2)^2 and n^2 exponents; q**x for complex q via exp(x log q)
    logq = np.log(q)
    qh = np.exp(((n + 0.5) ** 2) * logq)
    qi = np.exp((n[1:] ** 2) * logq)
    sign = (-1.0) ** n
    odd = np.multiply.outer(v, 2 * n + 1)
    even = np.multiply.outer(v, 2 * n[1:])
    t1 = 2.0 * np.sum(sign * qh * np.sin(odd), axis=-1)
    t2 = 2.0 * np.sum(qh * np.cos(odd), axis=-1)
    t3 = 1.0 + 2.0 * np.sum(qi * np.cos(even), axis=-1)
    t4 = 1.0 + 2.0 * np.sum(sign[1:] * qi * np.cos(even), axis=-1)
    return t1, t2, t3, t4


class WeierstrassP:
    """The p-function with periods ``(2*w1, 2*w3)``."""

    def __init__(self, period1: complex = 2.0, period2: complex = 2.0j):
        w1, w3 = complex(period1) / 2, complex(period2) / 2
        if w1 == 0 or w3 == 0:
            raise ValueError("lattice generators must be nonzero")
        tau = w3 / w1
        if abs(tau.imag) < 1e-12:
            raise ValueError("lattice generators must be linearly independent over R")
        if tau.imag < 0:
            w3 = -w3
            tau = -tau
        self.w1, self.w3, self.tau = w1, w3, tau
        self.q = np.exp(1j * np.pi * tau)
        self._nterms = _n_terms(self.q, tau)
        self.periods = (2 * w1, 2 * w3)
        self.cell_area = float(abs((np.conj(2 * w1) * (2 * w3)).imag))
        self.degree = 2
        _, t2, t3, t4 = _theta_all(np.zeros(1), self.q, self._nterms)
        self.th2, self.th3, self.th4 = complex(t2[0]), complex(t3[0]), complex(t4[0])
        c = (np.pi / (2 * w1)) ** 2 / 3.0
        self.e1 = c * (self.th2**4 + 2 * self.th4**4)
        self.e2 = c * (self.th2**4 - self.th4**4)
        self.e3 = -c * (2 * self.th2**4 + self.th4**4)
        self._C = np.pi * self.th3 * self.th4 / (2 * w1)
        self._D = (np.pi / (2 * w1)) ** 3 * (self.th2 * self.th3 * self.th4) ** 2
        self._basis = np.array([[(2 * w1).real, (2 * w3).real], [(2 * w1).imag, (2 * w3).imag]])
        self._basis_inv = np.linalg.inv(self._basis)

    # lattice bookkeeping -------------------------------------------------
    def lattice_coords(self, z):
        z = np.asarray(z, dtype=complex)
        st = np.einsum("ij,...j->...i", self._basis_inv, np.stack([z.real, z.imag], axis=-1))
        return st[..., 0], st[..., 1]

    def reduce(self, z):
        """Return ``(z_red, m, k)`` with ``z = z_red + m*2w1 + k*2w3``."""
        z = np.asarray(z, dtype=complex)
        s, t = self.lattice_coords(z)
        m, k = np.round(s), np.round(t)
        return z - m * self.periods[0] - k * self.periods[1], m, k

    def lattice_points(self, center: complex, radius: float) -> np.ndarray:
        """All lattice points within ``radius`` + one cell diameter of ``center``."""
        pad = abs(self.periods[0]) + abs(self.periods[1])
        s, t = self.lattice_coords(np.array([center]))
        # bound the index range by the dual-basis norms
        span = (radius + pad) * np.linalg.norm(self._basis_inv, axis=1)
        ms = np.arange(np.floor(s[0] - span[0]), np.ceil(s[0] + span[0]) + 1)
        ks = np.arange(np.floor(t[0] - span[1]), np.ceil(t[0] + span[1]) + 1)
        M, K = np.meshgrid(ms, ks, indexing="ij")
        pts = (M * self.periods[0] + K * self.periods[1]).ravel()
        return pts[np.abs(pts - center) < radius + pad]

    def is_lattice_point(self, z, tol: float = 1e-9):
        zr, _, _ = self.reduce(z)
        return np.abs(zr) < tol

    # values --------------------------------------------------------------
    def _thetas(self, z):
        zr, m, k = self.reduce(z)
        v = np.pi * zr / (2 * self.w1)
        return zr, m, k, _theta_all(v, self.q, self._nterms)

    def __call__(self, z):
        _, _, _, (t1, t2, _, _) = self._thetas(z)
        with np.errstate(all="ignore"):
            w = self.e1 + (self._C * t2 / t1) ** 2
        return np.where(t1 == 0, np.inf + 0j, w)

    def derivative(self, z):
        _, _, _, (t1, t2, t3, t4) = self._thetas(z)
        with np.errstate(all="ignore"):
            w = -2.0 * self._D * t2 * t3 * t4 / t1**3
        return np.where(t1 == 0, np.inf + 0j, w)

    def spherical_density(self, z):
        """``|p'|^2 / (1 + |p|^2)^2``, finite through the poles."""
        _, _, _, (t1, t2, t3, t4) = self._thetas(z)
        # p = (e1 t1^2 + C^2 t2^2) / t1^2 and p' = -2 D t2 t3 t4 / t1^3
        num = self.e1 * t1**2 + (self._C * t2) ** 2
        dnum = 2.0 * self._D * t2 * t3 * t4 * t1
        return np.abs(dnum) ** 2 / (np.abs(t1) ** 4 + np.abs(num) ** 2) ** 2

    def argument_kernel(self, z, a):
        """Phase data of the entire function ``num - a * den`` where ``p = num/den``.

        Returns ``(w, extra_phase)`` with ``arg(num - a den) = arg(w) + extra_phase``.
        ``a=None`` stands for the value infinity (the function ``den``).
        """
        zr, m, k, (t1, t2, _, _) = self._thetas(z)
        vr = np.pi * zr / (2 * self.w1)
        # theta_1^2 and theta_2^2 share the quasi-periodic factor q^(-2k^2) exp(-4ik v_red)
        logq = np.log(self.q)
        extra = np.imag(-2.0 * k**2 * logq - 4j * k * vr)
        den = t1**2
        if a is None:
            return den, extra
        num = self.e1 * den + (self._C * t2) ** 2
        return num - a * den, extra

    # inversion ----------------------------------------------------------
    def value_and_derivative(self, z):
        _, _, _, (t1, t2, t3, t4) = self._thetas(z)
        with np.errstate(all="ignore"):
            w = self.e1 + (self._C * t2 / t1) ** 2
            dw = -2.0 * self._D * t2 * t3 * t4 / t1**3
        pole = t1 == 0
        return np.where(pole, np.inf + 0j, w), np.where(pole, np.inf + 0j, dw)

    def _newton(self, u, y, steps):
        for _ in range(steps):
            pu, dpu = self.value_and_derivative(u)
            with np.errstate(all="ignore"):
                step = (pu - y) / dpu
            ok = np.isfinite(step) & (np.abs(step) < 0.25 * min(abs(self.w1), abs(self.w3)))
            u = np.where(ok, u - step, u)
        return u

    def _residual(self, u, y):
        pu = self(u)
        with np.errstate(all="ignore"):
            return np.abs(pu - y) / (1.0 + np.abs(y)) / np.maximum(1.0, np.abs(pu) / (1.0 + np.abs(y)))

    def inverse(self, y, newton_steps: int = 8, tol: float = 1e-11):
        """One solution ``u`` of ``p(u) = y`` per finite value ``y``.

        Carlson's R_F gives the starting point; values where it lands on the
        wrong branch fall back to a fixed multistart Newton search.
        """
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        with np.errstate(all="ignore"):
            u = elliprf(y - self.e1, y - self.e2, y - self.e3)
        u = np.where(np.isfinite(u), u, 0.5 * (self.w1 + self.w3))
        u = self._newton(u, y, newton_steps)
        res = self._residual(u, y)
        bad = ~(res < tol)
        if np.any(bad):
            g = (np.arange(6) + 0.5) / 6 - 0.5
            S, T = np.meshgrid(g, g, indexing="ij")
            starts = (S * self.periods[0] + T * self.periods[1]).ravel()
            yb = y[bad]
            best_u, best_r = u[bad], res[bad]
            for s0 in starts:
                cand = self._newton(np.full(yb.shape, s0), yb, 40)
                r = self._residual(cand, yb)
                better = r < best_r
                best_u = np.where(better, cand, best_u)
                best_r = np.where(better, r, best_r)
            u[bad] = best_u
        return u

    def critical_values(self):
        return (self.e1, self.e2, self.e3)
