"""Winding numbers of closed curves, for argument-principle root counts."""

from __future__ import annotations

import numpy as np


class BoundaryMarginError(ValueError):
    """The target value lies (chordally) too close to the image of the contour."""


class QuadratureError(RuntimeError):
    """Adaptive refinement of the contour did not resolve the phase."""


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def contour_winding(phase, center: complex, radius: float, n0: int = 256,
                    max_step: float = 0.4, max_points: int = 2**21):
    """Winding number of ``t -> phase(center + radius e^{it})`` around the origin.

    ``phase`` maps complex contour points to the argument of the curve there.
    The contour is refined where consecutive phases differ by more than
    ``max_step``.  Returns ``(winding, contour_points)``.
    """
    t = np.linspace(0.0, 2 * np.pi, n0 + 1)
    ph = phase(center + radius * np.exp(1j * t))
    while True:
        d = _wrap(np.diff(ph))
        if not np.all(np.isfinite(d)):
            raise QuadratureError("phase is undefined on the contour")
        bad = np.abs(d) > max_step
        if not bad.any():
            break
        width = (t[1:] - t[:-1])[bad]
        if width.min() < 1e-13:
            # a jump that survives bisection to machine precision: the curve meets the origin
            raise BoundaryMarginError("contour image passes through the target value")
        if t.size + bad.sum() > max_points:
            raise QuadratureError(f"contour refinement exceeded {max_points} points")
        tm = 0.5 * (t[:-1][bad] + t[1:][bad])
        pm = phase(center + radius * np.exp(1j * tm))
        t = np.concatenate([t, tm])
        ph = np.concatenate([ph, pm])
        order = np.argsort(t, kind="stable")
        t, ph = t[order], ph[order]
    total = d.sum() / (2 * np.pi)
    w = int(np.rint(total))
    if abs(total - w) > 1e-6:
        raise QuadratureError(f"non-integral winding {total}")
    return w, center + radius * np.exp(1j * t)
