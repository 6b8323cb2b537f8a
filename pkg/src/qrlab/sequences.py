"""Weighted distances between point sequences, M_p / mu_p detection and a-point separation.

Sequences are finite truncations ``x_1..x_M`` standing in for ``|x_m| -> inf``.
Limit statements ("for all large m", "infinitely often") are read with
truncation-trend semantics: a property must hold on the last half of the
truncation, and its trend across the truncation is reported.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .sphere import ExtendedPoint, chordal, sphere_grid, stereographic
from .zoo import Mapping, enumerate_apoints

DEFAULT_L = 2
EPS_COVER = 1e-2
EPS_CLUSTER = 0.1
MP_EVIDENCE = "M_p-evidence"
NOT_MP = "not M_p at this resolution"
MU_EVIDENCE = "mu_p-evidence"
NOT_MU = "no mu_p-evidence at this resolution"


class SequenceError(ValueError):
    """A point sequence violates the truncation surrogate for ``|x_m| -> inf``."""


# ---------------------------------------------------------------------------
# sequences


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": np.sqrt, "log": np.log, "exp": np.exp, "sin": np.sin, "cos": np.cos}


def _eval_generator(expr: str, m: np.ndarray, dim: int):
    """Evaluate a generator such as ``"m*e1 + e2/m"`` for all indices at once."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name):
            if node.id == "m":
                return m[:, None]
            if node.id == "pi":
                return math.pi
            if node.id.startswith("e") and node.id[1:].isdigit():
                k = int(node.id[1:])
                if not 1 <= k <= dim:
                    raise SequenceError(f"basis vector {node.id} outside R^{dim}")
                e = np.zeros(dim)
                e[k - 1] = 1.0
                return e
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise SequenceError(f"unsupported element in generator {expr!r}: {ast.dump(node)[:60]}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise SequenceError(f"cannot parse generator {expr!r}") from exc
    out = np.broadcast_to(np.asarray(ev(tree), dtype=float), (m.size, dim))
    return np.array(out)


@dataclass(frozen=True)
class PointSequence:
    """A truncated sequence of nonzero points whose norms eventually increase."""

    points: np.ndarray
    generator: str = "explicit"

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        if P.shape[0] == 0:
            raise SequenceError("empty sequence")
        if P.shape[1] < 2 or not np.all(np.isfinite(P)):
            raise SequenceError("points must be finite points of R^n, n >= 2")
        r = np.linalg.norm(P, axis=1)
        if np.any(r == 0):
            raise SequenceError("sequence contains the origin")
        if P.shape[0] >= 2:
            if r[-1] < 10 * r[0]:
                raise SequenceError(f"|x_M| = {r[-1]:.3g} < 10 |x_1| = {10 * r[0]:.3g}")
            tail = r[P.shape[0] // 2:]
            if np.any(np.diff(tail) <= 0):
                raise SequenceError("|x_m| is not strictly increasing on the last half")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)

    @classmethod
    def from_generator(cls, expr: str, M: int, dim: int = 2, start: int = 1) -> "PointSequence":
        """Build ``x_m`` for ``m = start..start+M-1`` from an expression in ``m`` and ``e1..en``."""
        if M < 1:
            raise SequenceError("truncation M must be >= 1")
        m = np.arange(start, start + M, dtype=float)
        return cls(_eval_generator(expr, m, dim), f"{expr} (m={start}..{start + M - 1})")

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def truncate(self, M: int) -> "PointSequence":
        return PointSequence(self.points[:M], self.generator)

    def late(self) -> np.ndarray:
        """Indices (0-based) of the last half of the truncation."""
        return np.arange(self.M // 2, self.M)


# ---------------------------------------------------------------------------
# weighted distances


@dataclass(frozen=True)
class WeightedDistance:
    value: float
    pair: tuple[int, int]          # 1-based (m, k)


def _one_sided(X: np.ndarray, Y: np.ndarray, p: float, chunk: int = 1024) -> WeightedDistance:
    w = np.linalg.norm(X, axis=1) ** (2.0 - p)
    best, pair = np.inf, (0, 0)
    tree = cKDTree(Y)
    # the weight depends on x_m only, so the nearest y_k is the minimiser for each m
    for i in range(0, len(X), chunk):
        d, k = tree.query(X[i:i + chunk])
        ratio = d / w[i:i + chunk]
        j = int(np.argmin(ratio))
        if ratio[j] < best:
            best, pair = float(ratio[j]), (i + j + 1, int(k[j]) + 1)
    return WeightedDistance(best, pair)


def _check_pair(X: PointSequence, Y: PointSequence, p: float):
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    if not p >= 1:
        raise ValueError("p must be >= 1")


def D_p(X: PointSequence, Y: PointSequence, p: float) -> WeightedDistance:
    """``inf_{m,k} |x_m - y_k| / |x_m|^(2-p)`` over the truncations, with the minimising pair."""
    _check_pair(X, Y, p)
    return _one_sided(X.points, Y.points, p)


def d_p(X: PointSequence, Y: PointSequence, p: float) -> WeightedDistance:
    """Symmetric weighted distance ``min(D_p(X, Y), D_p(Y, X))``."""
    a, b = D_p(X, Y, p), D_p(Y, X, p)
    return a if a.value <= b.value else WeightedDistance(b.value, (b.pair[1], b.pair[0]))


def _trend_label(vals) -> str:
    v = np.asarray(vals, dtype=float)
    if v.size < 2 or np.allclose(v, v[0], rtol=1e-9, atol=0):
        return "flat"
    if np.all(np.diff(v) <= 0):
        return "decreasing"
    if np.all(np.diff(v) >= 0):
        return "increasing"
    return "mixed"


@dataclass
class BothZeroResult:
    agree: bool
    verdict: str
    truncations: list[int]
    forward: list[float]
    backward: list[float]
    trend: tuple[str, str]


def both_zero_check(X: PointSequence, Y: PointSequence, p: float, eps: float = 1e-3,
                    truncations=None) -> BothZeroResult:
    """Do ``D_p(X, Y)`` and ``D_p(Y, X)`` fall on the same side of ``eps``?

    Both one-sided values are tracked over increasing truncations; the verdict
    is read at the largest one.
    """
    _check_pair(X, Y, p)
    M = min(X.M, Y.M)
    if truncations is None:
        truncations = sorted({max(2, M // 8), max(2, M // 4), max(2, M // 2), M})
    truncations = [int(t) for t in truncations]
    if any(t < 1 or t > M for t in truncations):
        raise ValueError(f"truncations must lie in [1, {M}]")
    fw = [_one_sided(X.points[:t], Y.points[:t], p).value for t in truncations]
    bw = [_one_sided(Y.points[:t], X.points[:t], p).value for t in truncations]
    small = (fw[-1] < eps, bw[-1] < eps)
    agree = small[0] == small[1]
    verdict = "agree: both below eps" if all(small) else \
        "agree: both above eps" if not any(small) else "disagree"
    return BothZeroResult(agree, verdict, truncations, fw, bw, (_trend_label(fw), _trend_label(bw)))


# ---------------------------------------------------------------------------
# a-point separation


@dataclass
class SeparationResult:
    value: float
    quadruple: tuple[int, int, int, int]   # (j, k, i, m): a_jk from value j, a_im from value i
    points: tuple[np.ndarray, np.ndarray]
    counts: list[int]


def separation_from_sets(sets, p: float) -> SeparationResult:
    """``inf |a_jk - a_im| / |a_jk|^(2-p)`` over distinct labels ``i != j``; zero points are skipped."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    clean = []
    for S in sets:
        S = np.atleast_2d(np.asarray(S, dtype=float)) if len(S) else np.zeros((0, 2))
        clean.append(S[np.linalg.norm(S, axis=1) > 0] if S.size else S)
    idx_nonempty = [j for j, S in enumerate(clean) if len(S)]
    if len(idx_nonempty) < 2:
        raise ValueError("need at least two values with nonempty preimage")
    trees = {j: cKDTree(clean[j]) for j in idx_nonempty}
    best = (np.inf, (0, 0, 0, 0))
    for j in idx_nonempty:
        A = clean[j]
        w = np.linalg.norm(A, axis=1) ** (2.0 - p)
        for i in idx_nonempty:
            if i == j:
                continue
            d, m = trees[i].query(A)
            ratio = d / w
            k = int(np.argmin(ratio))
            if ratio[k] < best[0]:
                best = (float(ratio[k]), (j, k, i, int(m[k])))
    j, k, i, m = best[1]
    return SeparationResult(best[0], best[1], (clean[j][k], clean[i][m]), [len(S) for S in clean])


def separation_statistic(f: Mapping, values, center, radius: float, p: float,
                         min_points: int = 10, l: int | None = None, seed: int = 0) -> SeparationResult:
    """Separation of the a-point sets of ``values`` inside ``B(center, radius)``.

    ``min_points`` guards the requirement that the region holds enough
    a-points of each value; when ``l`` is given, at least ``l + 2`` values are required.
    """
    values = [v if isinstance(v, ExtendedPoint) else
              (ExtendedPoint.of(complex(v)) if np.ndim(v) == 0 else ExtendedPoint.of(v)) for v in values]
    if l is not None and len(values) < l + 2:
        raise ValueError(f"need at least l + 2 = {l + 2} values, got {len(values)}")
    sets = []
    for v in values:
        locs = enumerate_apoints(f, v, center, radius, seed=seed)
        sets.append(np.array([x for x, _ in locs]).reshape(-1, f.dim))
    sparse = [j for j, S in enumerate(sets) if 0 < len(S) < min_points]
    if sparse:
        raise ValueError(f"region holds fewer than {min_points} a-points for values {sparse}")
    return separation_from_sets(sets, p)


# ---------------------------------------------------------------------------
# M_p detection


def ball_samples(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic near-uniform points of the closed unit ball, centre and boundary included."""
    if n == 2:
        i = np.arange(count) + 0.5
        r = np.sqrt(i / count)
        t = 2 * np.pi * i / ((1 + 5**0.5) / 2) ** 2
        inner = np.column_stack([r * np.cos(t), r * np.sin(t)])
    else:
        sob = qmc.Sobol(n, scramble=True, seed=seed)
        pts = 2 * sob.random(2 ** int(np.ceil(np.log2(count * 2.5)))) - 1
        inner = pts[np.linalg.norm(pts, axis=1) <= 1][:count]
    k = max(8, int(np.sqrt(count)) // 2)
    rim = np.random.default_rng(seed).standard_normal((k, n))
    rim /= np.linalg.norm(rim, axis=1, keepdims=True)
    return np.vstack([np.zeros((1, n)), inner, rim])


def _embed(vals, at_inf):
    # chordal distance = half the Euclidean distance on the unit sphere
    return stereographic(vals, at_inf)


def _clusters(E: np.ndarray, link: float):
    """Single-linkage components of embedded points; returns (labels, chordal diameters)."""
    if len(E) == 0:
        return np.zeros(0, dtype=int), []
    tree = cKDTree(E)
    pairs = tree.sparse_distance_matrix(tree, 2 * link, output_type="coo_matrix")
    ncomp, labels = connected_components(pairs, directed=False)
    diams = []
    for c in range(ncomp):
        P = E[labels == c]
        if len(P) > 512:
            # exact diameter is attained on the hull; a random subset bounds it below
            P = P[np.random.default_rng(0).choice(len(P), 512, replace=False)]
        diams.append(float(np.max(np.linalg.norm(P[:, None] - P[None], axis=-1)) / 2))
    return labels, diams


def grid_spacing(E: np.ndarray) -> float:
    """Largest nearest-neighbour chordal distance of an embedded value grid."""
    d, _ = cKDTree(E).query(E, k=2)
    return float(d[:, 1].max() / 2)


def _pattern_search(f: Mapping, starts, target, target_inf, center, radius, iters=40):
    """Coordinate descent of ``x -> q(f(x), c)`` inside a closed ball, vectorised over starts."""
    x = starts.copy()
    v, vi = f.evaluate(x)
    q = chordal(v, vi, target, target_inf)
    n = x.shape[1]
    step = np.full(len(x), radius / 8.0)
    E = np.vstack([np.eye(n), -np.eye(n)])
    for _ in range(iters):
        cand = x[:, None, :] + step[:, None, None] * E[None]
        off = cand - center
        nrm = np.maximum(np.linalg.norm(off, axis=-1, keepdims=True), 1e-300)
        cand = np.where(nrm > radius, center + off * (radius / nrm), cand)
        cv, ci = f.evaluate(cand)
        cq = chordal(cv, ci, target[:, None, :], target_inf[:, None])
        j = np.argmin(cq, axis=1)
        best = cq[np.arange(len(x)), j]
        improve = best < q
        x = np.where(improve[:, None], cand[np.arange(len(x)), j], x)
        q = np.where(improve, best, q)
        step = np.where(improve, step, step * 0.5)
    return x, q


@dataclass
class MpResult:
    verdict: str
    verdict_l_plus_1: str
    failing_values: np.ndarray
    failing_at_inf: np.ndarray
    clusters: list[float]
    covered_fraction: np.ndarray
    companions: np.ndarray
    d_p_companions: float
    nonconverged: list[int]
    params: dict = field(default_factory=dict)

    @property
    def evidence(self) -> bool:
        return self.verdict == MP_EVIDENCE


def _cluster_verdict(E_fail, l, eps_cluster, link):
    _, diams = _clusters(E_fail, 1.5 * link)
    ok = lambda L: len(diams) <= L and all(d <= eps_cluster for d in diams)  # noqa: E731
    return ok(l), ok(l + 1), diams


def mp_detect(f: Mapping, X: PointSequence, p: float, delta: float, V: int = 500, l: int = DEFAULT_L,
              eps_cover: float = EPS_COVER, eps_cluster: float = EPS_CLUSTER, starts: int = 16,
              samples: int = 2048, seed: int = 0) -> MpResult:
    """Search the balls ``B_p(x_m, delta)`` of the late sequence for points taking each sampled value.

    A value passes when every late ball contains a point ``x'`` with
    ``q(f(x'), c) <= eps_cover``.  The verdict is evidence when the failing
    values fit into at most ``l`` chordal clusters of diameter ``<= eps_cluster``;
    the same test with ``l + 1`` clusters is reported alongside.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not p >= 1:
        raise ValueError("p must be >= 1")
    if X.dim != f.dim:
        raise ValueError("sequence and map dimensions differ")
    if starts < 16:
        raise ValueError("need at least 16 starts per value")
    cv, ci = sphere_grid(V, seed, f.dim)
    E = _embed(cv, ci)
    link = grid_spacing(E)
    U = ball_samples(f.dim, samples, seed)
    late = X.late()
    passed = np.ones(V, dtype=bool)
    frac = np.zeros(len(late))
    nonconv = set()
    companions = np.zeros((len(late), f.dim))
    for b, m in enumerate(late):
        x = X.points[m]
        rad = delta * np.linalg.norm(x) ** (2.0 - p)
        S = x + rad * U
        sv, si = f.evaluate(S)
        ok_s = ~np.isnan(sv).any(axis=1)
        S, sv, si = S[ok_s], sv[ok_s], si[ok_s]
        Es = _embed(sv, si)
        # nearest samples per value seed the local search
        k = min(starts, len(S))
        d, idx = cKDTree(Es).query(E, k=k)
        d, idx = d.reshape(V, k), idx.reshape(V, k)
        qbest = d[:, 0] / 2
        xbest = S[idx[:, 0]]
        todo = np.flatnonzero(qbest > eps_cover)
        if todo.size:
            st = S[idx[todo]].reshape(-1, f.dim)
            tv = np.repeat(cv[todo], k, axis=0)
            ti = np.repeat(ci[todo], k)
            xs, qs = _pattern_search(f, st, tv, ti, x, rad)
            qs = qs.reshape(todo.size, k)
            xs = xs.reshape(todo.size, k, f.dim)
            j = np.argmin(qs, axis=1)
            better = qs[np.arange(todo.size), j] < qbest[todo]
            qbest[todo[better]] = qs[np.arange(todo.size), j][better]
            xbest[todo[better]] = xs[np.arange(todo.size), j][better]
            nonconv.update(int(t) for t in todo[~np.isfinite(qs).any(axis=1)])
        covered = qbest <= eps_cover
        passed &= covered
        frac[b] = covered.mean()
        # companion x'_m for the first value covered on every ball so far
        ref = int(np.argmax(passed)) if passed.any() else int(np.argmin(qbest))
        companions[b] = xbest[ref]
    ev_l, ev_l1, diams = _cluster_verdict(E[~passed], l, eps_cluster, link)
    Xl = X.points[late]
    dpc = float(np.min(np.linalg.norm(Xl - companions, axis=1) / np.linalg.norm(Xl, axis=1) ** (2.0 - p)))
    return MpResult(MP_EVIDENCE if ev_l else NOT_MP, MP_EVIDENCE if ev_l1 else NOT_MP,
                    cv[~passed], ci[~passed], diams, frac, companions, dpc, sorted(nonconv),
                    {"p": p, "delta": delta, "V": V, "l": l, "eps_cover": eps_cover,
                     "eps_cluster": eps_cluster, "starts": starts, "samples": samples, "seed": seed,
                     "late_indices": (late + 1).tolist()})


# ---------------------------------------------------------------------------
# mu_p covering


@dataclass
class CoverageReport:
    verdict: str
    covered_fraction: np.ndarray
    clusters: list[list[float]]
    p: float
    radii: np.ndarray
    L: np.ndarray
    l: int
    uncovered_trend: str
    grid_spacing: float

    @property
    def evidence(self) -> bool:
        return self.verdict == MU_EVIDENCE


def mu_p_cover_check(f: Mapping, X: PointSequence, p: float, r_schedule=1.0, l: int = DEFAULT_L,
                     L_schedule=None, V: int = 500, eps_cluster: float = EPS_CLUSTER,
                     samples: int = 200_000, max_batches: int = 16, seed: int = 0) -> CoverageReport:
    """Rasterise ``f(B_p(x_m, r_m))`` onto a value grid and cluster what stays uncovered.

    A grid value counts as covered on a ball when some domain sample maps into
    its nearest-grid-point cell.  Further batches of ``samples`` random domain
    points are drawn while the uncovered set keeps shrinking, up to
    ``max_batches``.  Evidence requires, on every late ball, at most ``l``
    uncovered clusters each of diameter ``<= L_m``.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    late = X.late()
    r = np.broadcast_to(np.asarray(r_schedule, dtype=float), (X.M,)).copy()
    if np.any(r <= 0) or np.any(np.diff(r) > 0):
        raise ValueError("radius schedule must be positive and non-increasing")
    L = np.broadcast_to(np.asarray(eps_cluster if L_schedule is None else L_schedule, dtype=float),
                        (X.M,)).copy()
    cv, ci = sphere_grid(V, seed, f.dim)
    E = _embed(cv, ci)
    h = grid_spacing(E)
    if h > eps_cluster:
        raise ValueError(f"value grid spacing {h:.3g} exceeds eps_cluster {eps_cluster}; raise V")
    tree = cKDTree(E)
    U = ball_samples(f.dim, samples, seed)
    fracs, clusters, ok_all = [], [], True
    for m in late:
        x = X.points[m]
        rad = r[m] * np.linalg.norm(x) ** (2.0 - p)
        rng = np.random.default_rng([seed, int(m)])
        hit = np.zeros(V, dtype=bool)
        pts = U
        for _ in range(max_batches):
            before = int((~hit).sum())
            sv, si = f.evaluate(x + rad * pts)
            keep = ~np.isnan(sv).any(axis=1)
            _, cell = tree.query(_embed(sv[keep], si[keep]))
            hit[cell] = True
            left = int((~hit).sum())
            if left == 0 or (pts is not U and left == before):
                break
            g = rng.standard_normal((samples, f.dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            pts = g * rng.random((samples, 1)) ** (1.0 / f.dim)
        fracs.append(hit.mean())
        _, diams = _clusters(E[~hit], 1.5 * h)
        clusters.append(diams)
        ok_all &= len(diams) <= l and all(d <= L[m] for d in diams)
    fr = np.array(fracs)
    return CoverageReport(MU_EVIDENCE if ok_all else NOT_MU, fr, clusters, p, r[late], L[late], l,
                          _trend_label(1 - fr), h)
