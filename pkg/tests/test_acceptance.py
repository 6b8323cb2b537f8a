"""Acceptance gate: one test per criterion, each with its tolerance and runtime budget.

Every test records a one-line PASS/FAIL summary (echoed in the terminal summary
by conftest) before asserting, so failing criteria still report what was measured.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from conftest import ACCEPTANCE_LINES
from qrlab.argument import BoundaryMarginError
from qrlab.counting import (
    afr_curve, afr_domain, afr_sphere, count_apoints, growth_fit, min_oscillation,
    multiplicity_sweep, oscillation_profile,
)
from qrlab.hoelder import (
    HoelderConfig, p_yosida_indicator, q_hat_field, rescale_identity_check, yosida_indicator,
)
from qrlab.sequences import (
    MP_EVIDENCE, MU_EVIDENCE, PointSequence, both_zero_check, d_p, mp_detect, mu_p_cover_check,
    separation_statistic,
)
from qrlab.sphere import ExtendedPoint, chordal, chordal_distance, lambda_n
from qrlab.zoo import ZOO, make_zoo_map

pytestmark = pytest.mark.acceptance

RATIONAL5 = {"kind": "rational", "numerator": [1, 0, -2, 0, 1, 3], "denominator": [1, -0.5, 2, 1]}


def record(k, checks, elapsed, budget):
    """Log ``criterion k: PASS|FAIL`` with every sub-check, then assert them all."""
    checks = list(checks) + [(f"runtime {elapsed:.1f}s < {budget:g}s", elapsed < budget)]
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{'ok' if c else 'FAILED'} {name}" for name, c in checks)
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    failed = [name for name, c in checks if not c]
    assert not failed, f"criterion {k} failed: {failed}"


def box(lo, hi, step, dim=2):
    t = np.arange(lo, hi + step / 2, step)
    return np.stack(np.meshgrid(*([t] * dim), indexing="ij"), -1).reshape(-1, dim)


def test_criterion_01_chordal_metric():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100_000

    def batch():
        v = rng.standard_normal((n, 3)) * 10.0 ** rng.uniform(-3, 3, (n, 1))
        return v, rng.random(n) < 0.02

    (a, ai), (b, bi), (c, ci) = batch(), batch(), batch()
    excess = chordal(a, ai, c, ci) - chordal(a, ai, b, bi) - chordal(b, bi, c, ci)
    worst = float(excess.max())
    q0 = chordal_distance(ExtendedPoint.of(0, 0), ExtendedPoint.inf(2))
    q1 = chordal_distance(ExtendedPoint.of(1, 0), ExtendedPoint.of(-1, 0))
    record(1, [(f"triangle excess max {worst:.2e} <= 1e-12 on 1e5 triples", worst <= 1e-12),
               (f"q(0,inf) = {q0!r}", q0 == 1.0), (f"q(e1,-e1) = {q1!r}", q1 == 1.0)],
           time.perf_counter() - t0, 1.0)


def test_criterion_02_lambda():
    t0 = time.perf_counter()
    checks = []
    for n, closed in ((2, math.pi), (3, math.pi**2 / 4)):
        radial, _ = quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-n), 0, np.inf, epsabs=0, epsrel=1e-13)
        oracle = 2 * math.pi ** (n / 2) / gamma(n / 2) * radial
        err = abs(lambda_n(n) - oracle) / oracle
        checks.append((f"lambda_{n} rel err {err:.1e} vs radial quadrature", err <= 1e-8))
        checks.append((f"lambda_{n} matches closed form", abs(lambda_n(n) - closed) <= 1e-8 * closed))
    record(2, checks, time.perf_counter() - t0, 1.0)


def test_criterion_03_yosida_gate():
    t0 = time.perf_counter()
    G = box(-20, 20, 0.5)
    expo, sq = make_zoo_map("exponential"), make_zoo_map("exp_square")
    re = yosida_indicator(expo, G, HoelderConfig.for_map(expo))
    cfg = HoelderConfig.for_map(sq)
    rs = yosida_indicator(sq, G, cfg)
    # the quotient along the segment from 0 to 20 e1
    seg = np.column_stack([np.linspace(0, 20, 401), np.zeros(401)])
    q_axis = float(q_hat_field(sq, seg, cfg).max())
    record(3, [(f"exponential sup {re.estimate:.6f} in [0.49, 0.51]", 0.49 <= re.estimate <= 0.51),
               ("exponential Yosida-consistent", re.consistent),
               (f"exp_square flagged (sup {rs.estimate:.3g}, envelope growth {rs.trend['growth']:.3g}"
                f" at {rs.witness.tolist()})", not rs.consistent),
               (f"exp_square Q_hat up to 20 e1 is {q_axis:.3g} > 1e3", q_axis > 1e3)],
           time.perf_counter() - t0, 30.0)


def test_criterion_04_rescaling_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    maps = [make_zoo_map(k) for k in ("exponential", "elliptic", "sine", "exp_square")]
    maps += [make_zoo_map(RATIONAL5), make_zoo_map({"kind": "winding", "k": 3, "dim": 3}),
             make_zoo_map("zorich")]
    worst = 0.0
    for _ in range(100):
        f = maps[rng.integers(len(maps))]
        a = rng.standard_normal(f.dim) * 10.0 ** rng.uniform(0, 1.5)
        p = rng.uniform(1.0, 3.0)
        delta = 10.0 ** rng.uniform(-4, -1)
        worst = max(worst, rescale_identity_check(f, a, p, delta, 8 if f.dim == 2 else 32))
    record(4, [(f"max relative discrepancy {worst:.2e} <= 1e-12 over 100 tuples", worst <= 1e-12)],
           time.perf_counter() - t0, 10.0)


def _anchors(dim, r_max):
    r = np.geomspace(1.0, r_max, 40)
    if dim == 2:
        dirs = [(math.cos(t), math.sin(t)) for t in (0.0, math.pi / 4, math.pi / 2, 2.0)]
        return np.array([[rr * d[0], rr * d[1]] for rr in r for d in dirs])
    return np.column_stack([r, np.zeros_like(r), np.full_like(r, 0.3)])


def test_criterion_05_p2_reduction():
    t0 = time.perf_counter()
    mismatches, rows = [], []
    for kind in ZOO:
        f = make_zoo_map(RATIONAL5 if kind == "rational" else kind)
        cfg = HoelderConfig.for_map(f)
        G = box(-20, 20, 0.5) if f.dim == 2 else box(-6, 6, 1.0, 3)
        y = yosida_indicator(f, G, cfg)
        py = p_yosida_indicator(f, 2.0, _anchors(f.dim, 100.0 if f.dim == 2 else 200.0), cfg)
        rows.append(f"{kind}={'C' if y.consistent else 'N'}/{'C' if py.consistent else 'N'}")
        if y.consistent != py.consistent:
            mismatches.append(kind)
    record(5, [(f"verdicts agree on all {len(ZOO)} maps [{' '.join(rows)}]", not mismatches)],
           time.perf_counter() - t0, 60.0)


def test_criterion_06_both_zero_battery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    M = 1000
    m = np.arange(1, M + 1)
    disagree = wrong = 0
    for case in range(50):
        p = rng.uniform(1.0, 3.0)
        th = rng.uniform(0, 2 * np.pi, M)
        # |x_M| ~ 2e4 keeps the smallest offsets far above float resolution
        X = 1.01 ** m[:, None] * np.column_stack([np.cos(th), np.sin(th)])
        w = np.linalg.norm(X, axis=1) ** (2 - p)
        u = rng.standard_normal((M, 2))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        convergent = case < 25
        # offsets in weighted units: 1e-2/m tends to zero; 2e-3 stays put, below the
        # weighted gap 1e-2 |x|^(p-1) between consecutive norms
        size = 1e-2 / m if convergent else np.full(M, 2e-3)
        Y = X + (size * w)[:, None] * u
        res = both_zero_check(PointSequence(X), PointSequence(Y), p, eps=1e-3)
        disagree += not res.agree
        wrong += res.verdict != ("agree: both below eps" if convergent else "agree: both above eps")
    record(6, [(f"{disagree} disagreements over 50 pairs at eps=1e-3, M=1000", disagree == 0),
               (f"{wrong} pairs on the unexpected side", wrong == 0)],
           time.perf_counter() - t0, 10.0)


def test_criterion_07_counting_exactness():
    t0 = time.perf_counter()
    expo = make_zoo_map("exponential")
    n10 = count_apoints(expo, [0, 0], 10.0, 1.0).count
    n2pi = count_apoints(expo, [0, 0], 2 * math.pi - 0.01, 1.0).count
    checks = [(f"n(0,10,1) = {n10}", n10 == 3), (f"n(0,2pi-0.01,1) = {n2pi}", n2pi == 1)]
    rng = np.random.default_rng(7)
    for label, f in (("exponential", expo), ("rational deg 5", make_zoo_map(RATIONAL5))):
        bad = skipped = done = 0
        while done < 100:
            a = complex(*rng.standard_normal(2) * 2)
            r = rng.uniform(0.5, 10.0)
            try:
                n_arg = count_apoints(f, [0, 0], r, a, method="argument").count
            except BoundaryMarginError:
                skipped += 1
                continue
            bad += n_arg != count_apoints(f, [0, 0], r, a, method="analytic").count
            done += 1
        checks.append((f"{label}: {bad} mismatches in 100 (a, r) ({skipped} redrawn)", bad == 0))
    record(7, checks, time.perf_counter() - t0, 60.0)


def test_criterion_08_afr_closed_form():
    t0 = time.perf_counter()
    expo, wp = make_zoo_map("exponential"), make_zoo_map("elliptic")
    a40 = afr_sphere(expo, 40.0, samples=100_000, seed=0)
    rel40 = abs(a40.value - 40 / math.pi) / (40 / math.pi)
    checks = [(f"exponential A(40) = {a40.value:.4f} vs 40/pi (rel {rel40:.1e}) within 5%", rel40 <= 0.05)]
    for label, f in (("exponential", expo), ("elliptic", wp)):
        for r in (5.0, 10.0):
            s = afr_sphere(f, r, samples=100_000, seed=0).value
            d = afr_domain(f, r, samples=100_000, seed=0).value
            rel = abs(s - d) / d
            checks.append((f"{label} r={r:g}: sphere {s:.4f} domain {d:.4f} (rel {rel:.1e}) within 3%", rel <= 0.03))
    record(8, checks, time.perf_counter() - t0, 300.0)


def test_criterion_09_growth():
    t0 = time.perf_counter()
    expo, wp = make_zoo_map("exponential"), make_zoo_map("elliptic")
    fe = growth_fit(afr_curve(expo, [2.5, 5, 10, 20, 40], "sphere", 100_000, 0))
    cw = afr_curve(wp, [1.25, 2.5, 5, 10, 20], "sphere", 100_000, 0)
    fw = growth_fit(cw)
    target = 2 * math.pi / 4.0        # degree per cell times pi over the cell area
    ratio = cw.values[-1] / 20.0**2
    record(9, [(f"exponential s = {fe.exponent:.4f} in 1 +- 0.1", abs(fe.exponent - 1) <= 0.1),
               (f"elliptic s = {fw.exponent:.4f} in 2 +- 0.1", abs(fw.exponent - 2) <= 0.1),
               (f"elliptic A(20)/400 = {ratio:.4f} within 10% of pi/2", abs(ratio / target - 1) <= 0.1)],
           time.perf_counter() - t0, 600.0)


def test_criterion_10_mp_mu_battery():
    t0 = time.perf_counter()
    M, ps = 20, (1.5, 2.0, 3.0)
    battery = [("exponential", "m*e1"), ("exponential", "-m*e1"), ("exp_square", "m*e1"), ("identity", "m*e1")]
    cells, disagree, evidence_rows = [], [], set()
    for kind, gen in battery:
        f = make_zoo_map(kind)
        X = PointSequence.from_generator(gen, M)
        for p in ps:
            mp = mp_detect(f, X, p, 1.0).verdict == MP_EVIDENCE
            mu = mu_p_cover_check(f, X, p).verdict == MU_EVIDENCE
            cells.append(f"{kind}:{gen}@{p:g}={'E' if mp else '-'}{'E' if mu else '-'}")
            if mp != mu:
                disagree.append(cells[-1])
            if mp:
                evidence_rows.add((kind, gen))
    sq = make_zoo_map("exp_square")
    X = PointSequence.from_generator("m*e1", M)
    Y = PointSequence.from_generator("m*e1 + 0.01*e2/m", M)
    close = d_p(X, Y, 2.0).value
    transfer = mp_detect(sq, Y, 2.0, 1.0).verdict == mp_detect(sq, X, 2.0, 1.0).verdict
    # supplementary: the diagonal, where exp_square does oscillate (not part of the verdict)
    D = PointSequence.from_generator("m*(e1+e2)/sqrt(2)", M)
    diag = [f"{p:g}:{'E' if mp_detect(sq, D, p, 1.0).evidence else '-'}" for p in ps]
    record(10, [(f"methods agree on all 12 cells [{' '.join(cells)}]", not disagree),
                (f"exp_square m*e1 is the only evidence row (rows with evidence: {sorted(evidence_rows)})",
                 evidence_rows == {("exp_square", "m*e1")}),
                (f"closeness transfer d_p = {close:.1e}, verdict unchanged", close < 1e-2 and transfer),
                (f"info: exp_square on the diagonal mp verdicts [{' '.join(diag)}]", True)],
           time.perf_counter() - t0, 600.0)


def test_criterion_11_separation():
    t0 = time.perf_counter()
    wp, sq = make_zoo_map("elliptic"), make_zoo_map("exp_square")
    vals = [0.3 + 0.2j, -0.7 + 1.1j, 1.9 - 0.4j, -2.2 - 1.5j]
    sw = [separation_statistic(wp, vals, [0, 0], R, 2.0).value for R in (10.0, 20.0, 40.0)]
    ss = [separation_statistic(sq, [1.0, -1.0], [0, 0], R, 2.0).value for R in (10.0, 20.0, 40.0)]
    spread = (max(sw) - min(sw)) / max(sw)
    record(11, [(f"elliptic {', '.join(f'{v:.4f}' for v in sw)} stable (spread {spread:.1e} <= 10%)", spread <= 0.1),
                ("elliptic statistic >= 0.1", min(sw) >= 0.1),
                (f"exp_square {', '.join(f'{v:.4f}' for v in ss)} strictly decreasing", ss[0] > ss[1] > ss[2]),
                ("exp_square below 0.05 by B(0,40)", ss[-1] < 0.05)],
           time.perf_counter() - t0, 120.0)


def test_criterion_12_oscillation():
    t0 = time.perf_counter()
    expo, wp = make_zoo_map("exponential"), make_zoo_map("elliptic")
    radii = [0.025, 0.05, 0.1]
    prof = oscillation_profile(expo, radii, box(-20, 20, 0.5))
    cell = 2 * math.sqrt(2)           # diameter of the period square
    mo, _ = min_oscillation(wp, cell, box(-40, 40, 1.0))
    small = multiplicity_sweep(wp, cell, 100, 40.0, seed=0)
    large = multiplicity_sweep(wp, cell, 1000, 40.0, seed=0)
    record(12, [(f"exponential profile {', '.join(f'{v:.4f}' for v in prof)} at r = {radii}", True),
                ("exponential at r=0.1 <= 0.12", prof[-1] <= 0.12),
                ("exponential decreases as r decreases", bool(np.all(np.diff(prof) > 0))),
                (f"elliptic min oscillation at r={cell:.3f} is {mo:.4f} >= delta = 0.5", mo >= 0.5),
                (f"multiplicity max {small.max_count} (100) vs {large.max_count} (1000) stable",
                 small.max_count == large.max_count)],
           time.perf_counter() - t0, 300.0)
