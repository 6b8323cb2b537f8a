"""``qrlab``: batch experiment runner.

Every subcommand reads a strict JSON configuration, runs one experiment and
writes ``report.json`` plus one CSV per curve or field into the output
directory.  Reports are deterministic for a fixed configuration and seed;
wall-clock figures live under the ``timing`` key only.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .argument import BoundaryMarginError, QuadratureError
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, parse_config
from .zoo import NoEnumeratorError, NonConvergenceError, list_zoo, make_zoo_map

SCHEMA_VERSION = "1.0"
CSV_SCHEMA_VERSION = "1.0"
NUMERICAL_ERRORS = (ArithmeticError, BoundaryMarginError, QuadratureError, NonConvergenceError,
                    NoEnumeratorError, RuntimeError, ValueError, np.linalg.LinAlgError)


@dataclass
class ExperimentReport:
    config: dict
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)      # name -> (header, rows)
    status: str = "ok"
    diagnostic: str | None = None
    timing: dict = field(default_factory=dict)

    def body(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "qrlab_version": __version__, "status": self.status,
                "diagnostic": self.diagnostic, "config": self.config, "results": self.results,
                "files": {name: list(h) for name, (h, _) in self.tables.items()}}

    def document(self) -> dict:
        return {**self.body(), "timing": self.timing}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# experiment bodies; each fills ``rep.results`` and ``rep.tables``


def _box_grid(g: dict, dim: int) -> np.ndarray:
    ax = np.arange(g["lo"], g["hi"] + 0.5 * g["step"], g["step"])
    mesh = np.meshgrid(*([ax] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _hoelder_cfg(f, P, seed):
    from .hoelder import HoelderConfig
    return HoelderConfig.for_map(f, ladder=tuple(P["ladder"]), directions=P["directions"], seed=seed)


def _run_qfield(f, P, seed, rep):
    from .hoelder import quotient_field, _q_hat
    cfg = _hoelder_cfg(f, P, seed)
    G = _box_grid(P["grid"], f.dim)
    rows, qh_all = [], []
    for i in range(0, len(G), 4096):
        maxima, _ = quotient_field(f, G[i:i + 4096], cfg)
        qh = _q_hat(maxima)
        qh_all.append(qh)
        rows += [list(x) + list(m) + [q] for x, m, q in zip(G[i:i + 4096], maxima, qh)]
    qh = np.concatenate(qh_all)
    j = int(np.argmax(qh))
    header = [f"x{k + 1}" for k in range(f.dim)] + [f"max_at_{d:g}" for d in cfg.ladder] + ["q_hat"]
    rep.tables["qfield"] = (header, rows)
    rep.results.update(alpha=cfg.alpha, ladder=list(cfg.ladder), directions=cfg.directions,
                       points=len(G), sup_q_hat=float(qh[j]), witness=G[j])


def _run_yosida(f, P, seed, rep):
    from .hoelder import yosida_indicator
    cfg = _hoelder_cfg(f, P, seed)
    G = _box_grid(P["grid"], f.dim)
    res = yosida_indicator(f, G, cfg, threshold=P["threshold"], trend_ratio=P["trend_ratio"])
    rep.tables["yosida"] = ([f"x{k + 1}" for k in range(f.dim)] + ["q_hat"],
                            [list(x) + [v] for x, v in zip(G, res.values)])
    rep.results.update(alpha=cfg.alpha, estimate=res.estimate, witness=res.witness, verdict=res.verdict,
                       trend=res.trend, points=len(G))


def _anchor_points(A: dict, dim: int) -> np.ndarray:
    r = np.geomspace(A["r_min"], A["r_max"], A["count"])
    D = np.array([np.asarray(d, float) / np.linalg.norm(d) for d in A["directions"]])
    pts = (r[:, None, None] * D[None]).reshape(-1, dim)
    return pts[np.argsort(np.linalg.norm(pts, axis=1), kind="stable")]


def _run_pyosida(f, P, seed, rep):
    from .hoelder import p_yosida_indicator
    cfg = _hoelder_cfg(f, P, seed)
    A = _anchor_points(P["anchors"], f.dim)
    res = p_yosida_indicator(f, P["p"], A, cfg, threshold=P["threshold"], trend_ratio=P["trend_ratio"])
    rep.tables["pyosida"] = ([f"a{k + 1}" for k in range(f.dim)] + ["weighted_q_hat"],
                             [list(a) + [v] for a, v in zip(A, res.values)])
    rep.results.update(p=P["p"], alpha=cfg.alpha, estimate=res.estimate, witness=res.witness,
                       verdict=res.verdict, trend=res.trend, anchors=len(A))


def _run_seqdist(f, P, seed, rep):
    from .sequences import D_p, PointSequence, both_zero_check, d_p
    X = PointSequence.from_generator(P["X"], P["M"], f.dim)
    Y = PointSequence.from_generator(P["Y"], P["M"], f.dim)
    a, b, s = D_p(X, Y, P["p"]), D_p(Y, X, P["p"]), d_p(X, Y, P["p"])
    bz = both_zero_check(X, Y, P["p"], P["eps"])
    rep.tables["seqdist"] = (["truncation", "D_p_XY", "D_p_YX"],
                             [[t, u, v] for t, u, v in zip(bz.truncations, bz.forward, bz.backward)])
    rep.results.update(D_p_XY={"value": a.value, "pair": a.pair}, D_p_YX={"value": b.value, "pair": b.pair},
                       d_p={"value": s.value, "pair": s.pair}, both_zero={"verdict": bz.verdict, "agree": bz.agree,
                                                                     "trend": bz.trend})


def _run_mpdetect(f, P, seed, rep):
    from .sequences import PointSequence, mp_detect
    X = PointSequence.from_generator(P["generator"], P["M"], f.dim)
    res = mp_detect(f, X, P["p"], P["delta"], V=P["V"], l=P["l"], eps_cover=P["eps_cover"],
                    eps_cluster=P["eps_cluster"], starts=P["starts"], seed=seed)
    late = res.params["late_indices"]
    rep.tables["mpdetect"] = (["m", "covered_fraction"] + [f"companion{k + 1}" for k in range(f.dim)],
                              [[m, c] + list(x) for m, c, x in zip(late, res.covered_fraction, res.companions)])
    rep.results.update(verdict=res.verdict, verdict_l_plus_1=res.verdict_l_plus_1,
                       failing_values=len(res.failing_values), clusters=res.clusters,
                       d_p_companions=res.d_p_companions, nonconverged=res.nonconverged,
                       semantics="truncation trend: last half of the sequence")


def _run_mucheck(f, P, seed, rep):
    from .sequences import PointSequence, mu_p_cover_check
    X = PointSequence.from_generator(P["generator"], P["M"], f.dim)
    res = mu_p_cover_check(f, X, P["p"], P["r"], l=P["l"], L_schedule=P["L"], V=P["V"],
                           samples=P["samples"], seed=seed)
    late = list(range(P["M"] // 2 + 1, P["M"] + 1))
    rep.tables["mucheck"] = (["m", "covered_fraction", "clusters", "max_cluster_diameter"],
                             [[m, c, len(d), max(d, default=0.0)] for m, c, d in
                              zip(late, res.covered_fraction, res.clusters)])
    rep.results.update(verdict=res.verdict, uncovered_trend=res.uncovered_trend, grid_spacing=res.grid_spacing,
                       semantics="truncation trend: last half of the sequence")


def _parse_value(v, dim):
    from .sphere import ExtendedPoint
    if v == "inf":
        return ExtendedPoint.inf(dim)
    if isinstance(v, list):
        return ExtendedPoint.of(v)
    return ExtendedPoint.of(complex(v)) if dim == 2 else ExtendedPoint.of([v] + [0.0] * (dim - 1))


def _run_separation(f, P, seed, rep):
    from .sequences import separation_statistic
    vals = [_parse_value(v, f.dim) for v in P["values"]]
    rows = []
    for R in P["regions"]:
        res = separation_statistic(f, vals, P["center"], R, P["p"], min_points=P["min_points"], seed=seed)
        rows.append([R, res.value] + list(res.quadruple))
    rep.tables["separation"] = (["radius", "statistic", "j", "k", "i", "m"], rows)
    rep.results.update(statistics=[r[1] for r in rows], regions=P["regions"])


def _run_afr(f, P, seed, rep):
    from .counting import afr_curve, growth_fit
    methods = ["sphere", "domain"] if P["method"] == "both" else [P["method"]]
    out = {}
    for m in methods:
        curve = afr_curve(f, P["radii"], m, P["samples"], seed)
        entry = {"values": curve.values, "stderr": curve.stderr}
        try:
            fit = growth_fit(curve)
            entry["fit"] = {"exponent": fit.exponent, "prefactor": fit.prefactor, "residual": fit.residual}
        except ValueError as exc:
            entry["fit"] = {"rejected": str(exc)}
        out[m] = entry
        rep.tables[f"afr_{m}"] = (["radius", "A", "stderr"],
                                  [[r, a, s] for r, a, s in zip(curve.radii, curve.values, curve.stderr)])
    rep.results.update(radii=P["radii"], curves=out)


def _run_oscillation(f, P, seed, rep):
    from .counting import min_oscillation, oscillation_profile
    G = _box_grid(P["grid"], f.dim)
    prof = oscillation_profile(f, P["radii"], G, per_radius=P["per_radius"], seed=seed)
    mins = [min_oscillation(f, r, G, per_radius=P["per_radius"], seed=seed)[0] for r in P["radii"]]
    rep.tables["oscillation"] = (["radius", "sup_diameter", "inf_diameter"],
                                 [[r, s, m] for r, s, m in zip(P["radii"], prof, mins)])
    rep.results.update(radii=P["radii"], sup_diameter=prof, inf_diameter=mins)


def _run_nprobe(f, P, seed, rep):
    from .counting import min_oscillation, multiplicity_sweep
    G = _box_grid(P["grid"], f.dim)
    mo, where = min_oscillation(f, P["r"], G, seed=seed)
    small = multiplicity_sweep(f, P["r"], P["samples"], P["box"], seed)
    large = multiplicity_sweep(f, P["r"], 10 * P["samples"], P["box"], seed)
    hist = np.bincount(large.counts)
    rep.tables["nprobe"] = (["count", "frequency"], [[k, int(v)] for k, v in enumerate(hist)])
    rep.results.update(r=P["r"], min_oscillation=mo, min_oscillation_at=where,
                       max_count=small.max_count, max_count_10x=large.max_count,
                       sample_size_stable=small.max_count == large.max_count)


RUNNERS = {"qfield": _run_qfield, "yosida": _run_yosida, "pyosida": _run_pyosida, "seqdist": _run_seqdist,
           "mpdetect": _run_mpdetect, "mucheck": _run_mucheck, "separation": _run_separation,
           "afr": _run_afr, "oscillation": _run_oscillation, "nprobe": _run_nprobe}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one validated experiment.  Numerical failures are recorded, not raised."""
    rep = ExperimentReport(cfg.to_dict())
    f = make_zoo_map(cfg.map)
    rep.results["map"] = {"label": f.label, "dim": f.dim, "K": f.distortion}
    t0 = time.perf_counter()
    try:
        _with_threads(cfg.threads, RUNNERS[cfg.experiment], f, cfg.params, cfg.seed, rep)
    except NUMERICAL_ERRORS as exc:
        rep.status = "failed"
        rep.diagnostic = f"{type(exc).__name__}: {exc}"
    rep.timing = {"wall_seconds": time.perf_counter() - t0}
    rep.results = _jsonable(rep.results)
    return rep


def _with_threads(n, fn, *args):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return fn(*args)
    with threadpool_limits(limits=n):
        return fn(*args)


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_report(rep: ExperimentReport, out: str | Path) -> Path:
    out = Path(out)
    for name, (header, rows) in rep.tables.items():
        _atomic_write(out / f"{name}.csv", _csv_text(header, rows))
    doc = json.dumps(_jsonable(rep.document()), indent=2, sort_keys=True)
    _atomic_write(out / "report.json", doc + "\n")
    return out / "report.json"


def _plot(rep: ExperimentReport, out: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind = rep.config["experiment"]
    fig, ax = plt.subplots(figsize=(5, 4))
    if kind in ("qfield", "yosida") and rep.config and rep.results.get("map", {}).get("dim") == 2:
        header, rows = rep.tables[kind]
        a = np.array(rows, dtype=float)
        n = int(round(np.sqrt(len(a))))
        im = ax.imshow(a[:, -1].reshape(n, n).T, origin="lower", cmap="viridis",
                       extent=[a[:, 0].min(), a[:, 0].max(), a[:, 1].min(), a[:, 1].max()])
        fig.colorbar(im, ax=ax, label="finite-scale quotient")
    elif kind == "afr":
        for name, (_, rows) in rep.tables.items():
            a = np.array(rows, dtype=float)
            ax.loglog(a[:, 0], np.maximum(a[:, 1], 1e-300), "o-", label=name.removeprefix("afr_"))
        ax.set_xlabel("r")
        ax.set_ylabel("A_f(r)")
        ax.legend()
    elif kind in ("mpdetect", "mucheck"):
        a = np.array(rep.tables[kind][1], dtype=float)
        ax.plot(a[:, 0], a[:, 1], "o-")
        ax.set_xlabel("m")
        ax.set_ylabel("covered fraction")
    else:
        plt.close(fig)
        return None
    path = out / f"{kind}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrlab", description="Normal-family experiments on quasiregular maps.")
    parser.add_argument("--version", action="version", version=f"qrlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file or inline JSON text")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="cap on numerical library threads")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--plot", action="store_true", default=None, help="also write a PNG plot")
    z = sub.add_parser("zoo", help="list the map catalog")
    z.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def _print_zoo(as_json: bool):
    cat = list_zoo()
    if as_json:
        print(json.dumps(_jsonable(cat), indent=2))
        return
    for e in cat:
        caps = ",".join(k for k in ("jacobian", "apoints", "argument_principle") if e[k]) or "-"
        params = ", ".join(e["params"]) or "-"
        note = f"  [{e['apoints_note']}]" if "apoints_note" in e else ""
        print(f"{e['kind']:<12} n={e['dim']} K={e['K']:<4g} {e['declared']:<18} caps={caps:<36} params={params}{note}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "zoo":
        _print_zoo(args.json)
        return 0
    try:
        cfg = parse_config(args.config, args.command,
                           {"seed": args.seed, "threads": args.threads, "out": args.out, "plot": args.plot})
    except ConfigError as exc:
        print(f"qrlab: configuration error: {exc}", file=sys.stderr)
        return 2
    rep = run_experiment(cfg)
    out = Path(cfg.out)
    path = write_report(rep, out)
    if cfg.plot and rep.status == "ok":
        _plot(rep, out)
    if rep.status != "ok":
        print(f"qrlab: numerical failure: {rep.diagnostic} (partial report in {path})", file=sys.stderr)
        return 3
    print(f"qrlab: wrote {path}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
