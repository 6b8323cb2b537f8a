"""Strict JSON experiment configuration.

A configuration names an experiment, a zoo map descriptor and the
experiment's parameters.  Unknown keys anywhere are rejected, every
parameter is checked against the owning routine's preconditions, and all
defaults are resolved into the returned object so a report can echo it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .zoo import UnknownMapError, make_zoo_map

EXPERIMENTS = ("qfield", "yosida", "pyosida", "seqdist", "mpdetect", "mucheck",
               "separation", "afr", "oscillation", "nprobe")
TOP_KEYS = {"experiment", "map", "params", "seed", "threads", "out", "plot"}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# field checkers: each takes (path, value) and returns the normalised value


def _num(lo=-math.inf, hi=math.inf, lo_open=False, integer=False):
    def check(path, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(path, f"expected a finite number, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(path, f"expected an integer, got {v!r}")
        if v < lo or (lo_open and v == lo) or v > hi:
            bound = f"> {lo}" if lo_open else f">= {lo}"
            raise ConfigError(path, f"must be {bound} and <= {hi}, got {v!r}")
        return int(v) if integer else float(v)
    return check


def _list(item, min_len=1, increasing=False):
    def check(path, v):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError(path, f"expected a list with at least {min_len} entries")
        out = [item(f"{path}[{i}]", x) for i, x in enumerate(v)]
        if increasing and any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError(path, "entries must be strictly increasing")
        return out
    return check


def _choice(*options):
    def check(path, v):
        if v not in options:
            raise ConfigError(path, f"expected one of {list(options)}, got {v!r}")
        return v
    return check


def _text(path, v):
    if not isinstance(v, str) or not v.strip():
        raise ConfigError(path, "expected a non-empty string")
    return v


def _point(path, v):
    return _list(_num(), 2)(path, v)


def _value(path, v):
    # a point of R^n, a real number, or the string "inf"
    if v == "inf":
        return v
    if isinstance(v, list):
        return _point(path, v)
    return _num()(path, v)


def _ladder(path, v):
    lad = _list(_num(1e-8, lo_open=False), 2)(path, v)
    if any(b >= a for a, b in zip(lad, lad[1:])) or lad[0] <= 0:
        raise ConfigError(path, "ladder must be strictly decreasing and positive")
    return lad


def _box(path, v):
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object {lo, hi, step}")
    extra = set(v) - {"lo", "hi", "step"}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
    lo = _num()(f"{path}.lo", v.get("lo", -20.0))
    hi = _num()(f"{path}.hi", v.get("hi", 20.0))
    step = _num(0, lo_open=True)(f"{path}.step", v.get("step", 0.5))
    if hi < lo:
        raise ConfigError(path, "hi must be >= lo")
    if (hi - lo) / step > 4000:
        raise ConfigError(path, "grid has more than 4000 points per axis")
    return {"lo": lo, "hi": hi, "step": step}


def _anchors(path, v):
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object {directions, r_min, r_max, count}")
    extra = set(v) - {"directions", "r_min", "r_max", "count"}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
    dirs = _list(_point, 1)(f"{path}.directions", v.get("directions", [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    rmin = _num(0, lo_open=True)(f"{path}.r_min", v.get("r_min", 1.0))
    rmax = _num(0, lo_open=True)(f"{path}.r_max", v.get("r_max", 100.0))
    if rmax < 100 * rmin:
        raise ConfigError(f"{path}.r_max", "anchor magnitudes must span a factor >= 100")
    count = _num(2, 10_000, integer=True)(f"{path}.count", v.get("count", 40))
    if any(all(c == 0 for c in d) for d in dirs):
        raise ConfigError(f"{path}.directions", "directions must be nonzero")
    return {"directions": dirs, "r_min": rmin, "r_max": rmax, "count": count}


def _radii(path, v):
    if isinstance(v, dict):
        extra = set(v) - {"r0", "count"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
        r0 = _num(0, lo_open=True)(f"{path}.r0", v.get("r0", 1.25))
        n = _num(1, 30, integer=True)(f"{path}.count", v.get("count", 5))
        return [r0 * 2.0**k for k in range(n)]
    return _list(_num(0, lo_open=True), 1, increasing=True)(path, v)


_P_GT1 = _num(1, lo_open=True)
_P_GE1 = _num(1)
_SEQ = {"generator": (None, _text), "M": (40, _num(2, 100_000, integer=True))}

SCHEMAS: dict[str, dict] = {
    "qfield": {"grid": ({"lo": -20.0, "hi": 20.0, "step": 0.5}, _box),
               "ladder": ([1e-1, 1e-2, 1e-3, 1e-4], _ladder),
               "directions": (None, _num(8, 4096, integer=True))},
    "yosida": {"grid": ({"lo": -20.0, "hi": 20.0, "step": 0.5}, _box),
               "ladder": ([1e-1, 1e-2, 1e-3, 1e-4], _ladder),
               "directions": (None, _num(8, 4096, integer=True)),
               "threshold": (1e3, _num(0, lo_open=True)),
               "trend_ratio": (10.0, _num(1, lo_open=True))},
    "pyosida": {"p": (2.0, _P_GT1),
                "anchors": ({}, _anchors),
                "ladder": ([1e-1, 1e-2, 1e-3, 1e-4], _ladder),
                "directions": (None, _num(8, 4096, integer=True)),
                "threshold": (1e3, _num(0, lo_open=True)),
                "trend_ratio": (10.0, _num(1, lo_open=True))},
    "seqdist": {"X": (None, _text), "Y": (None, _text), "M": (1000, _num(2, 100_000, integer=True)),
                "p": (2.0, _P_GE1), "eps": (1e-3, _num(0, lo_open=True))},
    "mpdetect": {**_SEQ, "p": (2.0, _P_GE1), "delta": (1.0, _num(0, lo_open=True)),
                 "V": (500, _num(16, 100_000, integer=True)), "l": (2, _num(0, 100, integer=True)),
                 "eps_cover": (1e-2, _num(0, 1, lo_open=True)),
                 "eps_cluster": (0.1, _num(0, 1, lo_open=True)),
                 "starts": (16, _num(16, 4096, integer=True))},
    "mucheck": {**_SEQ, "p": (2.0, _P_GE1), "r": (1.0, _num(0, lo_open=True)),
                "L": (0.1, _num(0, 1, lo_open=True)), "V": (500, _num(16, 100_000, integer=True)),
                "l": (2, _num(0, 100, integer=True)), "samples": (200_000, _num(1000, 10**7, integer=True))},
    "separation": {"values": (None, _list(_value, 2)), "regions": ([10.0, 20.0, 40.0], _radii),
                   "center": ([0.0, 0.0], _point), "p": (2.0, _P_GE1),
                   "min_points": (10, _num(1, 10**6, integer=True))},
    "afr": {"radii": ({"r0": 1.25, "count": 5}, _radii), "method": ("both", _choice("sphere", "domain", "both")),
            "samples": (100_000, _num(100, 10**7, integer=True))},
    "oscillation": {"radii": ([0.025, 0.05, 0.1], _radii),
                    "grid": ({"lo": -20.0, "hi": 20.0, "step": 0.5}, _box),
                    "per_radius": (48, _num(8, 4096, integer=True))},
    "nprobe": {"r": (None, _num(0, lo_open=True)), "grid": ({"lo": -40.0, "hi": 40.0, "step": 1.0}, _box),
               "samples": (100, _num(1, 10**6, integer=True)), "box": (40.0, _num(0, lo_open=True))},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    map: dict
    params: dict
    seed: int = 0
    threads: int = 1
    out: str = "qrlab_out"
    plot: bool = False

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "map": self.map, "params": self.params,
                "seed": self.seed, "threads": self.threads, "out": self.out, "plot": self.plot}


def _load(source) -> dict:
    if isinstance(source, dict):
        return dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(text).read_text()
        except OSError as exc:
            raise ConfigError("<config>", f"cannot read {source!r}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<config>", f"parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<config>", "top level must be a JSON object")
    return doc


def parse_config(source, experiment: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and fully validate a configuration (path, inline JSON text or dict).

    ``experiment`` is the subcommand; it must agree with the document's own
    ``experiment`` key when both are present.  ``overrides`` (seed, threads,
    out, plot) come from command-line flags and win over the document.
    """
    doc = _load(source)
    extra = set(doc) - TOP_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown key")
    kind = doc.get("experiment", experiment)
    if experiment is not None and kind != experiment:
        raise ConfigError("experiment", f"config is for {kind!r} but subcommand is {experiment!r}")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"expected one of {list(EXPERIMENTS)}, got {kind!r}")
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v

    mdesc = doc.get("map")
    if isinstance(mdesc, str):
        mdesc = {"kind": mdesc}
    if not isinstance(mdesc, dict) or "kind" not in mdesc:
        raise ConfigError("map", "expected a map descriptor with a 'kind'")
    try:
        f = make_zoo_map(mdesc)
    except UnknownMapError as exc:
        raise ConfigError("map.kind", str(exc)) from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError("map", str(exc)) from exc

    raw = doc.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params", "expected an object")
    schema = SCHEMAS[kind]
    extra = set(raw) - set(schema)
    if extra:
        raise ConfigError(f"params.{sorted(extra)[0]}", "unknown key")
    params = {}
    for name, (default, check) in schema.items():
        if name in raw:
            params[name] = check(f"params.{name}", raw[name])
        elif default is None and name != "directions":
            raise ConfigError(f"params.{name}", "required")
        else:
            params[name] = check(f"params.{name}", default) if default is not None else None
    _semantic_checks(kind, f, params)

    seed = _num(0, 2**63 - 1, integer=True)("seed", doc.get("seed", 0))
    threads = _num(1, 1024, integer=True)("threads", doc.get("threads", 1))
    out = doc.get("out", "qrlab_out")
    if not isinstance(out, str) or not out:
        raise ConfigError("out", "expected a directory path")
    plot = doc.get("plot", False)
    if not isinstance(plot, bool):
        raise ConfigError("plot", "expected true or false")
    return ExperimentConfig(kind, dict(mdesc), params, seed, threads, out, plot)


def _semantic_checks(kind: str, f, params: dict):
    """Preconditions that need the map itself."""
    dim = f.dim
    if "grid" in params:
        g = params["grid"]
        per_axis = int(round((g["hi"] - g["lo"]) / g["step"])) + 1
        if per_axis**dim > 2_000_000:
            raise ConfigError("params.grid", f"{per_axis}^{dim} grid points exceed 2e6")
    if kind == "pyosida":
        for i, d in enumerate(params["anchors"]["directions"]):
            if len(d) != dim:
                raise ConfigError(f"params.anchors.directions[{i}]", f"expected {dim} coordinates")
    if kind in ("mpdetect", "mucheck", "seqdist"):
        from .sequences import PointSequence, SequenceError
        gens = [("X", params["X"]), ("Y", params["Y"])] if kind == "seqdist" else [("generator", params["generator"])]
        for key, g in gens:
            try:
                PointSequence.from_generator(g, params["M"], dim)
            except SequenceError as exc:
                raise ConfigError(f"params.{key}", str(exc)) from exc
    if kind == "separation":
        if f.apoints is None and f.kernel is None:
            raise ConfigError("map", f"{f.label} has no a-point enumerator")
        if len(params["center"]) != dim:
            raise ConfigError("params.center", f"expected {dim} coordinates")
        for i, v in enumerate(params["values"]):
            if isinstance(v, list) and len(v) != dim:
                raise ConfigError(f"params.values[{i}]", f"expected {dim} coordinates")
    if kind == "afr":
        if params["method"] in ("domain", "both") and f.spherical_jacobian is None and f.jacobian is None:
            raise ConfigError("params.method", f"{f.label} has no Jacobian evaluator")
        if params["method"] in ("sphere", "both") and f.apoints is None and f.kernel is None:
            raise ConfigError("params.method", f"{f.label} has no counting route")
    if kind == "nprobe" and f.apoints is None and f.kernel is None:
        raise ConfigError("map", f"{f.label} has no counting route")
