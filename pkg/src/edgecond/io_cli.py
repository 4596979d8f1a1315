"""Command-line front end: configuration, result files, plots and manifest.

Subcommands
-----------
``invariant``     symbol-level invariants of a model on the line.
``conductivity``  filtered lattice conductivity of one configuration.
``sweep``         stability, filter-shift or convergence sweeps.
``branches``      fiber spectra, branch linking and signed crossings.
``selftest``      a fast end-to-end check of the installation.

Every run writes ``results/<name>.json`` (and ``.csv`` / ``.svg`` where
applicable) plus ``manifest.json`` under the output directory. The manifest
records the command line, the fully resolved configuration (all defaults
included), the package version, timestamps, SHA-256 hashes of the inputs
and the list of output files. Numeric CSV columns are written with 17
significant digits so they round-trip exactly.

Exit codes: 0 success, 1 failed ``--strict`` check or selftest, 2 usage or
configuration error, 3 eigensolver certification failure.
"""
from __future__ import annotations

import argparse
import contextlib
import copy
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .branches import branch_spectrum, spectral_flow, xi_grid
from .conductivity import (conductivity_trace, convergence_study, default_mollifier, filter_sweep,
                           stability_sweep)
from .eigen import EigenCertificationError
from .invariants import (bulk_difference_fh, degree_gauss_map, degree_signed_det, field_from_model,
                         winding_integral_3x3)
from .lattice import (FilterSpec, Grid, assemble_hamiltonian, bump_perturbation, gaussian_y_perturbation,
                      identity_filter, make_filter_P, make_filter_Q, write_operator)
from .models import PAULI, WallProfile, make_model

__all__ = ["DEFAULTS", "main", "build_parser", "resolve_config", "parse_length", "directions_for",
           "write_csv", "write_svg", "thread_count"]

# Every default lives here; the resolved copy is echoed into the manifest.
DEFAULTS = {
    "model": "dirac2x2",
    "params": {},
    "walls": {"kind": "smoothstep", "plateau_minus": -1.0, "plateau_plus": 1.0, "steepness": None,
              "wall_width_delta": 2.0},
    "grid": {"N": 64, "L": 24.0},
    "filters": {"delta_x": 1.5, "delta_y": 1.5, "shift_x": 0.0, "shift_y": 0.0, "p_shift": 0.0},
    "no_q": False,
    "mollifier": {"shape": "poly_smoothstep", "fraction": 0.9},
    "solver": "auto",
    "invariant": {"method": "all", "gauss_radius": 3.0, "gauss_order": 128, "winding_radius": 5.0,
                  "winding_order": 256},
    "sweep": {
        "kind": "stability",
        "strengths": None,          # bump: 0, 2, ..., 10; 3x3 gaussian: 0, 1, ..., 5
        "directions": None,         # all named directions of the model
        "bump_radius": 7.5,
        "bump_filter_delta": 3.0,   # filter transition width used with bump perturbations
        "gaussian_sigma": None,     # 3x3 family width, default L/4
        "shifts": None,             # filter sweep: 13 points over [0, L/2]
        "lengths": [12.0, 18.0, 24.0, 36.0],
        "spacing": 0.375,
    },
    "branches": {"xi_max": math.pi, "E_level": None, "window": None, "localization_threshold": 0.8,
                 "delta_y": 1.5},
    "strict": False,
    "strict_tol": 0.05,
    "output": ".",
}

_PAULI_NAMES = {"s0": PAULI[0], "s1": PAULI[1], "s2": PAULI[2], "s3": PAULI[3]}


def _e(i, j):
    m = np.zeros((3, 3), dtype=complex)
    m[i, j] = 1.0
    return m


_GELL_NAMES = {
    "d1": _e(0, 0), "d2": _e(1, 1), "d3": _e(2, 2),
    "s12": _e(0, 1) + _e(1, 0), "s13": _e(0, 2) + _e(2, 0), "s23": _e(1, 2) + _e(2, 1),
    "a12": 1j * _e(0, 1) - 1j * _e(1, 0), "a13": 1j * _e(0, 2) - 1j * _e(2, 0),
    "a23": 1j * _e(1, 2) - 1j * _e(2, 1),
}
STABLE_3X3 = ("d1", "s12", "s13", "a12", "a13", "a23")


def directions_for(model_name: str):
    """Named Hermitian perturbation directions available for a model."""
    return dict(_GELL_NAMES if model_name == "shallow_water3x3" else _PAULI_NAMES)


# ---------------------------------------------------------------------------
# configuration

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_LEN_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*L\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_length(text, L: float) -> float:
    """Parse a number or a multiple of the box size such as ``L/2`` or ``-0.25L``."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _LEN_RE.match(str(text))
    if not m:
        return float(text)
    coef = m.group(1)
    c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    d = float(m.group(2)) if m.group(2) else 1.0
    return c * L / d


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _flag_overrides(args) -> dict:
    o: dict = {}

    def put(path, value):
        if value is None:
            return
        d = o
        for k in path[:-1]:
            d = d.setdefault(k, {})
        d[path[-1]] = value

    put(("model",), args.model)
    if args.param:
        params = {}
        for item in args.param:
            k, _, v = item.partition("=")
            params[k.strip()] = float(v)
        put(("params",), params)
    if args.mu_reg is not None:
        put(("params", "mu_reg"), args.mu_reg)
    put(("walls", "kind"), args.wall_kind)
    put(("walls", "steepness"), args.steepness)
    put(("walls", "wall_width_delta"), args.wall_width)
    if args.plateaus:
        lo, hi = _floats(args.plateaus)
        put(("walls", "plateau_minus"), lo)
        put(("walls", "plateau_plus"), hi)
    put(("grid", "N"), args.N)
    put(("grid", "L"), args.L)
    if args.delta is not None:
        put(("filters", "delta_x"), args.delta)
        put(("filters", "delta_y"), args.delta)
    put(("filters", "shift_y"), args.q_shift)
    put(("filters", "shift_x"), args.q_shift_x)
    if args.no_q:
        put(("no_q",), True)
    put(("mollifier", "shape"), args.mollifier_shape)
    put(("mollifier", "fraction"), args.mollifier_fraction)
    put(("solver",), args.solver)
    if args.strict:
        put(("strict",), True)
    put(("strict_tol",), args.strict_tol)
    put(("output",), args.out)
    cmd = args.command
    if cmd == "invariant":
        put(("invariant", "method"), args.method)
    elif cmd == "sweep":
        put(("sweep", "kind"), args.kind)
        put(("sweep", "strengths"), _floats(args.strengths) if args.strengths else None)
        put(("sweep", "directions"), args.directions.split(",") if args.directions else None)
        put(("sweep", "shifts"), args.shifts.split(",") if args.shifts else None)
        put(("sweep", "lengths"), _floats(args.lengths) if args.lengths else None)
        put(("sweep", "spacing"), args.spacing)
        put(("sweep", "bump_radius"), args.bump_radius)
    elif cmd == "branches":
        put(("branches", "xi_max"), args.xi_max)
        put(("branches", "E_level"), args.E_level)
        put(("branches", "window"), _floats(args.window) if args.window else None)
        put(("branches", "localization_threshold"), args.threshold)
    return o


def resolve_config(args) -> tuple[dict, list]:
    """Defaults, then the JSON config file, then command-line flags.

    Returns the resolved config and the list of input files read.
    """
    cfg = copy.deepcopy(DEFAULTS)
    inputs = []
    if args.config:
        with open(args.config) as fh:
            cfg = _merge(cfg, json.load(fh))
        inputs.append(args.config)
    cfg = _merge(cfg, _flag_overrides(args))
    L = float(cfg["grid"]["L"])
    for key in ("shift_x", "shift_y", "p_shift"):
        cfg["filters"][key] = parse_length(cfg["filters"][key], L)
    return cfg, inputs


def _wall(cfg, period):
    w = dict(cfg["walls"])
    w["period"] = float(period)
    return WallProfile(**w)


def _model(cfg, period=0.0):
    return make_model(cfg["model"], cfg["params"], _wall(cfg, period))


def _grid(cfg):
    N, L = int(cfg["grid"]["N"]), float(cfg["grid"]["L"])
    return Grid(N, N, L, L)


def _filter_spec(cfg, delta=None):
    f = cfg["filters"]
    d = (f["delta_x"], f["delta_y"]) if delta is None else (delta, delta)
    return FilterSpec(float(d[0]), float(d[1]), float(f["shift_x"]), float(f["shift_y"]), float(f["p_shift"]))


def _mollifier(cfg, gap):
    m = cfg["mollifier"]
    return default_mollifier(gap, float(m["fraction"]), m["shape"])


def _cpus():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def thread_count() -> int:
    """Parallelism cap from ``EDGECOND_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("EDGECOND_THREADS", "1")))
    except ValueError:
        return 1


@contextlib.contextmanager
def _blas_limit(n):
    # cap BLAS threads when threadpoolctl is available
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=n):
        yield


def _pmap(fn, items):
    """Ordered map over a thread pool.

    Workers are capped by ``EDGECOND_THREADS`` and the CPU count; each runs
    single-threaded BLAS so the total thread count stays within the cap
    (oversubscribed BLAS pools spin against each other).
    """
    n = min(thread_count(), _cpus(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with _blas_limit(1), ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# writers

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header, rows):
    """CSV with floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    raise TypeError(f"not serializable: {type(o)}")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def write_svg(path, series, title="", xlabel="", ylabel="", hlines=()):
    """Minimal SVG plot.

    ``series`` is a list of dicts with ``x``, ``y``, ``label``, ``mode``
    (``line`` or ``scatter``) and an optional per-point ``opacity`` array.
    ``hlines`` draws dashed horizontal reference lines.
    """
    W, H, ml, mr, mt, mb = 640, 420, 70, 150, 40, 50
    xs = np.concatenate([np.asarray(s["x"], float) for s in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(s["y"], float) for s in series] + [np.asarray(hlines, float)]) \
        if series else np.zeros(1)
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

    def py(y):
        return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" '
           f'font-size="11">', f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2 - mr / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
           f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{H - mb}" x2="{px(t):.2f}" y2="{H - mb + 4}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{H - mb + 16}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml - 4}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ml + (W - ml - mr) / 2:.1f}" y="{H - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + (H - mt - mb) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + (H - mt - mb) / 2:.1f})">{ylabel}</text>')
    for h in hlines:
        out.append(f'<line x1="{ml}" y1="{py(h):.2f}" x2="{W - mr}" y2="{py(h):.2f}" stroke="gray" '
                   f'stroke-dasharray="4 3"/>')
    for i, s in enumerate(series):
        c = _COLORS[i % len(_COLORS)]
        x, y = np.asarray(s["x"], float), np.asarray(s["y"], float)
        if s.get("mode", "line") == "line":
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
            out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{c}"/>'
                       for a, b in zip(x, y) if np.isfinite(b))
        else:
            op = np.clip(np.asarray(s.get("opacity", np.ones_like(x)), float), 0.06, 1.0)
            out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="1.8" fill="{c}" fill-opacity="{o:.3f}"/>'
                       for a, b, o in zip(x, y, op))
        ly = mt + 14 + 16 * i
        out.append(f'<rect x="{W - mr + 10}" y="{ly - 8}" width="12" height="8" fill="{c}"/>')
        out.append(f'<text x="{W - mr + 26}" y="{ly}">{s.get("label", "")}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Run:
    """Collects output files and writes the manifest (single writer)."""

    def __init__(self, cfg, inputs, argv):
        self.cfg = cfg
        self.inputs = inputs
        self.argv = argv
        self.root = Path(cfg["output"])
        self.results = self.root / "results"
        self.results.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()

    def path(self, name):
        p = self.results / name
        self.outputs.append(str(p.relative_to(self.root)))
        return p

    def extra(self, p):
        self.outputs.append(str(p))

    def finish(self, status):
        man = {
            "command": self.argv,
            "config": self.cfg,
            "version": __version__,
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "threads": thread_count(),
            "inputs": {p: _sha256(p) for p in self.inputs},
            "outputs": self.outputs,
            "status": status,
        }
        write_json(self.root / "manifest.json", man)


# ---------------------------------------------------------------------------
# commands

def _nearest_int_ok(v, tol):
    return abs(v - round(v)) <= tol


def cmd_invariant(cfg, run):
    model = _model(cfg, 0.0)
    ic = cfg["invariant"]
    method = ic["method"]
    out = {"invariant": "2pi_sigma_I", "model": model.name, "params": dict(model.params),
           "walls": model.wall.to_dict(), "results": []}
    wanted = ("signed_det", "gauss_map", "bulk_difference", "winding") if method == "all" else (method,)
    is3 = model.name == "shallow_water3x3"
    ok = True
    for m in wanted:
        if is3 != (m == "winding"):
            if method != "all":
                raise ValueError(f"method {m} does not apply to {model.name}")
            continue
        if m == "bulk_difference" and model.name == "dwave":
            out["results"].append({"method": m, "value": None,
                                   "note": "wall enters the principal symbol; not applicable"})
            continue
        rec = {"method": m}
        if m == "signed_det":
            v, zeros = degree_signed_det(model, return_zeros=True)
            rec.update(value=v, tolerance=0.0, zeros=[z.to_dict() for z in zeros])
        elif m == "gauss_map":
            zeros = degree_signed_det(model, return_zeros=True)[1]
            R = max(ic["gauss_radius"], 1.5 * max((np.linalg.norm(z.location) for z in zeros), default=0))
            v = -degree_gauss_map(field_from_model(model), R, ic["gauss_order"], check=False)
            rec.update(value=v, tolerance=1e-3, radius=R)
        elif m == "bulk_difference":
            r = bulk_difference_fh(model, full=True)
            rec.update(value=r.value, tolerance=0.05, error_estimate=r.error_estimate,
                       imaginary=r.imaginary)
        else:
            v = winding_integral_3x3(model.wall, ic["winding_radius"], ic["winding_order"])
            rec.update(value=v, tolerance=1e-3)
        rec["ok"] = bool(_nearest_int_ok(rec["value"], max(rec["tolerance"], 1e-12)))
        ok &= rec["ok"]
        out["results"].append(rec)
    vals = [r["value"] for r in out["results"] if r.get("value") is not None]
    out["agree"] = bool(len({round(v) for v in vals}) <= 1)
    ok &= out["agree"]
    write_json(run.path("invariant.json"), out)
    for r in out["results"]:
        v = "n/a" if r.get("value") is None else f"{r['value']:.10g}"
        print(f"{model.name:18s} {r['method']:16s} {v}")
    return ok


def _lattice(cfg, model=None):
    g = _grid(cfg)
    model = _model(cfg, g.Ly) if model is None else model
    H = assemble_hamiltonian(model, g)
    return g, model, H


def cmd_conductivity(cfg, run, export=None):
    g, model, H = _lattice(cfg)
    if export:
        write_operator(export, H)
        run.extra(export)
    fs = _filter_spec(cfg)
    P = make_filter_P(g, fs)
    Q = identity_filter(g) if cfg["no_q"] else make_filter_Q(g, fs)
    spec = _mollifier(cfg, H.gap)
    rep = conductivity_trace(H, P, Q, spec, method=cfg["solver"])
    rep.filters = {"P": fs.to_dict(), "Q": "identity" if cfg["no_q"] else fs.to_dict()}
    d = rep.to_dict()
    d["model"] = model.name
    write_json(run.path("conductivity.json"), d)
    write_csv(run.path("conductivity_modes.csv"), ["lambda", "contribution"], rep.mode_contributions)
    print(f"{model.name}: 2 pi sigma = {rep.two_pi_sigma:.10g} (imag {rep.imaginary_residue:.2e}, "
          f"{rep.n_modes} modes, {rep.method})")
    target = 0.0 if cfg["no_q"] else round(rep.two_pi_sigma)
    return abs(rep.two_pi_sigma - target) <= (1e-8 if cfg["no_q"] else cfg["strict_tol"])


def _stability(cfg, run):
    sw = cfg["sweep"]
    g = _grid(cfg)
    model = _model(cfg, g.Ly)
    H = assemble_hamiltonian(model, g)
    names = directions_for(model.name)
    dirs = sw["directions"] or list(names)
    is3 = model.name == "shallow_water3x3"
    strengths = sw["strengths"] or ([0, 1, 2, 3, 4, 5] if is3 else [0, 2, 4, 6, 8, 10])
    fs = _filter_spec(cfg) if is3 else _filter_spec(cfg, sw["bump_filter_delta"])
    P, Q = make_filter_P(g, fs), make_filter_Q(g, fs)
    spec = _mollifier(cfg, H.gap)
    sigma = sw["gaussian_sigma"] or g.Ly / 4

    def family(name):
        D = names[name]
        if is3:
            return lambda r: None if r == 0 else gaussian_y_perturbation(g, r, sigma, D)
        return lambda r: None if r == 0 else bump_perturbation(g, r, sw["bump_radius"], direction=D,
                                                                filter_spec=fs)

    results = _pmap(lambda n: stability_sweep(H, family(n), strengths, P, Q, spec, cfg["solver"]), dirs)
    rows, series = [], []
    ok = True
    for name, res in zip(dirs, results):
        r0 = res.values[0]
        for s, v, rep in zip(res.params, res.values, res.reports):
            rows.append((name, s, v, rep.imaginary_residue, rep.n_modes, abs(v - r0), abs(v / r0 - 1)))
        series.append({"x": res.params, "y": res.values, "label": name})
        if not is3 or name in STABLE_3X3:
            ok &= (res.max_relative_deviation <= 0.02) if not is3 else (res.max_deviation <= cfg["strict_tol"])
        print(f"{name:4s} " + " ".join(f"{v:.6f}" for v in res.values))
    hdr = ["direction", "strength", "two_pi_sigma", "imaginary_residue", "n_modes", "abs_deviation",
           "rel_deviation"]
    write_csv(run.path("sweep_stability.csv"), hdr, rows)
    write_svg(run.path("sweep_stability.svg"), series, f"{model.name} stability", "strength",
              "2 pi sigma")
    write_json(run.path("sweep_stability.json"), {"model": model.name, "filters": fs.to_dict(),
                                                  "directions": dirs, "strengths": strengths,
                                                  "columns": hdr, "rows": rows})
    return ok


def _filter(cfg, run):
    sw = cfg["sweep"]
    g, model, H = _lattice(cfg)
    L = g.Ly
    shifts = [parse_length(s, L) for s in sw["shifts"]] if sw["shifts"] else list(np.linspace(0, L / 2, 13))
    fs = _filter_spec(cfg)
    res = filter_sweep(H, make_filter_P(g, fs), _mollifier(cfg, H.gap), shifts, fs, cfg["solver"])
    rows = [(s, v, r.imaginary_residue, r.n_modes) for s, v, r in zip(res.params, res.values, res.reports)]
    hdr = ["shift_y", "two_pi_sigma", "imaginary_residue", "n_modes"]
    write_csv(run.path("sweep_filter.csv"), hdr, rows)
    ends = (res.values[0], res.values[-1])
    write_svg(run.path("sweep_filter.svg"), [{"x": res.params, "y": res.values, "label": model.name}],
              f"{model.name} filter shift", "Q centre shift_y", "2 pi sigma", hlines=[round(e) for e in ends])
    write_json(run.path("sweep_filter.json"), {"model": model.name, "columns": hdr, "rows": rows})
    for s, v in zip(res.params, res.values):
        print(f"shift {s:8.4f}  {v:.8f}")
    d = np.diff(res.values)
    monotone = bool(np.all(d * np.sign(ends[1] - ends[0]) >= -1e-6))
    return monotone and all(_nearest_int_ok(e, cfg["strict_tol"]) for e in ends) and round(ends[0]) == -round(ends[1])


def _convergence(cfg, run):
    sw = cfg["sweep"]
    model = _model(cfg, 0.0)
    rows = convergence_study(model, sw["lengths"], sw["spacing"], _filter_spec(cfg))
    hdr = ["L", "lam", "N", "value", "error", "resolved", "local_order"]
    table = [tuple(r[k] for k in hdr) for r in rows]
    write_csv(run.path("sweep_convergence.csv"), hdr, table)
    write_svg(run.path("sweep_convergence.svg"),
              [{"x": [r["L"] for r in rows], "y": [math.log10(max(r["error"], 1e-300)) for r in rows],
                "label": "log10 error"}], f"{model.name} convergence", "L", "log10 |error|")
    write_json(run.path("sweep_convergence.json"), {"model": model.name, "columns": hdr, "rows": table})
    for r in rows:
        print(f"L {r['L']:6.2f} N {r['N']:4d} value {r['value']:.10f} error {r['error']:.3e} "
              f"order {r['local_order']:.3f}")
    errs = [r["error"] for r in rows[-3:]]
    return all(b <= a for a, b in zip(errs, errs[1:]))


def cmd_sweep(cfg, run):
    kind = cfg["sweep"]["kind"]
    if kind == "stability":
        return _stability(cfg, run)
    if kind == "filter":
        return _filter(cfg, run)
    if kind == "convergence":
        return _convergence(cfg, run)
    raise ValueError(f"unknown sweep kind {kind!r}")


def cmd_branches(cfg, run):
    bc = cfg["branches"]
    g = _grid(cfg)
    model = _model(cfg, g.Ly)
    lo, hi = model.gap
    E = bc["E_level"] if bc["E_level"] is not None else 0.5 * (lo + hi)
    window = bc["window"] or (lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo))
    xi = xi_grid(g, bc["xi_max"])
    bs = branch_spectrum(model, xi, window, g, bc["delta_y"])
    total, filtered = spectral_flow(bs, E, bc["localization_threshold"])
    write_csv(run.path("branches.csv"), ["xi", "E", "weight", "branch_id"], bs.rows())
    rows = bs.rows()
    write_svg(run.path("branches.svg"),
              [{"x": [r[0] for r in rows], "y": [r[1] for r in rows], "opacity": [r[2] for r in rows],
                "label": "weight ~ opacity", "mode": "scatter"}],
              f"{model.name} fiber spectrum", "xi", "E", hlines=[E])
    out = {"model": model.name, "params": dict(model.params), "walls": model.wall.to_dict(),
           "E_level": E, "window": list(window), "n_xi": len(xi), "n_branches": bs.n_branches,
           "signed_total": total, "signed_filtered": filtered,
           "localization_threshold": bc["localization_threshold"]}
    write_json(run.path("branches.json"), out)
    print(f"{model.name}: signed_total {total}, signed_filtered {filtered}, {bs.n_branches} branches")
    return total == 0


def cmd_selftest(cfg, run):
    """Small, fast checks of each layer; prints one line per check."""
    checks = []

    def check(name, fn):
        try:
            val, ok = fn()
        except Exception as err:  # report and continue
            val, ok = f"error: {err}", False
        checks.append({"check": name, "value": val, "ok": bool(ok)})
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {val}")

    for name, want in (("dirac2x2", -1), ("pwave", -2), ("dwave", -4)):
        check(f"signed_det {name}", lambda n=name, w=want: (lambda v: (v, v == w))(degree_signed_det(make_model(n))))
    check("gauss_map dirac2x2",
          lambda: (lambda v: (v, abs(v - 1) < 1e-3))(degree_gauss_map(field_from_model(make_model("dirac2x2")))))
    check("winding 3x3 smoothstep",
          lambda: (lambda v: (v, abs(v - 2) < 1e-3))(winding_integral_3x3(WallProfile(), 8.0)))
    g = Grid(32, 32, 16.0, 16.0)
    H = assemble_hamiltonian(make_model("dirac2x2", {}, WallProfile(period=16.0)), g)
    check("lattice dirac 32x32", lambda: (lambda v: (v, abs(v + 1) < 0.1))(conductivity_trace(H).two_pi_sigma))
    check("no-Q vanishing",
          lambda: (lambda v: (v, abs(v) < 1e-8))(conductivity_trace(H, Q=identity_filter(g)).two_pi_sigma))
    def agree():
        gs, fs = Grid(16, 16, 12.0, 12.0), FilterSpec(1.0, 1.0)
        Hs = assemble_hamiltonian(make_model("dirac2x2", {}, WallProfile(period=12.0)), gs)
        a, b = (conductivity_trace(Hs, make_filter_P(gs, fs), make_filter_Q(gs, fs), method=m).two_pi_sigma
                for m in ("full", "fibered"))
        return abs(a - b), abs(a - b) < 1e-9

    check("full vs fibered 16x16", agree)
    write_json(run.path("selftest.json"), {"checks": checks})
    return all(c["ok"] for c in checks)


# ---------------------------------------------------------------------------
# parser

def _common(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--model", choices=["dirac2x2", "pwave", "dwave", "shallow_water3x3"])
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter (repeatable)")
    p.add_argument("--mu-reg", type=float, help="3x3 regularization mu")
    p.add_argument("--wall-kind", choices=["smoothstep", "tanh_sine", "sign_like"])
    p.add_argument("--steepness", type=float)
    p.add_argument("--wall-width", type=float, help="half-width of the wall transition")
    p.add_argument("--plateaus", metavar="LO,HI", help="wall plateau values")
    p.add_argument("--N", type=int, help="grid points per direction")
    p.add_argument("--L", type=float, help="box size")
    p.add_argument("--delta", type=float, help="filter transition width (x and y)")
    p.add_argument("--q-shift", help="Q centre shift in y, number or multiple of L such as L/2")
    p.add_argument("--q-shift-x", help="Q centre shift in x")
    p.add_argument("--no-q", action="store_true", help="replace Q by the identity")
    p.add_argument("--mollifier-shape", choices=["poly_smoothstep", "bump_exp"])
    p.add_argument("--mollifier-fraction", type=float, help="support as a fraction of the gap half-width")
    p.add_argument("--solver", choices=["auto", "full", "fibered"])
    p.add_argument("--strict", action="store_true", help="nonzero exit when a tolerance check fails")
    p.add_argument("--strict-tol", type=float)
    p.add_argument("--out", help="output directory (results/ and manifest.json go here)")


def build_parser():
    ap = argparse.ArgumentParser(prog="edgecond", description="Interface conductivity experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("invariant", help="symbol-level invariants")
    _common(p)
    p.add_argument("--method", choices=["all", "signed_det", "gauss_map", "bulk_difference", "winding"])
    p = sub.add_parser("conductivity", help="filtered lattice conductivity")
    _common(p)
    p.add_argument("--export-operator", metavar="PATH", help="write the lattice operator in binary form")
    p = sub.add_parser("sweep", help="stability, filter or convergence sweep")
    _common(p)
    p.add_argument("kind", nargs="?", choices=["stability", "filter", "convergence"])
    p.add_argument("--strengths", help="comma separated perturbation strengths")
    p.add_argument("--directions", help="comma separated direction names")
    p.add_argument("--shifts", help="comma separated Q shifts (numbers or multiples of L)")
    p.add_argument("--lengths", help="comma separated box sizes")
    p.add_argument("--spacing", type=float, help="grid spacing for the convergence sweep")
    p.add_argument("--bump-radius", type=float)
    p = sub.add_parser("branches", help="fiber spectra and signed crossings")
    _common(p)
    p.add_argument("--xi-max", type=float)
    p.add_argument("--E-level", type=float)
    p.add_argument("--window", metavar="LO,HI")
    p.add_argument("--threshold", type=float, help="localization threshold")
    p = sub.add_parser("selftest", help="quick end-to-end checks")
    _common(p)
    return ap


_COMMANDS = {"invariant": cmd_invariant, "conductivity": cmd_conductivity, "sweep": cmd_sweep,
             "branches": cmd_branches, "selftest": cmd_selftest}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        cfg, inputs = resolve_config(args)
        run = _Run(cfg, inputs, ["edgecond"] + argv)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    status, code = "ok", 0
    try:
        with _blas_limit(min(thread_count(), _cpus())):
            if args.command == "conductivity":
                ok = cmd_conductivity(cfg, run, args.export_operator)
            else:
                ok = _COMMANDS[args.command](cfg, run)
        if not ok:
            status = "check failed"
            if cfg["strict"] or args.command == "selftest":
                code = 1
    except EigenCertificationError as err:
        print(f"certification failure: {err}", file=sys.stderr)
        status, code = f"certification failure: {err}", 3
    except (ValueError, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        status, code = f"error: {err}", 2
    run.finish(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
