"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one ``CRITERION n: PASS|FAIL`` line (visible under
``pytest -v``) and then asserts the criterion.
"""
import math
import time
import warnings

import numpy as np
import pytest

from edgecond.branches import branch_spectrum, spectral_flow, xi_grid
from edgecond.conductivity import (conductivity_trace, convergence_study, default_mollifier, filter_sweep,
                                   stability_sweep, trace_from_modes)
from edgecond.eigen import eig_window
from edgecond.invariants import (bulk_difference_fh, degree_gauss_map, degree_signed_det, field_from_model,
                                 winding_integral_3x3)
from edgecond.io_cli import STABLE_3X3, directions_for
from edgecond.lattice import (FilterSpec, Grid, assemble_hamiltonian, bump_perturbation,
                              gaussian_y_perturbation, identity_filter, make_filter_P, make_filter_Q)
from edgecond.models import PAULI, LinearProfile, WallProfile, make_model, shallow_water3x3

L = 24.0
G64 = Grid(64, 64, L, L)
G48 = Grid(48, 48, L, L)


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _report


def _timed(fn, *a, **k):
    t = time.perf_counter()
    v = fn(*a, **k)
    return v, time.perf_counter() - t


def _lattice(name, grid=G64, flipped=False, **params):
    if name == "shallow_water3x3":
        m = shallow_water3x3(WallProfile(period=grid.Ly), **params)
    else:
        m = make_model(name, params, WallProfile(period=grid.Ly))
    if flipped:
        m = m.flipped()
    return assemble_hamiltonian(m, grid)


def test_criterion_01_invariant_quantization(report):
    rows, ok = [], True
    for name, want in (("dirac2x2", -1), ("pwave", -2), ("dwave", -4)):
        m = make_model(name)
        v, t = _timed(degree_signed_det, m)
        vf, tf = _timed(degree_signed_det, m.flipped())
        ok &= v == want and vf == -want and max(t, tf) < 1.0
        rows.append(f"{name} {v:+d}/{vf:+d} ({max(t, tf):.2f} s)")
    report(1, ok, "; ".join(rows))
    assert ok


def test_criterion_02_cross_method(report):
    rows, ok = [], True
    for name, want in (("dirac2x2", 1), ("pwave", 2), ("dwave", 4)):
        d, t = _timed(degree_gauss_map, field_from_model(make_model(name)), 4.0)
        good = abs(d - want) < 1e-3 and t < 60
        ok &= good
        rows.append(f"gauss {name} {d:.8f} ({t:.1f} s)")
    for name, want in (("dirac2x2", -1), ("pwave", -2)):
        v, t = _timed(bulk_difference_fh, make_model(name))
        good = abs(v - want) < 0.05 and t < 60
        ok &= good
        rows.append(f"bulk {name} {v:.5f} ({t:.1f} s)")
    report(2, ok, "; ".join(rows))
    assert ok


def test_criterion_03_winding(report):
    v, t = _timed(winding_integral_3x3, LinearProfile(1.0))
    vf, tf = _timed(winding_integral_3x3, LinearProfile(-1.0))
    ok = abs(v - 2) <= 1e-3 and abs(vf + 2) <= 1e-3 and max(t, tf) < 10
    report(3, ok, f"f=y {v:.6f}, f=-y {vf:.6f} ({max(t, tf):.2f} s)")
    assert ok


def test_criterion_04_lattice_quantization(report):
    t0 = time.perf_counter()
    d = conductivity_trace(_lattice("dirac2x2")).two_pi_sigma
    p = conductivity_trace(_lattice("pwave")).two_pi_sigma
    s = conductivity_trace(_lattice("shallow_water3x3")).two_pi_sigma
    t = time.perf_counter() - t0
    ok = abs(d + 1) <= 0.05 and abs(p + 2) <= 0.1 and abs(s - 2) <= 0.05 and abs(s - 1.9950) <= 0.05 and t <= 600
    report(4, ok, f"64x64: dirac {d:.5f}, pwave {p:.5f}, 3x3 {s:.5f} ({t:.1f} s)")
    assert ok


def test_criterion_05_stability(report):
    # Dirac: compact bumps of radius 7.5 on 48x48 with filter width 3
    fs = FilterSpec(3.0, 3.0)
    H = _lattice("dirac2x2", G48)
    P, Q = make_filter_P(G48, fs), make_filter_Q(G48, fs)
    strengths = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
    worst = {}
    for name, D in zip(("s0", "s1", "s2", "s3"), PAULI):
        fam = lambda r, D=D: None if r == 0 else bump_perturbation(G48, r, 7.5, direction=D, filter_spec=fs)
        res = stability_sweep(H, fam, strengths, P, Q)
        worst[name] = res.max_relative_deviation
    dirac_ok = max(worst.values()) <= 0.02
    # 3x3: V0 = 5 g_{L/4}(y) in each direction, 64x64
    H3 = _lattice("shallow_water3x3")
    r0 = conductivity_trace(H3).two_pi_sigma
    names = directions_for("shallow_water3x3")
    vals = {n: conductivity_trace(H3.plus(gaussian_y_perturbation(G64, 5.0, L / 4, names[n]))).two_pi_sigma
            for n in STABLE_3X3 + ("d2", "d3")}
    stable_dev = {n: abs(vals[n] - r0) for n in STABLE_3X3}
    stable_ok = max(stable_dev.values()) <= 0.05
    unstable_ok = all(abs(vals[n] - r0) > 0.5 for n in ("d2", "d3"))
    reference_ok = abs(vals["d2"] + 0.5394) <= 0.15 and abs(vals["d3"] - 0.1430) <= 0.15
    ok = dirac_ok and stable_ok and unstable_ok and reference_ok
    detail = ("dirac max rel dev " + ", ".join(f"{k} {100 * v:.2f}%" for k, v in worst.items())
              + f" [{'ok' if dirac_ok else 'fail'}]; 3x3 r0 {r0:.4f}, stable |dev| "
              + ", ".join(f"{k} {v:.3f}" for k, v in stable_dev.items())
              + f" [{'ok' if stable_ok else 'fail'}]; d2 {vals['d2']:.4f} (ref -0.5394), d3 {vals['d3']:.4f} "
              f"(ref 0.1430) [deviate>0.5 {'ok' if unstable_ok else 'fail'}, match {'ok' if reference_ok else 'fail'}]")
    report(5, ok, detail)
    assert ok


def test_criterion_06_no_filter_vanishing(report):
    vals = {}
    for name in ("dirac2x2", "pwave", "dwave", "shallow_water3x3"):
        vals[name] = conductivity_trace(_lattice(name), Q=identity_filter(G64)).two_pi_sigma
    ok = all(abs(v) <= 1e-8 for v in vals.values())
    report(6, ok, ", ".join(f"{k} {v:.1e}" for k, v in vals.items()))
    assert ok


def test_criterion_07_filter_sweep(report):
    shifts = np.linspace(0.0, L / 2, 13)
    rows, ok = [], True
    for name, want, tol in (("dirac2x2", 1, 0.05), ("pwave", 2, 0.1)):
        res = filter_sweep(_lattice(name), None, None, shifts)
        v = res.values
        mono = bool(np.all(np.diff(v) >= -1e-9))
        good = abs(v[0] + want) <= tol and abs(v[-1] - want) <= tol and mono
        ok &= good
        rows.append(f"{name} {v[0]:.4f} -> {v[-1]:.4f} monotone={mono}")
    report(7, ok, "; ".join(rows))
    assert ok


def test_criterion_08_convergence(report):
    rows = convergence_study(make_model("dirac2x2"), [12.0, 18.0, 24.0, 36.0], 0.375)
    err = np.array([r["error"] for r in rows])
    Ls = np.array([r["L"] for r in rows])
    nonincreasing = bool(np.all(np.diff(err[-3:]) <= 0))
    order = -np.polyfit(np.log(Ls[-3:]), np.log(err[-3:]), 1)[0]
    ok = nonincreasing and order >= 2
    report(8, ok, "errors " + ", ".join(f"L={l:g}: {e:.2e}" for l, e in zip(Ls, err))
           + f"; fitted order {order:.2f}")
    assert ok


def test_criterion_09_branches(report):
    out = {}
    near = {}
    for label, beta in (("smooth", 1.0), ("steep", 10.0)):
        for mu in (0.0, 0.2, -0.2):
            m = shallow_water3x3(WallProfile("sign_like", -1.0, 1.0, beta, L), mu_reg=mu)
            bs = branch_spectrum(m, xi_grid(G64, math.pi), (-0.3, 1.3), G64)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out[(label, mu)] = spectral_flow(bs, 0.5)
            counts = [int(np.sum(np.abs(e) < 0.1)) for e in bs.energies]
            near[(label, mu)] = (min(counts), max(counts))
    ok = out[("smooth", 0.0)][1] == 2 and out[("steep", 0.0)][1] == 1
    ok &= all(t == 0 for t, _ in out.values())
    for label in ("smooth", "steep"):
        for mu in (0.2, -0.2):
            ok &= near[(label, mu)][1] * 10 <= near[(label, 0.0)][0]
    report(9, ok, "; ".join(f"{k[0]} mu={k[1]:+.1f}: (total, filtered)={v}, near-zero per xi {near[k]}"
                            for k, v in out.items()))
    assert ok


def test_criterion_10_property_suites(report):
    parts = {}
    # eigensolver oracle equivalence, dim 2048
    g = Grid(32, 32, 16.0, 16.0)
    H = assemble_hamiltonian(make_model("dirac2x2", {}, WallProfile(period=16.0)), g)
    ev = np.linalg.eigvalsh(H.toarray())
    ew = eig_window(H, (-0.9, 0.9), method="shift_invert")
    want = ev[(ev > -0.9) & (ev < 0.9)]
    parts["eigen"] = float(np.max(np.abs(ew.eigenvalues - want))) if len(want) == len(ew) else np.inf
    # Hermiticity
    parts["hermiticity"] = max(_lattice(n).hermiticity_defect
                               for n in ("dirac2x2", "pwave", "dwave", "shallow_water3x3"))
    # phase and degenerate-rotation invariance
    rng = np.random.default_rng(7)
    spec = default_mollifier(H.gap)
    P, Q = make_filter_P(g), make_filter_Q(g)
    w, V = ew.eigenvalues.copy(), ew.eigenvectors
    w[1] = w[0]
    base = trace_from_modes(H, w, V, P, Q, spec)[0]
    U, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    Vr = V * np.exp(2j * np.pi * rng.random(V.shape[1]))
    Vr[:, :2] = Vr[:, :2] @ U
    parts["phase"] = abs(2 * np.pi * (trace_from_modes(H, w, Vr, P, Q, spec)[0] - base))
    # mollifier independence (L = 36 keeps enough edge modes in the narrowest support)
    g36 = Grid(96, 96, 36.0, 36.0)
    H36 = assemble_hamiltonian(make_model("dirac2x2", {}, WallProfile(period=36.0)), g36)
    mv = [conductivity_trace(H36, spec=default_mollifier(H36.gap, f, s)).two_pi_sigma
          for f in (0.6, 0.9) for s in ("poly_smoothstep", "bump_exp")]
    parts["mollifier"] = max(mv) - min(mv)
    # orientation antisymmetry: invariants and lattice conductivity
    anti = []
    for name in ("dirac2x2", "pwave", "dwave"):
        m = make_model(name)
        anti.append(degree_signed_det(m) + degree_signed_det(m.flipped()))
        anti.append(degree_gauss_map(field_from_model(m), 4.0) + degree_gauss_map(field_from_model(m.flipped()), 4.0))
        if name != "dwave":
            anti.append(bulk_difference_fh(m) + bulk_difference_fh(m.flipped()))
    anti.append(winding_integral_3x3(LinearProfile(1.0)) + winding_integral_3x3(LinearProfile(-1.0)))
    parts["antisymmetry_invariants"] = float(np.max(np.abs(anti)))
    # lattice values negate within twice the quantization tolerance (0.05)
    lat = [conductivity_trace(_lattice(name)).two_pi_sigma
           + conductivity_trace(_lattice(name, flipped=True)).two_pi_sigma
           for name in ("dirac2x2", "pwave", "dwave", "shallow_water3x3")]
    parts["antisymmetry_lattice"] = float(np.max(np.abs(lat)))
    ok = (parts["eigen"] <= 1e-9 and parts["hermiticity"] <= 1e-10 and parts["phase"] <= 1e-9
          and parts["mollifier"] <= 0.02 and parts["antisymmetry_invariants"] <= 1e-6
          and parts["antisymmetry_lattice"] <= 0.1)
    report(10, ok, ", ".join(f"{k} {v:.2e}" for k, v in parts.items()))
    assert ok
