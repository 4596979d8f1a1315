import warnings

import numpy as np
import pytest

from edgecond.branches import (BranchSet, branch_spectrum, fiber_operator, quantize_symbol_1d, spectral_flow,
                               xi_grid)
from edgecond.lattice import Grid, assemble_hamiltonian, fourier_multipliers
from edgecond.models import WallProfile, make_model, shallow_water3x3

G64 = Grid(64, 64, 24.0, 24.0)


def test_xi_grid():
    g = Grid(8, 8, 4.0, 4.0)
    xi = xi_grid(g)
    assert np.allclose(xi, 2 * np.pi * np.arange(-4, 4) / 4.0)
    assert np.all(np.abs(xi_grid(g, 3.2)) <= 3.2)


@pytest.mark.parametrize("name", ["dirac2x2", "pwave", "shallow_water3x3"])
def test_fiber_equals_lattice_block(name):
    g = Grid(16, 16, 12.0, 12.0)
    m = make_model(name, {}, WallProfile(period=12.0))
    H = assemble_hamiltonian(m, g)
    k = fourier_multipliers(g.Nx, g.Lx, 1, H.nyquist[0])
    for j in (0, 3, 8, 13):
        F = fiber_operator(m, k[j], g, H.nyquist[1])
        assert np.max(np.abs(F.matrix - H.fiber(j))) < 1e-12


def test_union_of_fibers_is_spectrum():
    # [DERIVED] block-circulant structure, 16x16
    g = Grid(16, 16, 12.0, 12.0)
    m = make_model("dirac2x2", {}, WallProfile(period=12.0))
    H = assemble_hamiltonian(m, g)
    full = np.linalg.eigvalsh(H.toarray())
    fib = np.sort(np.concatenate([np.linalg.eigvalsh(fiber_operator(m, x, g).matrix)
                                  for x in fourier_multipliers(16, 12.0, 1, "keep")]))
    assert np.max(np.abs(full - fib)) <= 1e-8


def test_collocation_matches_differential_at_mu_zero():
    m = shallow_water3x3(WallProfile(period=24.0))
    F1 = fiber_operator(m, 0.7, G64)
    F2 = quantize_symbol_1d(m, 0.7, G64)
    assert F2.quantization == "collocation"
    assert np.max(np.abs(F1.matrix - F2.matrix)) < 1e-12


def test_regularized_fiber_hermitian_and_routed():
    m = shallow_water3x3(WallProfile(period=24.0), mu_reg=0.2)
    F = fiber_operator(m, 0.4, Grid(32, 32, 24.0, 24.0))
    assert F.quantization == "collocation" and F.hermiticity_defect < 1e-12
    with pytest.raises(ValueError):
        quantize_symbol_1d(make_model("dirac2x2"), 0.1, G64)


@pytest.mark.parametrize("mu", [0.0, 0.2])
def test_slopes_are_derivatives(mu):
    # Hellmann-Feynman slopes against finite differences of the eigenvalues
    g = Grid(32, 32, 24.0, 24.0)
    m = shallow_water3x3(WallProfile(period=24.0), mu_reg=mu)
    x, h = 0.45, 1e-5
    F = fiber_operator(m, x, g)
    w, U = np.linalg.eigh(F.matrix)
    s = np.real(np.einsum("ij,ij->j", U.conj(), F.dmatrix @ U))
    fd = (np.linalg.eigvalsh(fiber_operator(m, x + h, g).matrix)
          - np.linalg.eigvalsh(fiber_operator(m, x - h, g).matrix)) / (2 * h)
    sel = (w > 0.3) & (w < 0.9)
    assert np.allclose(s[sel], fd[sel], atol=1e-5)


def test_dirac_interface_branch():
    # [DERIVED] a rising mass wall carries the mode E = -xi, localized at y = 0
    m = make_model("dirac2x2", {}, WallProfile(period=24.0))
    bs = branch_spectrum(m, xi_grid(G64, np.pi), (-0.9, 0.9), G64)
    assert spectral_flow(bs, 0.0) == (0, -1)
    x, e, w, s = max((bs.branch(b) for b in range(bs.n_branches)), key=lambda t: t[2].mean() if len(t[2]) else 0)
    assert np.all(w > 0.8)
    assert np.allclose(e, -x, atol=1e-8) and np.allclose(s, -1, atol=1e-8)


def test_pwave_signed_total_zero():
    m = make_model("pwave", {}, WallProfile(period=24.0))
    bs = branch_spectrum(m, xi_grid(G64, np.pi), (-0.9, 0.9), G64)
    total, filtered = spectral_flow(bs, 0.0)
    assert total == 0 and filtered == -2


@pytest.mark.parametrize("beta,want", [(1.0, 2), (10.0, 1)])
def test_equatorial_branch_counts(beta, want):
    m = shallow_water3x3(WallProfile("sign_like", -1.0, 1.0, beta, 24.0))
    bs = branch_spectrum(m, xi_grid(G64, np.pi), (-0.25, 1.25), G64)
    assert spectral_flow(bs, 0.5) == (0, want)


def test_empty_window():
    m = make_model("dirac2x2", {}, WallProfile(period=24.0))
    bs = branch_spectrum(m, xi_grid(Grid(16, 16, 24.0, 24.0)), (5.0, 6.0), Grid(16, 16, 24.0, 24.0))
    assert bs.n_branches == 0 and spectral_flow(bs, 5.5) == (0, 0)


def _synthetic(energies, weights):
    xi = np.arange(len(energies), dtype=float)
    E = [np.array([e]) for e in energies]
    W = [np.array([w]) for w in weights]
    S = [np.zeros(1) for _ in energies]
    ids = [np.array([0]) for _ in energies]
    return BranchSet(xi, (-1, 1), E, W, S, ids)


def test_crossing_rules():
    bs = _synthetic([-0.2, 0.1, 0.3, -0.1], [0.9, 0.9, 0.5, 0.5])
    # up-crossing localized, down-crossing not
    assert spectral_flow(bs, 0.0, 0.8) == (0, 1)
    # a value on the level counts as above it
    bs = _synthetic([-0.2, 0.0, 0.2], [1, 1, 1])
    assert spectral_flow(bs, 0.0) == (1, 1)


def test_tangential_crossing_warns():
    bs = _synthetic([-1e-10, 1e-10], [1, 1])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert spectral_flow(bs, 0.0) == (0, 0)
    assert any("tangential" in str(r.message) for r in rec)


def test_rows_and_counts():
    m = make_model("dirac2x2", {}, WallProfile(period=24.0))
    bs = branch_spectrum(m, xi_grid(G64, 1.0), (-0.5, 0.5), G64)
    rows = bs.rows()
    assert len(rows) == sum(len(e) for e in bs.energies)
    assert bs.count_in(-0.5, 0.5) == len(rows)
    assert all(0 <= r[2] <= 1 + 1e-12 for r in rows)
