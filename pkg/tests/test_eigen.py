import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from edgecond.eigen import (EigenCertificationError, count_below, eig_dense, eig_window, inertia)
from edgecond.lattice import Grid, assemble_hamiltonian
from edgecond.models import WallProfile, make_model


def _random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_inertia_matches_eigvalsh(seed, shift):
    # [DERIVED] numpy eigvalsh is the oracle for Sylvester inertia
    A = _random_hermitian(40, seed)
    ev = np.linalg.eigvalsh(A)
    if np.min(np.abs(ev - shift)) < 1e-9:
        return
    neg, zero, pos = inertia(A, shift)
    assert neg == int(np.sum(ev < shift)) and zero == 0 and neg + pos == 40
    assert count_below(A, shift) == neg


def test_count_below_rejects_eigenvalue_shift():
    A = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    with pytest.raises(EigenCertificationError):
        count_below(A, 0.0)


@given(st.integers(0, 10_000), st.floats(-2, 1), st.floats(0.2, 2))
def test_shift_invert_matches_dense(seed, a, width):
    A = _random_hermitian(300, seed)
    b = a + width
    ev = np.linalg.eigvalsh(A)
    if np.min(np.abs(ev - a)) < 1e-8 or np.min(np.abs(ev - b)) < 1e-8:
        return
    ew = eig_window(sp.csr_matrix(A), (a, b), method="shift_invert")
    want = ev[(ev > a) & (ev < b)]
    assert ew.expected_count == len(want)
    assert len(ew) == len(want) and np.max(np.abs(ew.eigenvalues - want), initial=0) <= 1e-9
    assert np.max(ew.residuals, initial=0) <= 1e-9


def test_lattice_window_oracle():
    # eigensolver oracle equivalence on a lattice operator (dim 1152)
    g = Grid(24, 24, 12.0, 12.0)
    H = assemble_hamiltonian(make_model("dirac2x2", {}, WallProfile(period=12.0)), g)
    ev = np.linalg.eigvalsh(H.toarray())
    ew = eig_window(H, (-0.9, 0.9), method="shift_invert")
    dn = eig_window(H, (-0.9, 0.9), method="dense")
    want = ev[(ev > -0.9) & (ev < 0.9)]
    assert np.max(np.abs(ew.eigenvalues - want)) <= 1e-9
    assert np.max(np.abs(dn.eigenvalues - want)) <= 1e-9
    V = ew.eigenvectors
    assert np.allclose(V.conj().T @ V, np.eye(V.shape[1]), atol=1e-9)
    assert "LDL inertia" in ew.completeness_certificate


def test_empty_window():
    A = np.diag([-2.0, 2.0]).astype(complex)
    for m in ("dense", "shift_invert"):
        ew = eig_window(A, (-1, 1), method=m)
        assert len(ew) == 0


def test_window_validation():
    with pytest.raises(ValueError):
        eig_window(np.eye(2), (1, 0))


def test_dense_guard():
    with pytest.raises(ValueError):
        eig_dense(sp.identity(10, format="csr"), guard=5)
    w, V = eig_dense(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
