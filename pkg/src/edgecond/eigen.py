"""Hermitian eigensolvers: a dense oracle and a certified windowed solver.

Windowed solves above the dense threshold use shift-invert Lanczos (ARPACK)
about the window centre with a Bunch-Kaufman LDL^H factorization. The same
factorization taken at the two window edges gives the inertia of
``H - aI`` and ``H - bI``, which fixes how many eigenvalues the window must
contain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

__all__ = ["EigenWindow", "EigenCertificationError", "eig_dense", "eig_window",
           "inertia", "count_below", "DENSE_THRESHOLD", "DENSE_GUARD"]

DENSE_THRESHOLD = 4096
DENSE_GUARD = 8192


class EigenCertificationError(RuntimeError):
    """The windowed solver could not certify a complete set of eigenpairs."""


@dataclass
class EigenWindow:
    """Eigenpairs of a Hermitian matrix inside ``[a, b]``.

    Attributes
    ----------
    window : tuple
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        Orthonormal columns.
    residuals : ndarray
        ``||H v - lambda v||`` per pair.
    completeness_certificate : str
    expected_count : int or None
        Number of eigenvalues in the window from the inertia count, if used.
    """

    window: tuple
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    completeness_certificate: str
    expected_count: int | None = None

    def __len__(self):
        return len(self.eigenvalues)


def _as_dense(H):
    if sp.issparse(H):
        return H.toarray()
    if hasattr(H, "toarray"):
        return H.toarray()
    return np.asarray(H)


def _matvec_source(H):
    if hasattr(H, "matrix"):
        return H.matrix
    return H


def eig_dense(H, guard: int = DENSE_GUARD):
    """Full eigendecomposition ``H = V diag(w) V^*`` (ascending ``w``).

    Raises
    ------
    ValueError
        If the dimension exceeds ``guard``.
    """
    n = _matvec_source(H).shape[0]
    if n > guard:
        raise ValueError(f"dimension {n} above the dense guard {guard}")
    A = _as_dense(_matvec_source(H))
    w, V = sla.eigh(A, driver="evd" if n <= 2048 else "evr")
    return w, V


def _hetrf(A, shift):
    M = np.array(A, dtype=complex, order="F", copy=True)
    M[np.diag_indices_from(M)] -= shift
    lw = lapack.zhetrf_lwork(M.shape[0], lower=1)
    lwork = int(np.real(lw[0])) if isinstance(lw, tuple) else int(np.real(lw))
    ldu, ipiv, info = lapack.zhetrf(M, lower=1, lwork=max(lwork, 1), overwrite_a=1)
    if info < 0:
        raise RuntimeError(f"zhetrf argument error {info}")
    return ldu, ipiv, info


def _inertia_from_ldl(ldu, ipiv):
    n = ldu.shape[0]
    neg = pos = zero = 0
    k = 0
    d = np.real(np.diagonal(ldu))
    while k < n:
        if ipiv[k] > 0 or k == n - 1:
            if d[k] < 0:
                neg += 1
            elif d[k] > 0:
                pos += 1
            else:
                zero += 1
            k += 1
        else:
            a, c, b = d[k], d[k + 1], ldu[k + 1, k]
            det = a * c - abs(b) ** 2
            if det < 0:
                neg += 1
                pos += 1
            elif det > 0:
                if a + c < 0:
                    neg += 2
                else:
                    pos += 2
            else:
                zero += 1
                if a + c < 0:
                    neg += 1
                else:
                    pos += 1
            k += 2
    return neg, zero, pos


def inertia(H, shift: float):
    """Inertia ``(negative, zero, positive)`` of ``H - shift I``."""
    ldu, ipiv, _ = _hetrf(_as_dense(_matvec_source(H)), shift)
    return _inertia_from_ldl(ldu, ipiv)


def count_below(H, shift: float) -> int:
    """Number of eigenvalues strictly below ``shift`` (Sylvester inertia)."""
    neg, zero, _ = inertia(H, shift)
    if zero:
        raise EigenCertificationError(f"shift {shift} hits an eigenvalue")
    return neg


def _residuals(Hm, w, V):
    if len(w) == 0:
        return np.zeros(0)
    R = Hm @ V - V * w
    return np.linalg.norm(R, axis=0)


def _rayleigh_ritz(Hm, V):
    Q, _ = np.linalg.qr(V)
    S = Q.conj().T @ (Hm @ Q)
    w, U = np.linalg.eigh(0.5 * (S + S.conj().T))
    return w, Q @ U


def eig_window(H, window, tol: float = 1e-9, dense_threshold: int = DENSE_THRESHOLD,
               method: str = "auto", max_tries: int = 4):
    """All eigenpairs of a Hermitian ``H`` with eigenvalues in ``[a, b]``.

    Parameters
    ----------
    H : array, sparse matrix or LatticeOperator
    window : (a, b)
    tol : float
        Bound on the returned residual norms.
    dense_threshold : int
        Dimensions up to this use a dense subset solve.
    method : {'auto', 'dense', 'shift_invert'}

    Returns
    -------
    EigenWindow

    Raises
    ------
    EigenCertificationError
        If the count from inertia does not match the pairs found, or a
        residual exceeds ``tol``.
    """
    a, b = map(float, window)
    if not b > a:
        raise ValueError("window needs b > a")
    Hm = _matvec_source(H)
    n = Hm.shape[0]
    if method == "auto":
        method = "dense" if n <= dense_threshold else "shift_invert"

    if method == "dense":
        A = _as_dense(Hm)
        w, V = sla.eigh(A, subset_by_value=(a, b), driver="evr")
        res = _residuals(A, w, V)
        cert = f"dense LAPACK evr subset over (a, b], dim {n}"
        count = None
    else:
        A = _as_dense(Hm)
        nb, zb, _ = _inertia_from_ldl(*_hetrf(A, b)[:2])
        na, za, _ = _inertia_from_ldl(*_hetrf(A, a)[:2])
        if za or zb:
            raise EigenCertificationError("window edge coincides with an eigenvalue")
        count = nb - na
        cert = f"LDL inertia: {na} below a, {nb} below b, dim {n}"
        if count == 0:
            return EigenWindow((a, b), np.zeros(0), np.zeros((n, 0), complex), np.zeros(0), cert, 0)
        if count + 8 >= n // 2:
            w, V = sla.eigh(A, subset_by_value=(a, b), driver="evr")
        else:
            # shift at the window centre: the wanted eigenvalues are the
            # ones nearest to it, which Lanczos on the inverse finds fastest
            c = 0.5 * (a + b)
            ldu, ipiv, info = _hetrf(A, c)
            if info > 0:
                c = c + 1e-7 * (b - a)
                ldu, ipiv, info = _hetrf(A, c)
            del A

            def solve(x):
                y, _ = lapack.zhetrs(ldu, ipiv, np.asarray(x, dtype=complex).reshape(n, -1), lower=1)
                return y.reshape(np.shape(x))

            op = LinearOperator((n, n), matvec=solve, dtype=complex)
            Aop = LinearOperator((n, n), matvec=lambda x: Hm @ x, dtype=complex)
            pad = 6
            w = np.zeros(0)
            V = np.zeros((n, 0), complex)
            for attempt in range(max_tries):
                k = min(count + pad, n - 2)
                ncv = min(n - 1, max(2 * k + 1, 20))
                try:
                    w, V = eigsh(Aop, k=k, sigma=c, which="LM", OPinv=op, ncv=ncv, tol=1e-12,
                                 v0=np.ones(n, dtype=complex) / np.sqrt(n))
                except ArpackNoConvergence as err:
                    w, V = err.eigenvalues, err.eigenvectors
                inside = (w >= a) & (w <= b)
                if inside.sum() >= count and np.any(w > b) and np.any(w < a):
                    break
                pad = 2 * pad + 8
            sel = (w >= a) & (w <= b)
            w, V = w[sel], V[:, sel]
            if len(w):
                w, V = _rayleigh_ritz(Hm, V)
        res = _residuals(Hm, w, V)
        if len(w) != count:
            raise EigenCertificationError(f"found {len(w)} eigenvalues in window, inertia says {count}")
    order = np.argsort(w)
    w, V, res = w[order], V[:, order], res[order]
    if len(res) and res.max() > tol * max(1.0, np.abs(w).max()):
        raise EigenCertificationError(f"residual {res.max():.3e} above tolerance {tol:.1e}")
    return EigenWindow((a, b), w, V, res, cert, count)
