"""Fibered 1D operators in the momentum ``xi`` along the interface.

For x-invariant models ``H`` decomposes into ``H[xi]`` acting on functions of
``y``. Eigenvalues of ``H[xi]`` against ``xi`` trace the branches of
interface spectrum; crossings of a level ``E``, signed by slope and filtered
by localization near the rising wall, count the interface modes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .lattice import Grid, default_nyquist, fourier_multipliers, model_terms, switch_Q
from .models import SymbolModel, symbol_at_wall_value

__all__ = ["FiberOperator", "BranchSet", "fiber_operator", "quantize_symbol_1d", "branch_spectrum",
           "spectral_flow", "xi_grid"]


@dataclass
class FiberOperator:
    """Hermitian ``(Ny n) x (Ny n)`` operator at momentum ``xi``.

    ``dmatrix`` is ``d/dxi`` of the matrix (used for exact branch slopes).
    """

    xi: float
    matrix: np.ndarray
    quantization: str
    dmatrix: np.ndarray | None = None

    @property
    def hermiticity_defect(self):
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def xi_grid(grid: Grid, xi_max: float | None = None):
    """Lattice momenta ``2 pi j / L_x`` for ``j = -N_x/2 .. N_x/2 - 1`` (ascending).

    ``xi_max`` keeps only ``|xi| <= xi_max``.
    """
    xi = 2 * np.pi * np.arange(-grid.Nx // 2, grid.Nx // 2) / grid.Lx
    return xi if xi_max is None else xi[np.abs(xi) <= xi_max]


def _y_nodes(grid: Grid):
    return -grid.Ly / 2 + grid.Ly / grid.Ny * np.arange(grid.Ny)


def fiber_operator(model: SymbolModel, xi: float, grid: Grid, nyquist_y: str | None = None) -> FiberOperator:
    """Differential quantization of the symbol at fixed ``xi``.

    Replaces ``D_x^k`` by ``xi^k`` in the lattice term list, so for ``xi``
    on the lattice grid this is exactly the corresponding Fourier block of
    the 2D operator. The regularized 3x3 model is routed to
    :func:`quantize_symbol_1d`.
    """
    if not model.is_differential:
        return quantize_symbol_1d(model, xi, grid, nyquist_y)
    terms = model_terms(model, grid.Ny, grid.Ly, nyquist_y)
    dim = grid.Ny * model.n
    A = np.zeros((dim, dim), dtype=complex)
    dA = np.zeros((dim, dim), dtype=complex)
    for k, Ay, M in terms:
        K = np.kron(Ay, M)
        A += xi**k * K
        if k:
            dA += k * xi ** (k - 1) * K
    return FiberOperator(float(xi), 0.5 * (A + A.conj().T), "differential", dA)


def quantize_symbol_1d(model: SymbolModel, xi: float, grid: Grid, nyquist_y: str | None = None) -> FiberOperator:
    """Collocation quantization in ``y`` of the 3x3 symbol at fixed ``xi``.

    ``A[i, j] = (1/N) sum_k a(y_i, zeta_k) exp(i zeta_k (y_i - y_j))`` with
    ``zeta_k`` the lattice multipliers, then ``A <- (A + A^*)/2``. Under the
    ``zero`` Nyquist rule the real mode ``(-1)^j`` gets the average of the
    symbol at ``+zeta_N`` and ``-zeta_N``: odd parts cancel (matching the
    differential fiber exactly for ``mu_reg = 0``) while even parts such as
    the regularizer see the true ``|zeta_N|``.
    """
    if model.name != "shallow_water3x3":
        raise ValueError("collocation quantization is provided for the 3x3 model")
    rule = nyquist_y or default_nyquist(model)[1]
    N, n = grid.Ny, model.n
    y = _y_nodes(grid)
    zeta = fourier_multipliers(N, grid.Ly, 1, "keep")
    weight = np.ones(N)
    if rule == "zero":
        zeta = np.append(zeta, -zeta[N // 2])
        weight = np.append(weight, 0.5)
        weight[N // 2] = 0.5
    w = np.asarray(model.wall.value(y), dtype=float)
    E = np.exp(1j * np.outer(y, zeta)) * np.sqrt(weight)

    def colloc(x):
        a = symbol_at_wall_value(model, w[:, None], x, zeta[None, :])      # (N, N_k, n, n)
        A = np.einsum("ikab,ik,jk->iajb", a, E, E.conj()).reshape(N * n, N * n) / N
        return 0.5 * (A + A.conj().T)

    h = 1e-6
    dA = (colloc(xi + h) - colloc(xi - h)) / (2 * h)
    return FiberOperator(float(xi), colloc(xi), "collocation", dA)


@dataclass
class BranchSet:
    """Fiber eigenvalues in a window with localization weights and branch links.

    ``energies[j]``, ``weights[j]``, ``slopes[j]`` and ``ids[j]`` hold the
    data at ``xi[j]``; ``ids`` assign each eigenvalue to a linked branch.
    """

    xi: np.ndarray
    window: tuple
    energies: list
    weights: list
    slopes: list
    ids: list
    link_tolerance: list = field(default_factory=list)

    @property
    def n_branches(self):
        return 1 + max((int(i.max()) for i in self.ids if i.size), default=-1)

    def branch(self, b):
        """``(xi, E, weight, slope)`` arrays along branch ``b``."""
        rows = [(self.xi[j], e, w, s) for j in range(len(self.xi))
                for e, w, s, i in zip(self.energies[j], self.weights[j], self.slopes[j], self.ids[j]) if i == b]
        return tuple(np.array(c) for c in zip(*rows)) if rows else tuple(np.zeros(0) for _ in range(4))

    def rows(self):
        """``(xi, E, weight, branch_id)`` rows for CSV output."""
        return [(self.xi[j], float(e), float(w), int(i)) for j in range(len(self.xi))
                for e, w, i in zip(self.energies[j], self.weights[j], self.ids[j])]

    def count_in(self, lo, hi):
        """Number of eigenvalues (over all xi) in ``(lo, hi)``."""
        return int(sum(np.sum((e > lo) & (e < hi)) for e in self.energies))


def branch_spectrum(model: SymbolModel, xi_values, window, grid: Grid, delta_y: float = 1.5,
                    link_factor: float = 4.0, nyquist_y: str | None = None,
                    degeneracy_tol: float = 1e-4) -> BranchSet:
    """Eigenvalues of ``H[xi]`` in ``window`` with localization and branch links.

    Parameters
    ----------
    model : SymbolModel
        Periodic wall with period ``grid.Ly``.
    xi_values : array
        Momenta (sorted ascending internally).
    window : (lo, hi)
    grid : Grid
        Supplies ``Ny`` and ``Ly``.
    delta_y : float
        Transition width of the switch ``Q_Y`` used for the weights
        ``||Q_Y v||^2``.
    link_factor : float
        Links need ``|dE| <= link_factor * max|slope| * dxi``; among
        admissible links the largest eigenvector overlap wins.
    degeneracy_tol : float
        Eigenvalues closer than this are treated as one cluster.

    Notes
    -----
    Within a cluster the eigenvectors are rotated to diagonalize
    ``d H / d xi``. For exact degeneracies this selects the analytic
    continuations of the branches; for tiny avoided crossings, such as the
    tunnelling splitting between modes on the two walls of the torus, it
    selects the diabatic (wall-localized) states.
    """
    lo, hi = map(float, window)
    xi = np.sort(np.asarray(xi_values, dtype=float))
    qy = np.repeat(switch_Q(_y_nodes(grid), grid.Ly, delta_y), model.n)
    E, W, S, V = [], [], [], []
    for x in xi:
        F = fiber_operator(model, x, grid, nyquist_y)
        w, U = np.linalg.eigh(F.matrix)
        sel = (w > lo) & (w < hi)
        w, U = w[sel], _analytic_basis(w[sel], U[:, sel], F.dmatrix, degeneracy_tol)
        E.append(w)
        W.append(np.sum(np.abs(qy[:, None] * U) ** 2, axis=0))
        S.append(np.real(np.einsum("ij,ij->j", U.conj(), F.dmatrix @ U)))
        V.append(U)
    ids, tols = _link(xi, E, S, V, link_factor)
    return BranchSet(xi, (lo, hi), E, W, S, ids, tols)


def _analytic_basis(w, U, dA, tol):
    # inside each (numerically) degenerate cluster pick the eigenvectors of
    # the slope operator, i.e. the limits of the analytic branches
    U = U.copy()
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol:
            if k - start > 1:
                C = U[:, start:k]
                S = C.conj().T @ (dA @ C)
                _, R = np.linalg.eigh(0.5 * (S + S.conj().T))
                U[:, start:k] = C @ R
            start = k
    return U


def _link(xi, E, S, V, factor):
    ids = []
    tols = []
    next_id = 0
    for j in range(len(xi)):
        if j == 0 or E[j].size == 0 or E[j - 1].size == 0:
            cur = np.arange(next_id, next_id + E[j].size)
            next_id += E[j].size
            ids.append(cur)
            tols.append(np.nan)
            continue
        dxi = xi[j] - xi[j - 1]
        smax = max(np.abs(S[j]).max(), np.abs(S[j - 1]).max(), 1e-3)
        tol = factor * smax * dxi
        tols.append(tol)
        dE = np.abs(E[j - 1][:, None] - E[j][None, :])
        ov = np.abs(V[j - 1].conj().T @ V[j])
        cost = np.where(dE <= tol, -ov, 1e6)
        r, c = linear_sum_assignment(cost)
        cur = np.full(E[j].size, -1)
        for a, b in zip(r, c):
            if cost[a, b] < 1e6 and ov[a, b] > 0.1:
                cur[b] = ids[-1][a]
        for b in np.where(cur < 0)[0]:
            cur[b] = next_id
            next_id += 1
        ids.append(cur)
    return ids, tols


def spectral_flow(branches: BranchSet, E_level: float, localization_threshold: float = 0.8,
                  tangent_tol: float = 1e-8):
    """Signed crossings of ``E_level`` along linked branches.

    Returns
    -------
    (int, int)
        ``signed_total`` over all crossings and ``signed_filtered`` over
        crossings whose localization weight (mean of the two endpoints) is at
        least ``localization_threshold``. A crossing counts ``+1`` when the
        branch increases through the level.
    """
    total = filtered = 0
    for b in range(branches.n_branches):
        x, e, w, _ = branches.branch(b)
        for i in range(len(x) - 1):
            # half-open rule: a value equal to the level counts as above it
            if (e[i] < E_level) != (e[i + 1] < E_level):
                slope = (e[i + 1] - e[i]) / (x[i + 1] - x[i])
                if abs(slope) < tangent_tol:
                    warnings.warn(f"tangential crossing near xi = {x[i]:.4g}; excluded")
                    continue
                sgn = int(np.sign(slope))
                total += sgn
                if 0.5 * (w[i] + w[i + 1]) >= localization_threshold:
                    filtered += sgn
    return total, filtered
