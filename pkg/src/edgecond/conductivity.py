"""Filtered interface conductivity ``2 pi Tr i Q [H, P] phi'(H)`` on the torus.

Two evaluation paths give the same number:

* ``full``: windowed eigenpairs of the whole lattice operator, then
  ``sum_j phi'(l_j) <v_j, i Q (H P - P H) v_j>``.
* ``fibered``: for x-invariant operators and separable filters, the trace
  is assembled fiber by fiber in the x-Fourier basis. With
  ``c_ab = q[a-b] p[b-a]`` (Fourier coefficients of Q_X and P) the diagonal
  block at fiber ``a`` is ``i Q_Y sum_b c_ab (H_b - H_a)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .eigen import eig_window
from .lattice import (DiagonalFilter, FilterSpec, Grid, LatticeOperator, assemble_hamiltonian,
                      fourier_multipliers, make_filter_P, make_filter_Q)

__all__ = ["MollifierSpec", "ConductivityReport", "SweepResult", "phi_prime", "default_mollifier",
           "conductivity_trace", "filter_sweep", "stability_sweep", "convergence_study",
           "trace_from_modes"]

SHAPES = ("bump_exp", "poly_smoothstep")
_BUMP_NORM = 0.44399381616807943782  # integral of exp(-1/(1-t^2)) over (-1, 1)
_POLY_NORM = 32.0 / 35.0


@dataclass(frozen=True)
class MollifierSpec:
    """Energy density phi' supported on ``[center - half_width, center + half_width]``.

    ``poly_smoothstep`` is ``(1 - t^2)^3``; ``bump_exp`` is ``exp(-1/(1 - t^2))``.
    Both are normalized to unit integral.
    """

    center: float = 0.0
    half_width: float = 0.9
    shape: str = "poly_smoothstep"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown mollifier shape {self.shape!r}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def to_dict(self):
        return {"center": self.center, "half_width": self.half_width, "shape": self.shape}


def phi_prime(E, spec: MollifierSpec):
    """Normalized mollifier density at energy ``E``."""
    t = (np.asarray(E, dtype=float) - spec.center) / spec.half_width
    inside = np.abs(t) < 1
    tt = np.where(inside, t, 0.0)
    if spec.shape == "poly_smoothstep":
        v = (1 - tt * tt) ** 3 / _POLY_NORM
    else:
        v = np.exp(-1.0 / (1 - tt * tt)) / _BUMP_NORM
    out = np.where(inside, v, 0.0) / spec.half_width
    return float(out) if np.ndim(out) == 0 else out


def default_mollifier(gap, fraction=0.9, shape="poly_smoothstep") -> MollifierSpec:
    """Mollifier centred in ``gap`` with half-width ``fraction`` times the gap half-width."""
    lo, hi = gap
    return MollifierSpec(0.5 * (lo + hi), fraction * 0.5 * (hi - lo), shape)


@dataclass
class ConductivityReport:
    """Result of one conductivity evaluation.

    ``mode_contributions`` has rows ``(lambda_j, phi'(lambda_j) Re<v_j, i Q [H,P] v_j>)``
    so that ``2 pi`` times their sum is ``two_pi_sigma``.
    """

    two_pi_sigma: float
    imaginary_residue: float
    mode_contributions: np.ndarray
    mollifier: MollifierSpec
    method: str
    filters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def n_modes(self):
        return len(self.mode_contributions)

    def to_dict(self):
        return {
            "two_pi_sigma": self.two_pi_sigma,
            "imaginary_residue": self.imaginary_residue,
            "n_modes": self.n_modes,
            "method": self.method,
            "mollifier": self.mollifier.to_dict(),
            "filters": self.filters,
            "metadata": self.metadata,
        }


# ---------------------------------------------------------------------------
# spectral data

@dataclass
class _FiberModes:
    values: list      # per fiber eigenvalues in the window
    vectors: list     # per fiber eigenvectors
    n: int


def _fiber_modes(H: LatticeOperator, spec: MollifierSpec):
    a, b = spec.support
    vals, vecs = [], []
    for j in range(H.grid.Nx):
        w, V = np.linalg.eigh(H.fiber(j))
        s = (w > a) & (w < b)
        vals.append(w[s])
        vecs.append(V[:, s])
    return _FiberModes(vals, vecs, H.n)


def _fourier_coeffs(f, grid: Grid):
    k = fourier_multipliers(grid.Nx, grid.Lx, 1, "keep")
    E = np.exp(-1j * np.outer(k, grid.x))
    return E @ f / grid.Nx


def _trace_fibered(H: LatticeOperator, modes: _FiberModes, P: DiagonalFilter, Q: DiagonalFilter, spec):
    g = H.grid
    N = g.Nx
    wq = _fourier_coeffs(Q.fx, g)
    wp = _fourier_coeffs(P.fx, g)
    idx = np.arange(N)
    # c[a, b] = q[a - b] p[b - a]
    C = wq[(idx[:, None] - idx[None, :]) % N] * wp[(idx[None, :] - idx[:, None]) % N]
    qy = np.repeat(Q.fy, H.n)
    xterms = [(k, np.kron(Ay, M)) for k, Ay, M in H.terms if k != 0]
    contrib = []
    total = 0j
    for k, K in xterms:
        m = fourier_multipliers(N, g.Lx, k, H.nyquist[0])
        coef = C @ m - C.sum(axis=1) * m          # sum_b c_ab (m_b - m_a)
        for a in range(N):
            V = modes.vectors[a]
            if V.shape[1] == 0 or coef[a] == 0:
                continue
            KV = K @ V
            z = 1j * coef[a] * np.einsum("ij,ij->j", V.conj(), qy[:, None] * KV)
            contrib.append((a, z))
    # gather per mode
    per_mode = {}
    for a, z in contrib:
        per_mode[a] = per_mode.get(a, 0) + z
    lam, c = [], []
    for a in range(N):
        if modes.values[a].size == 0:
            continue
        z = per_mode.get(a, np.zeros(modes.values[a].size, complex))
        w = phi_prime(modes.values[a], spec) * z
        total += w.sum()
        lam.append(modes.values[a])
        c.append(w.real)
    lam = np.concatenate(lam) if lam else np.zeros(0)
    c = np.concatenate(c) if c else np.zeros(0)
    order = np.argsort(lam, kind="stable")
    return total, np.column_stack([lam[order], c[order]]) if lam.size else np.zeros((0, 2))


def trace_from_modes(H: LatticeOperator, w, V, P: DiagonalFilter, Q: DiagonalFilter, spec):
    """``sum_j phi'(w_j) <v_j, i Q (H P - P H) v_j>`` from explicit eigenpairs."""
    if len(w) == 0:
        return 0j, np.zeros((0, 2))
    p = P.diagonal(H.n)[:, None]
    q = Q.diagonal(H.n)[:, None]
    A = H.matrix
    comm = A @ (p * V) - p * (A @ V)
    z = np.einsum("ij,ij->j", V.conj(), 1j * q * comm)
    wz = phi_prime(w, spec) * z
    return wz.sum(), np.column_stack([w, wz.real])


def _use_fibered(H, P, Q, method):
    ok = H.x_invariant and P.separable and Q.separable and np.allclose(P.fy, 1.0)
    if method == "fibered" and not ok:
        raise ValueError("fibered path needs an x-invariant operator and separable filters")
    return ok if method == "auto" else method == "fibered"


def _check_gap(H, spec):
    if H.gap is None:
        return
    a, b = spec.support
    lo, hi = H.gap
    if a < lo - 1e-12 or b > hi + 1e-12:
        raise ValueError(f"mollifier support {spec.support} escapes the bulk gap {H.gap}")


def conductivity_trace(H: LatticeOperator, P: DiagonalFilter | None = None, Q: DiagonalFilter | None = None,
                       spec: MollifierSpec | None = None, method: str = "auto", tol: float = 1e-9,
                       check_gap: bool = True) -> ConductivityReport:
    """Compute ``2 pi sigma~ = 2 pi Tr i Q [H, P] phi'(H)``.

    Parameters
    ----------
    H : LatticeOperator
    P, Q : DiagonalFilter, optional
        Default to the standard switches of :func:`make_filter_P` and
        :func:`make_filter_Q`.
    spec : MollifierSpec, optional
        Defaults to :func:`default_mollifier` of the operator's gap.
    method : {'auto', 'full', 'fibered'}
    tol : float
        Residual tolerance for the windowed eigensolver.
    check_gap : bool
        Reject mollifiers whose support leaves the declared gap.
    """
    g = H.grid
    P = make_filter_P(g) if P is None else P
    Q = make_filter_Q(g) if Q is None else Q
    if spec is None:
        spec = default_mollifier(H.gap)
    if check_gap:
        _check_gap(H, spec)
    if _use_fibered(H, P, Q, method):
        total, rows = _trace_fibered(H, _fiber_modes(H, spec), P, Q, spec)
        used = "fibered"
    else:
        ew = eig_window(H, spec.support, tol=tol)
        total, rows = trace_from_modes(H, ew.eigenvalues, ew.eigenvectors, P, Q, spec)
        used = "full"
    val = 2 * math.pi * total.real
    imag = 2 * math.pi * abs(total.imag)
    return ConductivityReport(val, imag, rows, spec, used, {}, {"grid": g.to_dict(), **H.meta})


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepResult:
    """Parameter values, conductivities and the per-point reports."""

    parameter: str
    params: np.ndarray
    values: np.ndarray
    reports: list

    @property
    def max_deviation(self):
        """Largest ``|value - value[0]|``."""
        return float(np.max(np.abs(self.values - self.values[0]))) if len(self.values) else 0.0

    @property
    def max_relative_deviation(self):
        ref = abs(self.values[0]) if len(self.values) and self.values[0] != 0 else 1.0
        return self.max_deviation / ref

    def rows(self):
        return [(p, r.two_pi_sigma, r.imaginary_residue, r.n_modes)
                for p, r in zip(self.params, self.reports)]


def filter_sweep(H: LatticeOperator, P: DiagonalFilter | None, spec: MollifierSpec | None,
                 shifts: Sequence[float], filter_spec: FilterSpec = FilterSpec(),
                 method: str = "auto") -> SweepResult:
    """Conductivity as a function of the Q_Y centre ``shift_y``.

    The eigenpairs are computed once and reused for every shift.
    """
    g = H.grid
    P = make_filter_P(g, filter_spec) if P is None else P
    spec = default_mollifier(H.gap) if spec is None else spec
    _check_gap(H, spec)
    Q0 = make_filter_Q(g, filter_spec)
    fibered = _use_fibered(H, P, Q0, method)
    if fibered:
        modes = _fiber_modes(H, spec)
    else:
        ew = eig_window(H, spec.support)
    reports = []
    for s in shifts:
        fs = FilterSpec(filter_spec.delta_x, filter_spec.delta_y, filter_spec.shift_x, float(s),
                        filter_spec.p_shift)
        Q = make_filter_Q(g, fs)
        if fibered:
            total, rows = _trace_fibered(H, modes, P, Q, spec)
        else:
            total, rows = trace_from_modes(H, ew.eigenvalues, ew.eigenvectors, P, Q, spec)
        reports.append(ConductivityReport(2 * math.pi * total.real, 2 * math.pi * abs(total.imag), rows, spec,
                                          "fibered" if fibered else "full", {"Q": fs.to_dict()},
                                          {"grid": g.to_dict()}))
    vals = np.array([r.two_pi_sigma for r in reports])
    return SweepResult("shift_y", np.asarray(shifts, float), vals, reports)


def stability_sweep(H: LatticeOperator, V_family: Callable, strengths: Sequence[float],
                    P: DiagonalFilter | None = None, Q: DiagonalFilter | None = None,
                    spec: MollifierSpec | None = None, method: str = "auto") -> SweepResult:
    """Conductivity of ``H + V_family(r)`` for each strength ``r``.

    ``V_family(r)`` returns a :class:`~edgecond.lattice.LocalPotential` (or
    ``None`` for no perturbation).
    """
    reports = []
    for r in strengths:
        V = V_family(r)
        Hr = H if V is None else H.plus(V)
        reports.append(conductivity_trace(Hr, P, Q, spec, method=method))
    vals = np.array([r.two_pi_sigma for r in reports])
    return SweepResult("strength", np.asarray(strengths, float), vals, reports)


def convergence_study(model, lengths: Sequence[float], spacing: float, filter_spec: FilterSpec = FilterSpec(),
                      spec: MollifierSpec | None = None, reference: float | None = None,
                      min_wall_points: int = 3):
    """Conductivity error versus domain size at fixed grid spacing.

    Parameters
    ----------
    model : SymbolModel
        Its wall is re-periodized to each length (same shape and width).
    lengths : sequence of float
        Square domain sizes ``L``; ``N = L / spacing`` must be even.
    spacing : float
    reference : float, optional
        Exact ``2 pi sigma_I``; defaults to the signed-determinant degree.

    Returns
    -------
    list of dict
        Rows with ``L``, ``lam`` = 1/L, ``N``, ``value``, ``error``,
        ``resolved`` and ``local_order`` (from the previous resolved row).
    """
    from dataclasses import replace as _replace
    from .invariants import degree_signed_det

    if reference is None:
        reference = degree_signed_det(model.with_wall(_replace(model.wall, period=0.0)))
    rows = []
    prev = None
    for L in lengths:
        N = int(round(L / spacing))
        if N % 2:
            N += 1
        grid = Grid(N, N, float(L), float(L))
        wall = _replace(model.wall, period=float(L))
        resolved = 2 * wall.wall_width_delta >= min_wall_points * grid.dy and model.wall.kind != "sign_like"
        H = assemble_hamiltonian(model.with_wall(wall), grid)
        rep = conductivity_trace(H, make_filter_P(grid, filter_spec), make_filter_Q(grid, filter_spec), spec)
        err = abs(rep.two_pi_sigma - reference)
        row = {"L": float(L), "lam": 1.0 / L, "N": N, "value": rep.two_pi_sigma, "error": err,
               "resolved": bool(resolved), "local_order": float("nan")}
        if resolved and prev is not None and prev["error"] > 0 and err > 0:
            row["local_order"] = math.log(prev["error"] / err) / math.log(L / prev["L"])
        if resolved:
            prev = row
        rows.append(row)
    return rows
