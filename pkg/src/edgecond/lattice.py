"""Periodized lattice Hamiltonians on an N_x x N_y torus.

Derivatives are Fourier spectral matrices ``F^* diag(kappa^k) F``. The
operator is stored as a sparse matrix together with its term list
``[(k_x, A_y, M), ...]`` meaning ``sum kron(D_x^k, A_y, M)``; for models whose
coefficients do not depend on x this term list gives the exact Fourier
fibers in x.

State ordering is ``index = (i_x * N_y + i_y) * n + component``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import circulant

from .models import GELL_MANN, PAULI, SymbolModel, smoothstep

__all__ = [
    "Grid", "LatticeOperator", "FilterSpec", "DiagonalFilter", "LocalPotential",
    "fourier_multipliers", "derivative_matrix", "default_nyquist", "model_terms",
    "assemble_hamiltonian", "make_filter_P", "make_filter_Q", "switch_P", "switch_Q",
    "bump_perturbation", "gaussian_y_perturbation", "write_operator", "read_operator",
]

DENSE_LIMIT = 16384
NYQUIST_RULES = ("zero", "keep")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with nodes ``-L/2 + j L/N``."""

    Nx: int = 64
    Ny: int = 64
    Lx: float = 24.0
    Ly: float = 24.0

    def __post_init__(self):
        for N in (self.Nx, self.Ny):
            if N < 2 or N % 2:
                raise ValueError("grid sizes must be even and >= 2")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("domain lengths must be positive")

    @property
    def dx(self):
        return self.Lx / self.Nx

    @property
    def dy(self):
        return self.Ly / self.Ny

    @property
    def x(self):
        return -self.Lx / 2 + self.dx * np.arange(self.Nx)

    @property
    def y(self):
        return -self.Ly / 2 + self.dy * np.arange(self.Ny)

    @property
    def xi(self):
        """Fiber momenta ``2 pi j / L_x`` in FFT order."""
        return fourier_multipliers(self.Nx, self.Lx, 1, "keep")

    def to_dict(self):
        return {"Nx": self.Nx, "Ny": self.Ny, "Lx": self.Lx, "Ly": self.Ly}


def fourier_multipliers(N: int, L: float, k: int = 1, nyquist: str = "zero"):
    """Multipliers ``(2 pi j / L)^k`` in FFT order (j = 0..N/2-1, -N/2..-1).

    For odd ``k`` the Nyquist entry ``j = -N/2`` is set to zero when
    ``nyquist='zero'`` and kept otherwise.
    """
    if nyquist not in NYQUIST_RULES:
        raise ValueError(f"nyquist must be one of {NYQUIST_RULES}")
    j = np.fft.fftfreq(N, 1.0 / N)
    m = (2 * np.pi * j / L) ** k
    if k % 2 and nyquist == "zero":
        m[N // 2] = 0.0
    return m


def derivative_matrix(N: int, L: float, k: int = 1, nyquist: str = "zero"):
    """Spectral matrix of ``(-i d/dx)^k`` on ``N`` periodic nodes.

    Parameters
    ----------
    N : int
        Even number of nodes.
    L : float
        Period.
    k : int
        Derivative order, 1 to 4.
    nyquist : {'zero', 'keep'}
        Treatment of the unpaired ``j = -N/2`` multiplier for odd ``k``.

    Returns
    -------
    ndarray
        Complex Hermitian circulant ``N x N`` matrix.
    """
    if N % 2:
        raise ValueError("N must be even")
    if not 1 <= k <= 4:
        raise ValueError("derivative order must be between 1 and 4")
    if L <= 0:
        raise ValueError("L must be positive")
    col = np.fft.ifft(fourier_multipliers(N, L, k, nyquist))
    D = circulant(col)
    return 0.5 * (D + D.conj().T)


def default_nyquist(model: SymbolModel):
    """Nyquist rule ``(x, y)`` used for a model.

    Zeroing the unpaired x multiplier creates a second massless point at the
    zone boundary (a fermion doubler), so x always keeps it. In y the 2x2
    models keep it as well; the 3x3 model zeroes it because its flat band
    couples across the multiplier jump and produces a spurious branch.
    """
    return ("keep", "zero" if model.name == "shallow_water3x3" else "keep")


# ---------------------------------------------------------------------------
# term assembly

def model_terms(model: SymbolModel, Ny: int, Ly: float, nyquist_y: str | None = None):
    """Term list ``[(k_x, A_y, M)]`` with ``H = sum kron(D_x^k_x, A_y, M)``.

    ``A_y`` are dense ``Ny x Ny`` matrices built from y-derivatives and the
    sampled wall profile; variable first-order coefficients are symmetrized
    as ``(C D + D C)/2``.
    """
    if not model.is_differential:
        raise ValueError("regularized 3x3 symbol is not a differential operator; "
                         "use branches.quantize_symbol_1d")
    if getattr(model.wall, "is_exact_sign", False):
        raise ValueError("exact sign walls are not differentiable; use a sign_like profile with finite steepness")
    ny_rule = nyquist_y or default_nyquist(model)[1]
    y = -Ly / 2 + Ly / Ny * np.arange(Ny)
    wall = np.asarray(model.wall.value(y), dtype=float)
    I = np.eye(Ny)
    C = np.diag(wall)
    D1 = derivative_matrix(Ny, Ly, 1, ny_rule)
    s0, s1, s2, s3 = PAULI
    p = model.params
    if model.name == "dirac2x2":
        return [(1, I, s1), (0, D1, s2), (0, C, s3)]
    if model.name in ("pwave", "dwave"):
        D2 = derivative_matrix(Ny, Ly, 2)
        inv2m = 1.0 / (2 * p["mass"])
        terms = [(2, inv2m * I, s1), (0, inv2m * D2 - p["mu_chem"] * I, s1)]
        sym = 0.5 * (C @ D1 + D1 @ C)
        if model.name == "pwave":
            return terms + [(0, sym, s2), (1, p["c0"] * I, s3)]
        return terms + [(0, p["c0"] * D2, s2), (2, -p["c0"] * I, s2), (1, sym, s3)]
    # shallow water (D_x, D_y, -f) . Gamma
    return [(1, I, GELL_MANN[1]), (0, D1, GELL_MANN[4]), (0, -C, GELL_MANN[7])]


@dataclass
class LatticeOperator:
    """Hermitian lattice Hamiltonian with grid metadata.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        The operator, dimension ``Nx * Ny * n``.
    grid : Grid
    n : int
        Internal (spinor) dimension.
    model : str
        Model tag.
    terms : list
        x-invariant term list or ``None`` once an x-dependent piece is added.
    y_potential : ndarray or None
        Extra ``(Ny n) x (Ny n)`` block added to every fiber.
    nyquist : tuple of str
        Rules used for the x and y derivatives.
    """

    matrix: sp.csr_matrix
    grid: Grid
    n: int
    model: str = ""
    terms: list | None = None
    y_potential: np.ndarray | None = None
    nyquist: tuple = ("keep", "keep")
    gap: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def x_invariant(self):
        return self.terms is not None

    @property
    def hermiticity_defect(self):
        A = self.matrix
        d = abs(A - A.getH())
        return float(d.max()) if d.nnz else 0.0

    def toarray(self):
        if self.dim > DENSE_LIMIT:
            raise MemoryError(f"dense storage limited to dim {DENSE_LIMIT}; use the fibered path")
        return self.matrix.toarray()

    def fiber(self, j: int):
        """Dense fiber block at the j-th x Fourier mode (FFT order)."""
        if self.terms is None:
            raise ValueError("operator is not x-invariant")
        g = self.grid
        out = np.zeros((g.Ny * self.n, g.Ny * self.n), dtype=complex)
        for k, Ay, M in self.terms:
            mk = 1.0 if k == 0 else fourier_multipliers(g.Nx, g.Lx, k, self.nyquist[0])[j]
            if mk != 0.0:
                out += mk * np.kron(Ay, M)
        if self.y_potential is not None:
            out += self.y_potential
        return out

    def fibers(self):
        return [self.fiber(j) for j in range(self.grid.Nx)]

    def plus(self, V: "LocalPotential") -> "LatticeOperator":
        """Operator ``H + V``; keeps the fiber structure for y-only potentials."""
        if V.values.shape != (self.grid.Nx, self.grid.Ny) or V.direction.shape != (self.n, self.n):
            raise ValueError("perturbation does not match the operator")
        mat = (self.matrix + V.to_sparse()).tocsr()
        terms, ypot = None, None
        if self.terms is not None and V.y_only:
            terms = self.terms
            block = np.kron(np.diag(V.values[0]), V.direction)
            ypot = block if self.y_potential is None else self.y_potential + block
        return replace(self, matrix=mat, terms=terms, y_potential=ypot)


def _terms_to_sparse(terms, grid: Grid, nyquist_x):
    Ix = sp.identity(grid.Nx, format="csr")
    Dx = {}
    total = None
    for k, Ay, M in terms:
        if k == 0:
            Ax = Ix
        else:
            if k not in Dx:
                Dx[k] = sp.csr_matrix(derivative_matrix(grid.Nx, grid.Lx, k, nyquist_x))
            Ax = Dx[k]
        Ay_s = sp.csr_matrix(np.where(np.abs(Ay) > 1e-15 * max(1.0, np.abs(Ay).max()), Ay, 0))
        term = sp.kron(sp.kron(Ax, Ay_s, format="csr"), sp.csr_matrix(M), format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def assemble_hamiltonian(model: SymbolModel, grid: Grid, walls=None, nyquist=None) -> LatticeOperator:
    """Assemble the periodized lattice operator of a differential model.

    Parameters
    ----------
    model : SymbolModel
        Differential model; its wall must be periodic with period ``grid.Ly``
        (both the rising and the falling wall live on the torus).
    grid : Grid
    walls : WallProfile, optional
        Replaces the model's wall profile.
    nyquist : tuple of str, optional
        ``(x_rule, y_rule)``; defaults to :func:`default_nyquist`.
    """
    if walls is not None:
        model = model.with_wall(walls)
    period = getattr(model.wall, "period", None)
    if period is not None and period != grid.Ly:
        raise ValueError(f"wall period {period} must equal L_y = {grid.Ly}")
    nyq = tuple(nyquist) if nyquist is not None else default_nyquist(model)
    terms = model_terms(model, grid.Ny, grid.Ly, nyq[1])
    mat = _terms_to_sparse(terms, grid, nyq[0])
    mat = (0.5 * (mat + mat.getH())).tocsr()
    return LatticeOperator(mat, grid, model.n, model.name, terms, None, nyq, model.gap,
                           {"model": model.name, "params": dict(model.params),
                            "wall": model.wall.to_dict() if hasattr(model.wall, "to_dict") else None})


# ---------------------------------------------------------------------------
# filters

@dataclass(frozen=True)
class FilterSpec:
    """Transition widths and centre shifts of the P and Q switches.

    ``p_shift`` translates P along x (its transitions stay at 0 and L_x/2
    relative to the shift).
    """

    delta_x: float = 1.5
    delta_y: float = 1.5
    shift_x: float = 0.0
    shift_y: float = 0.0
    p_shift: float = 0.0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class DiagonalFilter:
    """Diagonal multiplication operator ``values[i_x, i_y]`` (identity on spinors).

    ``fx`` and ``fy`` hold the separable factors when ``values = fx (x) fy``.
    """

    values: np.ndarray
    fx: np.ndarray | None = None
    fy: np.ndarray | None = None

    def diagonal(self, n: int):
        return np.repeat(self.values.ravel(), n)

    @property
    def separable(self):
        return self.fx is not None and self.fy is not None


def switch_P(x, L, delta):
    """Switch equal to 1 on [delta, 3L/8] and 0 on [-3L/8, -delta], periodic."""
    if not 0 < delta < L / 4:
        raise ValueError("need 0 < delta < L/4")
    x = np.asarray(x, dtype=float)
    xx = np.mod(x + L / 4, L) - L / 4
    up = smoothstep((xx + delta) / (2 * delta))
    down = 1 - smoothstep((xx - 3 * L / 8) / (L / 4))
    return np.where(xx < L / 4, up, down)


def switch_Q(t, L, delta, shift=0.0):
    """Switch equal to 1 for |t - shift| <= L/4 and 0 beyond L/4 + delta (periodic)."""
    if not 0 < delta < L / 4:
        raise ValueError("need 0 < delta < L/4")
    tt = np.mod(np.asarray(t, dtype=float) - shift + L / 2, L) - L / 2
    return 1 - smoothstep((np.abs(tt) - L / 4) / delta)


def make_filter_P(grid: Grid, spec: FilterSpec = FilterSpec()) -> DiagonalFilter:
    """Filter P(x): the half-space switch."""
    px = switch_P(grid.x - spec.p_shift, grid.Lx, spec.delta_x)
    ones = np.ones(grid.Ny)
    return DiagonalFilter(np.outer(px, ones), px, ones)


def make_filter_Q(grid: Grid, spec: FilterSpec = FilterSpec()) -> DiagonalFilter:
    """Filter Q(x, y) = Q_X(x - shift_x) Q_Y(y - shift_y)."""
    qx = switch_Q(grid.x, grid.Lx, spec.delta_x, spec.shift_x)
    qy = switch_Q(grid.y, grid.Ly, spec.delta_y, spec.shift_y)
    return DiagonalFilter(np.outer(qx, qy), qx, qy)


def identity_filter(grid: Grid) -> DiagonalFilter:
    return DiagonalFilter(np.ones((grid.Nx, grid.Ny)), np.ones(grid.Nx), np.ones(grid.Ny))


# ---------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class LocalPotential:
    """Multiplication operator ``v(x, y) * direction``."""

    values: np.ndarray
    direction: np.ndarray
    y_only: bool = False

    def to_sparse(self):
        return sp.kron(sp.diags(self.values.ravel()), sp.csr_matrix(self.direction), format="csr")


def _check_direction(direction):
    d = np.asarray(direction, dtype=complex)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or np.max(np.abs(d - d.conj().T)) > 1e-14:
        raise ValueError("direction must be a Hermitian square matrix")
    return d


def bump_profile(x, y, r, a):
    """``r exp(-a^2/(a^2 - x^2 - y^2))`` inside the disc of radius a, else 0."""
    rho2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    inside = rho2 < a * a
    with np.errstate(divide="ignore", over="ignore"):
        v = r * np.exp(-a * a / np.where(inside, a * a - rho2, 1.0))
    return np.where(inside, v, 0.0)


def bump_perturbation(grid: Grid, r: float, a: float, center=(0.0, 0.0), direction=None,
                      filter_spec: FilterSpec | None = None) -> LocalPotential:
    """Compactly supported bump ``v(x, y) * direction``.

    When ``filter_spec`` is given the support disc is required to lie inside
    the support of Q, the square ``|x|, |y| <= L/4 + delta``.
    """
    d = _check_direction(np.eye(2) if direction is None else direction)
    X, Y = np.meshgrid(grid.x - center[0], grid.y - center[1], indexing="ij")
    if filter_spec is not None:
        qx = grid.Lx / 4 + filter_spec.delta_x - abs(center[0] - filter_spec.shift_x)
        qy = grid.Ly / 4 + filter_spec.delta_y - abs(center[1] - filter_spec.shift_y)
        if a > min(qx, qy) + 1e-12:
            raise ValueError("bump support leaves the support of Q")
    return LocalPotential(bump_profile(X, Y, r, a), d, False)


def gaussian_y_perturbation(grid: Grid, amplitude: float, sigma_width: float, direction) -> LocalPotential:
    """``amplitude * g_sigma(y) * direction`` with g the normal pdf, wrapped periodically."""
    d = _check_direction(direction)
    y = grid.y
    g = np.zeros_like(y)
    for m in range(-3, 4):
        g += np.exp(-((y + m * grid.Ly) ** 2) / (2 * sigma_width**2))
    g *= amplitude / (sigma_width * np.sqrt(2 * np.pi))
    return LocalPotential(np.outer(np.ones(grid.Nx), g), d, True)


# ---------------------------------------------------------------------------
# binary export
#
# Layout (little endian):
#   8 bytes  magic b"EDGEOP01"
#   uint64   rows, uint64 cols
#   uint32   Nx, Ny, n, reserved(0)
#   float64  Lx, Ly
#   payload  rows*cols pairs of float32 (re, im), row-major

_MAGIC = b"EDGEOP01"
_HEADER = struct.Struct("<8sQQIIIIdd")


def write_operator(path, op: LatticeOperator):
    """Write an operator in the binary export format (complex64 payload)."""
    A = op.toarray().astype(np.complex64)
    g = op.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, A.shape[0], A.shape[1], g.Nx, g.Ny, op.n, 0, g.Lx, g.Ly))
        fh.write(np.ascontiguousarray(A).astype("<c8").tobytes())


def read_operator(path):
    """Read a binary export; returns ``(matrix, grid, n)``."""
    with open(path, "rb") as fh:
        magic, rows, cols, Nx, Ny, n, _, Lx, Ly = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError("not an operator export")
        data = np.frombuffer(fh.read(), dtype="<c8")
    if data.size != rows * cols:
        raise ValueError("truncated payload")
    return data.reshape(rows, cols), Grid(Nx, Ny, Lx, Ly), n
