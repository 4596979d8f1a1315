"""Symbol-level interface invariants.

For a traceless 2x2 symbol ``sigma = f . (s1, s2, s3)`` the conductivity is
``-sum_j sgn det M_j`` over the zeros of ``f(y, xi, zeta)``, with
``M^{mn} = d_m f_n`` in the variable order ``(y, xi, zeta)``. The same
integer is the degree of the Gauss map on an enclosing sphere and the
bulk-difference resolvent integral ``(i / 8 pi^2) (I_+ - I_-)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import root

from .models import PAULI, SymbolModel, WallProfile

__all__ = ["VectorField3", "ZeroPoint", "QuadratureSpec", "field_from_model", "identity_field",
           "find_symbol_zeros", "default_search_box", "degree_signed_det", "degree_gauss_map",
           "winding_integral_3x3", "bulk_difference_fh", "pauli_vector", "FHResult"]

TWO_BY_TWO = ("dirac2x2", "pwave", "dwave")


# ---------------------------------------------------------------------------
# vector fields

@dataclass
class VectorField3:
    """Smooth map ``(y, xi, zeta) -> R^3``.

    ``evaluator(y, xi, zeta)`` returns an array of shape ``(3, ...)``.
    ``analytic_jacobian(y, xi, zeta)`` returns ``(..., 3, 3)`` with entry
    ``[m, n] = d_m f_n``.
    """

    evaluator: Callable
    analytic_jacobian: Callable | None = None
    name: str = ""

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return np.asarray(self.evaluator(p[0], p[1], p[2]), dtype=float)

    def jacobian(self, p, h=1e-6):
        """``M^{mn} = d_m f_n`` at ``p`` (last axis of ``p`` holds the variables)."""
        p = np.asarray(p, dtype=float)
        if self.analytic_jacobian is not None:
            return np.asarray(self.analytic_jacobian(p[0], p[1], p[2]), dtype=float)
        M = np.zeros(p.shape[1:] + (3, 3))
        for m in range(3):
            e = np.zeros(3)
            e[m] = h
            e = e.reshape((3,) + (1,) * (p.ndim - 1))
            M[..., m, :] = np.moveaxis((self(p + e) - self(p - e)) / (2 * h), 0, -1)
        return M


@dataclass
class ZeroPoint:
    """Regular zero of a vector field with its Jacobian and orientation sign."""

    location: tuple
    jacobian: np.ndarray
    sign: int

    def to_dict(self):
        return {"location": [float(v) for v in self.location], "sign": int(self.sign),
                "det": float(np.linalg.det(self.jacobian))}


def identity_field() -> VectorField3:
    """``f(y, xi, zeta) = (y, xi, zeta)``."""
    ev = lambda y, x, z: np.stack(np.broadcast_arrays(y, x, z))
    jac = lambda y, x, z: np.broadcast_to(np.eye(3), np.shape(np.asarray(y) + x + z) + (3, 3))
    return VectorField3(ev, jac, "identity")


def pauli_vector(model: SymbolModel, w, xi, zeta):
    """Pauli coefficients ``(f1, f2, f3)`` and their momentum derivatives.

    Returns ``f, df_dxi, df_dzeta``, each of shape ``(3, ...)``, for the
    symbol with the wall value replaced by ``w``.
    """
    if model.name not in TWO_BY_TWO:
        raise ValueError(f"{model.name} is not a 2x2 model")
    w, xi, zeta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (w, xi, zeta)))
    one, zero = np.ones_like(xi), np.zeros_like(xi)
    if model.name == "dirac2x2":
        return (np.stack([xi, zeta, w]), np.stack([one, zero, zero]), np.stack([zero, one, zero]))
    p = model.params
    m, mu, c0 = p["mass"], p["mu_chem"], p["c0"]
    kin = (xi**2 + zeta**2) / (2 * m) - mu
    if model.name == "pwave":
        return (np.stack([kin, w * zeta, c0 * xi]),
                np.stack([xi / m, zero, c0 * one]),
                np.stack([zeta / m, w, zero]))
    return (np.stack([kin, c0 * (zeta**2 - xi**2), w * xi * zeta]),
            np.stack([xi / m, -2 * c0 * xi, w * zeta]),
            np.stack([zeta / m, 2 * c0 * zeta, w * xi]))


def field_from_model(model: SymbolModel) -> VectorField3:
    """Pauli vector field of a traceless 2x2 model with analytic Jacobian."""
    if model.name not in TWO_BY_TWO:
        raise ValueError("signed-determinant degree needs a 2x2 model")
    wall = model.wall
    if getattr(wall, "is_exact_sign", False):
        raise ValueError("exact sign walls are not differentiable")

    def ev(y, xi, zeta):
        return pauli_vector(model, wall.value(y), xi, zeta)[0]

    def jac(y, xi, zeta):
        w = wall.value(y)
        dw = wall.derivative(y)
        # the wall enters linearly: f(w) = f(0) + w * g
        f0 = pauli_vector(model, 0.0, xi, zeta)[0]
        f1 = pauli_vector(model, 1.0, xi, zeta)[0]
        _, dx, dz = pauli_vector(model, w, xi, zeta)
        dy = (f1 - f0) * np.asarray(dw)
        return np.stack([np.moveaxis(dy, 0, -1), np.moveaxis(dx, 0, -1), np.moveaxis(dz, 0, -1)], axis=-2)

    return VectorField3(ev, jac, model.name)


# ---------------------------------------------------------------------------
# zeros

def _corner_range(F):
    # min and max over the 8 corners of each cell, per component
    ends = (slice(0, -1), slice(1, None))
    C = np.stack([F[:, a, b, c] for a in ends for b in ends for c in ends])
    return C.min(axis=0), C.max(axis=0)


def find_symbol_zeros(field: VectorField3, search_box, seed_density: int = 17, tol: float = 1e-10,
                      dedup: float = 1e-6, det_floor: float = 1e-8):
    """All zeros of ``field`` inside ``search_box``.

    Parameters
    ----------
    field : VectorField3
    search_box : sequence of three (lo, hi) pairs
        Ranges of ``y``, ``xi`` and ``zeta``.
    seed_density : int
        Grid points per axis used to detect sign-change cells.

    Returns
    -------
    list of ZeroPoint
        Sorted lexicographically by location.

    Raises
    ------
    RuntimeError
        If a sign-change cell produces no converged zero nearby.
    ValueError
        If a zero is singular (``|det M| < det_floor``).
    """
    axes = [np.linspace(lo, hi, seed_density) for lo, hi in search_box]
    Y, X, Z = np.meshgrid(*axes, indexing="ij")
    F = field(np.stack([Y, X, Z]))
    lo, hi = _corner_range(F)
    cand = np.argwhere(np.all((lo <= 0) & (hi >= 0), axis=0))
    steps = np.array([a[1] - a[0] for a in axes])
    box_lo = np.array([b[0] for b in search_box]) - steps
    box_hi = np.array([b[1] for b in search_box]) + steps
    found = []

    def fun(p):
        return field(p)

    def jac(p):
        return field.jacobian(p).T

    for idx in cand:
        seed = np.array([axes[d][idx[d]] for d in range(3)]) + 0.5 * steps
        sol = root(fun, seed, jac=jac, method="hybr", options={"xtol": 1e-14})
        p = sol.x
        for _ in range(8):
            r = fun(p)
            if np.linalg.norm(r) <= tol:
                break
            try:
                p = p - np.linalg.solve(jac(p), r)
            except np.linalg.LinAlgError:
                break
        ok = np.linalg.norm(fun(p)) <= tol and np.all(p >= box_lo) and np.all(p <= box_hi)
        if ok and not any(np.linalg.norm(p - q) < dedup for q in found):
            found.append(p)
    found.sort(key=lambda q: tuple(np.round(q, 9)))
    zeros = []
    for p in found:
        M = field.jacobian(p)
        d = np.linalg.det(M)
        if abs(d) < det_floor:
            raise ValueError(f"singular zero at {tuple(p)} (det M = {d:.3e})")
        zeros.append(ZeroPoint(tuple(float(v) for v in p), M, int(np.sign(d))))
    # every sign-change cell must contain or touch a zero
    for idx in cand:
        corner = np.array([axes[d][idx[d]] for d in range(3)])
        if not any(np.all((q >= corner - steps) & (q <= corner + 2 * steps)) for q in found):
            if _cell_has_zero(field, corner, steps):
                raise RuntimeError(f"Newton failed from sign-change cell at {tuple(corner)}")
    return zeros


def _cell_has_zero(field, corner, steps, n=5):
    # finer corner test: a true zero keeps producing all-three sign changes
    axes = [np.linspace(corner[d], corner[d] + steps[d], n) for d in range(3)]
    Y, X, Z = np.meshgrid(*axes, indexing="ij")
    lo, hi = _corner_range(field(np.stack([Y, X, Z])))
    return bool(np.any(np.all((lo <= 0) & (hi >= 0), axis=0)))


def default_search_box(model: SymbolModel, x0: float = 0.0):
    """Box of half-size ``2 max(p_F, wall half-width)`` centred at ``(x0, 0, 0)``."""
    p = model.params
    pf = math.sqrt(2 * p["mass"] * p["mu_chem"]) if model.name in ("pwave", "dwave") else 1.0
    wall = model.wall
    extent = getattr(wall, "wall_width_delta", 1.0)
    if isinstance(wall, WallProfile) and wall.kind != "smoothstep":
        extent = 3.0 / max(wall.s, 1e-12) * (wall.wall_width_delta if wall.kind == "tanh_sine" else 1.0)
    R = 2 * max(pf, extent)
    return ((x0 - R, x0 + R), (-R, R), (-R, R))


def degree_signed_det(model: SymbolModel, x0: float = 0.0, search_box=None, seed_density: int = 17,
                      return_zeros: bool = False):
    """Signed-determinant formula ``2 pi sigma_I = -sum_j sgn det M_j``.

    Parameters
    ----------
    model : SymbolModel
        Traceless 2x2 model on the line (single wall).
    x0 : float
        Wall centre in ``y``; the default search box is centred there.
    search_box : optional
        Overrides :func:`default_search_box`.
    return_zeros : bool
        Also return the list of :class:`ZeroPoint`.
    """
    fld = field_from_model(model)
    box = default_search_box(model, x0) if search_box is None else search_box
    zeros = find_symbol_zeros(fld, box, seed_density)
    val = -int(sum(z.sign for z in zeros))
    return (val, zeros) if return_zeros else val


# ---------------------------------------------------------------------------
# sphere quadrature

def _sphere_nodes(radius, order, center=(0.0, 0.0, 0.0)):
    # Gauss-Legendre in u = cos(theta), trapezoid in phi; y is the polar axis
    u, wu = np.polynomial.legendre.leggauss(order)
    nphi = 2 * order
    phi = 2 * np.pi * np.arange(nphi) / nphi
    U, PH = np.meshgrid(u, phi, indexing="ij")
    s = np.sqrt(1 - U**2)
    nu = np.stack([U, s * np.cos(PH), s * np.sin(PH)])
    pts = np.asarray(center, dtype=float).reshape(3, 1, 1) + radius * nu
    w = np.outer(wu, np.full(nphi, 2 * np.pi / nphi))
    return pts, nu, w


def _adjugate(M):
    # adj(M) = det(M) M^{-1}, computed from cofactors (valid for singular M)
    C = np.empty_like(M)
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            sub = M[..., r, :][..., :, c]
            C[..., i, j] = (-1) ** (i + j) * (sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0])
    return np.swapaxes(C, -1, -2)


def degree_gauss_map(field: VectorField3, radius: float = 3.0, quad_order: int = 128,
                     center=(0.0, 0.0, 0.0), tol: float = 1e-3, check: bool = True) -> float:
    """Degree of ``f / |f|`` on the sphere of given radius.

    Evaluates ``(1/4 pi) int f . (adj(M) nu) |f|^{-3} dA``, which is the
    surface Jacobian of the normalized field, with Gauss-Legendre nodes in
    ``cos(theta)`` and the trapezoid rule in longitude. With the convention
    ``M[m, n] = d_m f_n``, ``adj(M)`` maps ``t1 x t2`` to ``df t1 x df t2``.

    Raises
    ------
    ValueError
        If ``check`` and the result is farther than ``tol`` from an integer.
    """
    pts, nu, w = _sphere_nodes(radius, quad_order, center)
    f = field(pts)
    M = field.jacobian(pts)
    an = np.einsum("...ij,j...->i...", _adjugate(M), nu)
    nf = np.sqrt(np.sum(f * f, axis=0))
    if nf.min() < 1e-12:
        raise ValueError("field vanishes on the quadrature sphere")
    integrand = np.sum(f * an, axis=0) / nf**3 * radius**2
    val = float(np.sum(integrand * w) / (4 * np.pi))
    if check and abs(val - round(val)) > tol:
        raise ValueError(f"Gauss-map degree {val:.6f} is not an integer within {tol}")
    return val


def winding_integral_3x3(f_profile, radius: float = 5.0, quad_order: int = 256,
                         center=(0.0, 0.0, 0.0)) -> float:
    """Eigenprojector winding of the 3x3 equatorial symbol ``(xi, zeta, -f) . Gamma``.

    Integrates ``(1/2 pi) int w . nu dS`` with
    ``w = (f, f' xi, f' zeta) / kappa^3`` and ``kappa^2 = f^2 + xi^2 + zeta^2``.
    This field is divergence free away from ``kappa = 0``, so the value does
    not depend on the radius. The Gauss-Legendre nodes never touch the
    poles, so the set ``xi = zeta = 0`` needs no special treatment.

    Parameters
    ----------
    f_profile : WallProfile or LinearProfile
        Any object with ``value`` and ``derivative`` methods.
    """
    pts, nu, w = _sphere_nodes(radius, quad_order, center)
    y, xi, ze = pts
    f = np.asarray(f_profile.value(y), dtype=float)
    fp = np.asarray(f_profile.derivative(y), dtype=float)
    k2 = f * f + xi * xi + ze * ze
    if k2.min() < 1e-24:
        raise ValueError("kappa vanishes on the quadrature sphere")
    flux = (f * nu[0] + fp * xi * nu[1] + fp * ze * nu[2]) / k2**1.5 * radius**2
    return float(np.sum(flux * w) / (2 * np.pi))


# ---------------------------------------------------------------------------
# bulk-difference resolvent integral

@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature for ``int dw dxi dzeta`` over R^3.

    ``omega_scale`` and ``k_scale`` are the scales of the maps
    ``w = Omega t / (1 - t^2)`` (t in (-1, 1)) and ``k = K s / (1 - s)``
    (s in (0, 1)) used with Gauss-Legendre nodes; the angle uses the
    trapezoid rule. Panel counts double until two successive values differ
    by less than ``tol / 2``.

    ``alpha`` is the real part of ``z = alpha + i w``; ``None`` uses the gap
    midpoint.
    """

    omega_scale: float = 1.0
    k_scale: float = 1.0
    n_omega: int = 32
    n_k: int = 32
    n_theta: int = 16
    tol: float = 1e-3
    max_doublings: int = 4
    alpha: float | None = None

    def __post_init__(self):
        if not (self.omega_scale > 0 and self.k_scale > 0):
            raise ValueError("scales must be positive")
        if any(n % 2 for n in (self.n_omega, self.n_k, self.n_theta)):
            raise ValueError("panel counts must be even")


@dataclass
class FHResult:
    """Value of ``(i / 8 pi^2)(I_+ - I_-)`` with convergence history."""

    value: float
    imaginary: float
    error_estimate: float
    history: list = field(default_factory=list)
    converged: bool = True


def _resolvent_integrand(model, w, alpha, omega, k, theta):
    # tr(G A G B G - G B G A G), G = (z - sigma)^{-1}, z = alpha + i omega
    xi = k[:, None] * np.cos(theta)[None, :]
    ze = k[:, None] * np.sin(theta)[None, :]
    f, fx, fz = pauli_vector(model, w, xi, ze)
    sig = np.einsum("i...,ijk->...jk", f, np.stack(PAULI[1:]))
    A = np.einsum("i...,ijk->...jk", fx, np.stack(PAULI[1:]))
    B = np.einsum("i...,ijk->...jk", fz, np.stack(PAULI[1:]))
    d2 = np.sum(f * f, axis=0)
    out = np.empty((omega.size,) + xi.shape, dtype=complex)
    for i, om in enumerate(omega):
        z = alpha + 1j * om
        G = (z * np.eye(2) + sig) / (z * z - d2)[..., None, None]
        GA, GB = G @ A, G @ B
        out[i] = np.trace(GA @ GB @ G - GB @ GA @ G, axis1=-2, axis2=-1)
    return out


def _fh_once(model, alpha, qs, n_omega, n_k, n_theta):
    t, wt = np.polynomial.legendre.leggauss(n_omega)
    omega = qs.omega_scale * t / (1 - t * t)
    w_om = wt * qs.omega_scale * (1 + t * t) / (1 - t * t) ** 2
    s, ws = np.polynomial.legendre.leggauss(n_k)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws
    k = qs.k_scale * s / (1 - s)
    w_k = ws * qs.k_scale / (1 - s) ** 2 * k
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    w_th = 2 * np.pi / n_theta
    diff = (_resolvent_integrand(model, model.wall.plateau_plus, alpha, omega, k, theta)
            - _resolvent_integrand(model, model.wall.plateau_minus, alpha, omega, k, theta))
    total = np.einsum("i,j,ijk->", w_om, w_k, diff) * w_th
    return 1j / (8 * np.pi**2) * total


def bulk_difference_fh(model: SymbolModel, alpha: float | None = None, spec: QuadratureSpec | None = None,
                       full: bool = False):
    """Bulk-difference formula ``2 pi sigma_I = (i / 8 pi^2)(I_+ - I_-)``.

    ``I_pm = int tr [G d_xi G^{-1}, G d_zeta G^{-1}] G dw dxi dzeta`` with
    ``G = (z - sigma_pm)^{-1}`` and ``z = alpha + i w``. The two bulk
    integrands are subtracted pointwise before integration.

    Parameters
    ----------
    model : SymbolModel
        ``dirac2x2`` or ``pwave``; only its plateau values enter. The d-wave
        wall multiplies a principal-order term and is rejected.
    alpha : float, optional
        Fiducial energy inside the gap (default: gap midpoint).
    spec : QuadratureSpec, optional
    full : bool
        Return an :class:`FHResult` instead of the real value.

    Raises
    ------
    RuntimeError
        If the nested doubling does not reach ``spec.tol``.
    """
    if model.name not in TWO_BY_TWO:
        raise ValueError("bulk-difference integral is implemented for 2x2 models")
    if model.name == "dwave":
        # the wall multiplies a principal (second order) term, so the lateral
        # boundary terms do not decay and the bulk difference is not integral
        raise ValueError("dwave: the wall enters the principal symbol; use degree_signed_det")
    qs = spec or default_quadrature(model)
    if alpha is None:
        alpha = qs.alpha if qs.alpha is not None else model.gap_center
    lo, hi = model.gap
    if not lo < alpha < hi:
        raise ValueError(f"alpha = {alpha} is not inside the gap {model.gap}")
    n = (qs.n_omega, qs.n_k, qs.n_theta)
    prev = _fh_once(model, alpha, qs, *n)
    hist = [(n, prev.real, prev.imag)]
    err = math.inf
    for _ in range(qs.max_doublings):
        n = tuple(2 * v for v in n)
        cur = _fh_once(model, alpha, qs, *n)
        hist.append((n, cur.real, cur.imag))
        err = abs(cur - prev)
        prev = cur
        if err < qs.tol / 2:
            break
    res = FHResult(float(prev.real), float(prev.imag), float(err), hist, err < qs.tol / 2)
    if not res.converged:
        raise RuntimeError(f"bulk-difference quadrature not converged: last change {err:.2e}; "
                           f"increase panel counts or adjust scales (omega_scale={qs.omega_scale}, "
                           f"k_scale={qs.k_scale})")
    return res if full else res.value


def default_quadrature(model: SymbolModel, tol: float = 1e-3) -> QuadratureSpec:
    """Map scales from the model's energy and momentum scales."""
    if model.name == "dirac2x2":
        return QuadratureSpec(1.0, 1.0, tol=tol)
    p = model.params
    pf = math.sqrt(2 * p["mass"] * p["mu_chem"])
    return QuadratureSpec(max(p["mu_chem"], 1.0), pf, tol=tol)
