"""Continuum symbols of the interface models and their domain-wall profiles.

The catalog holds four Hermitian symbols sigma(y, xi, zeta):

* ``dirac2x2``          xi s1 + zeta s2 + m(y) s3
* ``pwave``             ((xi^2+zeta^2)/2m - mu) s1 + c(y) zeta s2 + c0 xi s3
* ``dwave``             ((xi^2+zeta^2)/2m - mu) s1 + c0 (zeta^2-xi^2) s2 + c(y) xi zeta s3
* ``shallow_water3x3``  (xi, zeta, -f(y)) . (g1, g4, g7), optionally regularized

Every model carries one wall profile (m, c or f) which interpolates between
two bulk plateau values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np
from scipy.optimize import brentq, minimize

__all__ = [
    "PAULI", "GELL_MANN", "WallProfile", "LinearProfile", "SymbolModel",
    "smoothstep", "smoothstep_derivative", "make_model", "dirac2x2", "pwave",
    "dwave", "shallow_water3x3", "eval_symbol", "symbol_at_wall_value",
    "pauli_decompose", "bulk_gap_check", "anticommutation_check",
    "model_from_config", "model_to_config", "GapViolation",
]

MODEL_NAMES = ("dirac2x2", "pwave", "dwave", "shallow_water3x3")

s0 = np.eye(2, dtype=complex)
s1 = np.array([[0, 1], [1, 0]], dtype=complex)
s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
s3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (s0, s1, s2, s3)


def _unit(i, j, n=3):
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


# standard Gell-Mann matrices used by the equatorial model
GELL_MANN = {
    1: _unit(0, 1) + _unit(1, 0),
    4: _unit(0, 2) + _unit(2, 0),
    7: -1j * _unit(1, 2) + 1j * _unit(2, 1),
}


class GapViolation(ValueError):
    """Raised when a bulk symbol has spectrum inside the declared gap."""

    def __init__(self, msg, where=None, value=None):
        super().__init__(msg)
        self.where = where
        self.value = value


# ---------------------------------------------------------------------------
# wall profiles

def smoothstep(t):
    """C-infinity switch rising from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smoothstep_derivative(t):
    """Derivative of :func:`smoothstep`."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tt = np.where(inside, t, 0.5)
    s = smoothstep(tt)
    d = s * (1.0 - s) * (1.0 / tt**2 + 1.0 / (1.0 - tt) ** 2)
    return np.where(inside, d, 0.0)


WALL_KINDS = ("tanh_sine", "smoothstep", "sign_like")
PLATEAU_TOL = 1e-6


@dataclass(frozen=True)
class WallProfile:
    """Smooth domain wall between two plateau values.

    Parameters
    ----------
    kind : {'smoothstep', 'tanh_sine', 'sign_like'}
        Shape of the connector. ``smoothstep`` has exact plateaus outside
        ``|y| < wall_width_delta``; ``tanh_sine`` is analytic with plateaus
        exact up to ``1e-6`` when ``steepness`` is chosen automatically;
        ``sign_like`` is ``tanh(beta y)`` with a large ``beta`` and becomes the
        exact sign function when ``steepness`` is infinite.
    plateau_minus, plateau_plus : float
        Values for ``y < 0`` and ``y > 0`` (near the wall at ``y = 0``).
    steepness : float or None
        ``s`` for ``tanh_sine``, ``beta`` for ``sign_like``. ``None`` picks a
        default (plateau rule for ``tanh_sine``, ``10`` for ``sign_like``).
    period : float
        ``0`` for a single wall on the line, otherwise the profile is periodic
        with a rising wall at ``0`` and a falling wall at ``period/2``.
    wall_width_delta : float
        Half-width of each transition.
    """

    kind: str = "smoothstep"
    plateau_minus: float = -1.0
    plateau_plus: float = 1.0
    steepness: float | None = None
    period: float = 0.0
    wall_width_delta: float = 2.0

    def __post_init__(self):
        if self.kind not in WALL_KINDS:
            raise ValueError(f"unknown wall kind {self.kind!r}")
        if self.period < 0 or self.wall_width_delta <= 0:
            raise ValueError("period must be >= 0 and wall_width_delta > 0")
        if self.period > 0 and self.wall_width_delta >= self.period / 4:
            raise ValueError("wall_width_delta must be below period/4")

    # -- helpers --
    @property
    def mid(self):
        return 0.5 * (self.plateau_plus + self.plateau_minus)

    @property
    def half(self):
        return 0.5 * (self.plateau_plus - self.plateau_minus)

    @property
    def s(self) -> float:
        """Effective steepness parameter."""
        if self.steepness is not None:
            return float(self.steepness)
        if self.kind == "sign_like":
            return 10.0
        if self.kind == "tanh_sine":
            return _auto_tanh_steepness(self.period, self.wall_width_delta)
        return 1.0

    @property
    def is_exact_sign(self) -> bool:
        return self.kind == "sign_like" and math.isinf(self.s)

    def flipped(self) -> "WallProfile":
        """Same profile with the plateau values swapped."""
        return replace(self, plateau_minus=self.plateau_plus, plateau_plus=self.plateau_minus)

    def _unit_and_slope(self, y):
        # normalized profile u in [-1, 1] and du/dy
        y = np.asarray(y, dtype=float)
        d, P = self.wall_width_delta, self.period
        if self.kind == "smoothstep":
            if P == 0:
                t = (y + d) / (2 * d)
                return 2 * smoothstep(t) - 1, smoothstep_derivative(t) / d
            yy = np.mod(y + P / 4, P) - P / 4  # in [-P/4, 3P/4)
            rising = yy < P / 4
            t_up = (yy + d) / (2 * d)
            t_dn = (yy - P / 2 + d) / (2 * d)
            u = np.where(rising, 2 * smoothstep(t_up) - 1, 1 - 2 * smoothstep(t_dn))
            du = np.where(rising, smoothstep_derivative(t_up), -smoothstep_derivative(t_dn)) / d
            return u, du
        s = self.s
        if self.is_exact_sign:
            arg = y if P == 0 else np.sin(2 * np.pi * y / P)
            return np.sign(arg), np.zeros_like(y)
        if self.kind == "tanh_sine":
            if P == 0:
                z = s * y / d
                return np.tanh(z), (s / d) / np.cosh(z) ** 2
            z = s * np.sin(2 * np.pi * y / P)
            dz = s * (2 * np.pi / P) * np.cos(2 * np.pi * y / P)
            return np.tanh(z) / np.tanh(s), dz / np.cosh(z) ** 2 / np.tanh(s)
        # sign_like: tanh(beta y) near each wall
        if P == 0:
            z = s * y
            return np.tanh(z), s / np.cosh(z) ** 2
        z = s * P / (2 * np.pi) * np.sin(2 * np.pi * y / P)
        dz = s * np.cos(2 * np.pi * y / P)
        return np.tanh(z), dz / np.cosh(z) ** 2

    def value(self, y):
        """Profile value at ``y`` (scalar or array)."""
        u, _ = self._unit_and_slope(y)
        out = self.mid + self.half * u
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, y):
        """First derivative of the profile."""
        _, du = self._unit_and_slope(y)
        out = self.half * du
        return float(out) if np.ndim(out) == 0 else out

    def zeros(self):
        """Locations in one period (or on the line) where the profile vanishes.

        Only meaningful when the plateaus have opposite signs.
        """
        if self.plateau_minus * self.plateau_plus >= 0:
            return []
        lo, hi = -self.wall_width_delta, self.wall_width_delta
        if self.kind != "smoothstep":
            lo, hi = -self.period / 4 if self.period else -50.0, self.period / 4 if self.period else 50.0
            if self.is_exact_sign:
                return [0.0]
        y0 = brentq(lambda t: self.value(t), lo, hi, xtol=1e-15)
        if self.period:
            return [y0, self.period / 2 - y0]
        return [y0]

    def to_dict(self):
        return {
            "kind": self.kind, "plateau_minus": self.plateau_minus,
            "plateau_plus": self.plateau_plus,
            "steepness": None if self.steepness is None else float(self.steepness),
            "period": self.period, "wall_width_delta": self.wall_width_delta,
        }


def _auto_tanh_steepness(period, delta):
    # smallest s with plateau defect <= PLATEAU_TOL at |y| = delta
    if period == 0:
        return float(np.arctanh(1 - PLATEAU_TOL)) + 1e-9
    x = np.sin(2 * np.pi * delta / period)
    g = lambda s: 1 - np.tanh(s * x) / np.tanh(s) - PLATEAU_TOL
    return float(brentq(g, 1e-3, 1e4, xtol=1e-12)) * (1 + 1e-9)


@dataclass(frozen=True)
class LinearProfile:
    """Linear profile ``slope * y`` (no plateaus); used for symbol-level checks."""

    slope: float = 1.0

    def value(self, y):
        return self.slope * np.asarray(y, dtype=float) if np.ndim(y) else self.slope * float(y)

    def derivative(self, y):
        return self.slope * np.ones_like(np.asarray(y, dtype=float)) if np.ndim(y) else float(self.slope)

    @property
    def plateau_minus(self):
        return -math.inf * np.sign(self.slope)

    @property
    def plateau_plus(self):
        return math.inf * np.sign(self.slope)

    def flipped(self):
        return LinearProfile(-self.slope)


# ---------------------------------------------------------------------------
# symbols

_DEFAULT_PARAMS = {
    "dirac2x2": {},
    "pwave": {"mass": 1.0, "mu_chem": 1.0, "c0": 1.0},
    "dwave": {"mass": 1.0, "mu_chem": 1.0, "c0": 1.0},
    "shallow_water3x3": {"mu_reg": 0.0},
}


@dataclass(frozen=True)
class SymbolModel:
    """A catalog Hamiltonian symbol with its wall profile.

    ``gap`` is the declared spectral gap ``(E1, E2)`` of both bulk symbols.
    """

    name: str
    params: Mapping[str, float]
    wall: Any
    gap: tuple
    n: int = 2
    order_m: int = 1

    @property
    def gap_half_width(self):
        return 0.5 * (self.gap[1] - self.gap[0])

    @property
    def gap_center(self):
        return 0.5 * (self.gap[1] + self.gap[0])

    @property
    def is_differential(self):
        return not (self.name == "shallow_water3x3" and self.params.get("mu_reg", 0.0) != 0.0)

    def with_wall(self, wall) -> "SymbolModel":
        return make_model(self.name, dict(self.params), wall)

    def flipped(self) -> "SymbolModel":
        """Model with the wall orientation reversed."""
        return self.with_wall(self.wall.flipped())

    def leading_coefficients(self):
        """``(M_0, M_m)``: matrices multiplying ``D_y^m`` and ``D_x^m``."""
        if self.name == "dirac2x2":
            return s2.copy(), s1.copy()
        if self.name in ("pwave", "dwave"):
            M = s1 / (2 * self.params["mass"])
            return M.copy(), M.copy()
        return GELL_MANN[4].copy(), GELL_MANN[1].copy()


def _check_params(name, params):
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    p = dict(_DEFAULT_PARAMS[name])
    unknown = set(params) - set(p)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    p.update({k: float(v) for k, v in params.items()})
    if name in ("pwave", "dwave") and (p["mass"] <= 0 or p["mu_chem"] <= 0 or p["c0"] <= 0):
        raise ValueError("mass, mu_chem and c0 must be positive")
    return p


def _declared_gap(name, p, wall):
    lo, hi = wall.plateau_minus, wall.plateau_plus
    if name == "dirac2x2":
        g = min(abs(lo), abs(hi))
        return (-g, g)
    if name == "shallow_water3x3":
        top = min(abs(lo), abs(hi))
        mu = p["mu_reg"]
        bottom = max(0.0, mu)
        return (bottom, top)
    # superconductors: numerical minimum of the bulk band over momenta
    g = min(_bulk_min_abs(name, p, w) for w in (lo, hi))
    return (-g, g)


def make_model(name: str, params: Mapping[str, float] | None = None, wall=None) -> SymbolModel:
    """Build a catalog model.

    Parameters
    ----------
    name : str
        One of ``dirac2x2``, ``pwave``, ``dwave``, ``shallow_water3x3``.
    params : dict, optional
        ``mass``, ``mu_chem``, ``c0`` for the superconductors; ``mu_reg`` for
        the 3x3 model. Missing entries take the unit defaults.
    wall : WallProfile, optional
        Profile of m(y), c(y) or f(y). Defaults to a rising smoothstep wall on
        the line.
    """
    p = _check_params(name, dict(params or {}))
    if wall is None:
        wall = WallProfile()
    n = 3 if name == "shallow_water3x3" else 2
    order = 2 if name in ("pwave", "dwave") else 1
    return SymbolModel(name, p, wall, _declared_gap(name, p, wall), n, order)


def dirac2x2(wall=None) -> SymbolModel:
    return make_model("dirac2x2", {}, wall)


def pwave(wall=None, mass=1.0, mu_chem=1.0, c0=1.0) -> SymbolModel:
    return make_model("pwave", {"mass": mass, "mu_chem": mu_chem, "c0": c0}, wall)


def dwave(wall=None, mass=1.0, mu_chem=1.0, c0=1.0) -> SymbolModel:
    return make_model("dwave", {"mass": mass, "mu_chem": mu_chem, "c0": c0}, wall)


def shallow_water3x3(wall=None, mu_reg=0.0) -> SymbolModel:
    return make_model("shallow_water3x3", {"mu_reg": mu_reg}, wall)


def _stack(*coeffs_and_mats):
    out = 0
    for c, M in coeffs_and_mats:
        out = out + np.asarray(c)[..., None, None] * M
    return out


def symbol_at_wall_value(model: SymbolModel, w, xi, zeta):
    """Symbol with the wall profile replaced by the value ``w``.

    Broadcasts over array inputs and returns shape ``(..., n, n)``.
    """
    w, xi, zeta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (w, xi, zeta)))
    p = model.params
    if model.name == "dirac2x2":
        return _stack((xi, s1), (zeta, s2), (w, s3))
    if model.name == "pwave":
        kin = (xi**2 + zeta**2) / (2 * p["mass"]) - p["mu_chem"]
        return _stack((kin, s1), (w * zeta, s2), (p["c0"] * xi, s3))
    if model.name == "dwave":
        kin = (xi**2 + zeta**2) / (2 * p["mass"]) - p["mu_chem"]
        return _stack((kin, s1), (p["c0"] * (zeta**2 - xi**2), s2), (w * xi * zeta, s3))
    # shallow water: (xi, zeta, -f) . (g1, g4, g7)
    sig = _stack((xi, GELL_MANN[1]), (zeta, GELL_MANN[4]), (-w, GELL_MANN[7]))
    mu = p.get("mu_reg", 0.0)
    if mu != 0.0:
        kappa2 = w**2 + xi**2 + zeta**2
        psi = np.stack([1j * w, zeta + 0j, -xi + 0j], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            proj = psi[..., :, None] * psi[..., None, :].conj() / np.where(kappa2 > 0, kappa2, 1.0)[..., None, None]
        lam0 = mu * kappa2 / np.sqrt(1 + kappa2)
        sig = sig + np.where(kappa2 > 0, lam0, 0.0)[..., None, None] * proj
    return sig


def eval_symbol(model: SymbolModel, y, xi, zeta):
    """Evaluate the Hermitian symbol sigma(y, xi, zeta).

    Scalars give an ``n x n`` matrix; arrays broadcast to ``(..., n, n)``.
    """
    for a in (y, xi, zeta):
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite symbol argument")
    return symbol_at_wall_value(model, model.wall.value(y), xi, zeta)


def bulk_symbol(model: SymbolModel, side: int, xi, zeta):
    """Bulk limit sigma_+ (side=+1) or sigma_- (side=-1)."""
    w = model.wall.plateau_plus if side > 0 else model.wall.plateau_minus
    return symbol_at_wall_value(model, w, xi, zeta)


def pauli_decompose(h, tol=1e-12):
    """Coefficients ``(f0, f1, f2, f3)`` with ``h = f0 I + f . sigma``.

    Raises ``ValueError`` for non-Hermitian input.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-2:] != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - np.swapaxes(h, -1, -2).conj())) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    f0 = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
    f3 = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
    f1 = 0.5 * (h[..., 0, 1] + h[..., 1, 0]).real
    f2 = 0.5 * (h[..., 1, 0] - h[..., 0, 1]).imag
    if np.ndim(f0) == 0:
        return float(f0), float(f1), float(f2), float(f3)
    return f0, f1, f2, f3


# ---------------------------------------------------------------------------
# structural checks

def _bulk_min_abs(name, p, w, extent=None, npts=241):
    m = SymbolModel(name, p, WallProfile(), (0, 0), 2, 2)
    if extent is None:
        extent = 3.0 * math.sqrt(2 * p.get("mass", 1.0) * p.get("mu_chem", 1.0)) + 2.0
    k = np.linspace(-extent, extent, npts)
    X, Z = np.meshgrid(k, k, indexing="ij")
    ev = np.abs(np.linalg.eigvalsh(symbol_at_wall_value(m, w, X, Z))).min(axis=-1)
    i = np.unravel_index(np.argmin(ev), ev.shape)
    f = lambda q: np.abs(np.linalg.eigvalsh(symbol_at_wall_value(m, w, q[0], q[1]))).min()
    res = minimize(f, [X[i], Z[i]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
    return float(min(res.fun, ev[i]))


def bulk_gap_check(model: SymbolModel, kgrid_extent=None, kgrid_n=201, rtol=1e-9):
    """Smallest |eigenvalue - gap centre| of both bulk symbols over a momentum grid.

    Returns the minimum distance of the bulk spectrum from the gap centre,
    refined by a local minimization. Raises :class:`GapViolation` if it is
    below the declared gap half-width.
    """
    if kgrid_extent is None:
        p = model.params
        pf = math.sqrt(2 * p.get("mass", 1.0) * p.get("mu_chem", 1.0)) if model.name in ("pwave", "dwave") else 0.0
        kgrid_extent = 3.0 * pf + 3.0
    k = np.linspace(-kgrid_extent, kgrid_extent, int(kgrid_n))
    X, Z = np.meshgrid(k, k, indexing="ij")
    c = model.gap_center
    best, where = np.inf, None
    for side in (-1, 1):
        ev = np.abs(np.linalg.eigvalsh(bulk_symbol(model, side, X, Z)) - c).min(axis=-1)
        i = np.unravel_index(np.argmin(ev), ev.shape)
        f = lambda q, side=side: np.abs(np.linalg.eigvalsh(bulk_symbol(model, side, q[0], q[1])) - c).min()
        res = minimize(f, [X[i], Z[i]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
        val, loc = (res.fun, tuple(res.x)) if res.fun < ev[i] else (ev[i], (X[i], Z[i]))
        if val < best:
            best, where = float(val), (side, float(loc[0]), float(loc[1]))
    if best < model.gap_half_width * (1 - rtol) - 1e-12:
        raise GapViolation(f"bulk spectrum at distance {best:.6g} from gap centre (xi, zeta)={where[1:]}",
                           where=where, value=best)
    return best


def anticommutation_check(model: SymbolModel, tol=1e-12):
    """Check ``{M_0, M_m}`` = 0 (odd order) or >= 0 (even order)."""
    M0, Mm = model.leading_coefficients()
    A = M0 @ Mm + Mm @ M0
    if model.order_m % 2:
        return bool(np.max(np.abs(A)) <= tol)
    return bool(np.linalg.eigvalsh(A).min() >= -tol)


# ---------------------------------------------------------------------------
# configuration

def model_to_config(model: SymbolModel) -> dict:
    return {"model": model.name, "params": dict(model.params), "walls": model.wall.to_dict()}


def model_from_config(cfg: Mapping[str, Any] | str) -> SymbolModel:
    """Build a model from ``{"model": ..., "params": {...}, "walls": {...}}``.

    ``cfg`` may be a mapping or a JSON string. The ``walls`` entry holds the
    :class:`WallProfile` fields.
    """
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    if "model" not in cfg:
        raise ValueError("config needs a 'model' entry")
    wall = WallProfile(**cfg.get("walls", {})) if cfg.get("walls") is not None else None
    return make_model(cfg["model"], cfg.get("params", {}), wall)
