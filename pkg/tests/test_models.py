import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgecond.models import (GELL_MANN, PAULI, GapViolation, WallProfile, anticommutation_check,
                             bulk_gap_check, bulk_symbol, eval_symbol, make_model, model_from_config,
                             model_to_config, pauli_decompose, shallow_water3x3, smoothstep,
                             symbol_at_wall_value)

NAMES = ("dirac2x2", "pwave", "dwave", "shallow_water3x3")


def test_pauli_algebra():
    # [TRIVIAL] s_i s_j = delta_ij + i eps_ijk s_k
    s1, s2, s3 = PAULI[1:]
    assert np.allclose(s1 @ s2, 1j * s3)
    assert np.allclose(s2 @ s3, 1j * s1)
    assert np.allclose(s3 @ s1, 1j * s2)


def test_gell_mann_hermitian_traceless():
    for M in GELL_MANN.values():
        assert np.allclose(M, M.conj().T)
        assert abs(np.trace(M)) < 1e-15


def test_smoothstep_plateaus_and_symmetry():
    t = np.linspace(-0.5, 1.5, 201)
    s = smoothstep(t)
    assert np.all(s[t <= 0] == 0) and np.all(s[t >= 1] == 1)
    assert np.allclose(s + smoothstep(1 - t), 1.0)


@pytest.mark.parametrize("kind", ["smoothstep", "tanh_sine", "sign_like"])
@pytest.mark.parametrize("period", [0.0, 24.0])
def test_wall_derivative_matches_finite_difference(kind, period):
    w = WallProfile(kind, -1.0, 1.0, 2.0 if kind != "smoothstep" else None, period, 2.0)
    y = np.linspace(-5.3, 4.7, 37)
    h = 1e-6
    fd = (w.value(y + h) - w.value(y - h)) / (2 * h)
    assert np.allclose(w.derivative(y), fd, atol=1e-6)


def test_wall_plateaus_and_zeros():
    w = WallProfile(period=24.0)
    assert w.value(-6.0) == -1.0 and w.value(6.0) == 1.0 and w.value(18.0) == -1.0
    z = w.zeros()
    assert len(z) == 2 and abs(z[0]) < 1e-12 and abs(z[1] - 12.0) < 1e-12


def test_wall_rejects_bad_input():
    with pytest.raises(ValueError):
        WallProfile(kind="cubic")
    with pytest.raises(ValueError):
        WallProfile(period=8.0, wall_width_delta=2.0)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_pauli_decompose_roundtrip(a, b, c):
    h = a * PAULI[1] + b * PAULI[2] + c * PAULI[3] + 0.5 * PAULI[0]
    f = pauli_decompose(h)
    assert np.allclose(f, (0.5, a, b, c), atol=1e-9 * (1 + abs(a) + abs(b) + abs(c)))


def test_pauli_decompose_rejects_non_hermitian():
    with pytest.raises(ValueError):
        pauli_decompose(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("name", NAMES)
@given(y=st.floats(-10, 10), xi=st.floats(-10, 10), zeta=st.floats(-10, 10))
def test_symbols_hermitian(name, y, xi, zeta):
    m = make_model(name) if name != "shallow_water3x3" else shallow_water3x3(mu_reg=0.3)
    h = eval_symbol(m, y, xi, zeta)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12 * max(1, np.abs(h).max())


def test_dirac_symbol_explicit():
    m = make_model("dirac2x2")
    h = eval_symbol(m, 10.0, 0.3, -0.2)
    assert np.allclose(h, 0.3 * PAULI[1] - 0.2 * PAULI[2] + PAULI[3])


def test_eval_symbol_rejects_nonfinite():
    with pytest.raises(ValueError):
        eval_symbol(make_model("dirac2x2"), np.nan, 0.0, 0.0)


@pytest.mark.parametrize("name", NAMES)
def test_declared_gap_is_a_gap(name):
    m = make_model(name)
    d = bulk_gap_check(m)
    assert d >= m.gap_half_width * (1 - 1e-9)


def test_gap_values():
    # [DERIVED] pwave bulk band minimum |E| = sqrt(c^2 p^2 + (p^2/2-1)^2) minimized at p^2 = 0: 1
    assert make_model("dirac2x2").gap == (-1.0, 1.0)
    assert np.allclose(make_model("pwave").gap, (-1.0, 1.0), atol=1e-8)
    # dwave: |E|^2 = (p^2/2 - 1)^2 + p^4/4 (cos^2 2t + sin^2 2t / 4 ...) minimized: 1/sqrt(2)
    assert np.allclose(make_model("dwave").gap, (-1 / math.sqrt(2), 1 / math.sqrt(2)), atol=1e-6)
    assert shallow_water3x3(mu_reg=0.2).gap == (0.2, 1.0)


def test_gap_violation_detected():
    m = make_model("dirac2x2")
    bad = type(m)(m.name, m.params, m.wall, (-2.0, 2.0), 2, 1)
    with pytest.raises(GapViolation):
        bulk_gap_check(bad)


@pytest.mark.parametrize("name", NAMES[:3])
def test_anticommutation(name):
    assert anticommutation_check(make_model(name))


def test_anticommutation_fails_for_equatorial_model():
    # [DERIVED] {g1, g4} = g6 is not zero
    assert not anticommutation_check(shallow_water3x3())
    assert np.allclose(GELL_MANN[1] @ GELL_MANN[4] + GELL_MANN[4] @ GELL_MANN[1],
                       np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]]))


def test_flip_swaps_plateaus():
    m = make_model("pwave")
    f = m.flipped()
    assert f.wall.plateau_minus == m.wall.plateau_plus
    assert np.allclose(bulk_symbol(f, 1, 0.4, 0.2), bulk_symbol(m, -1, 0.4, 0.2))


def test_regularized_3x3_spectrum():
    # [DERIVED] the regularizer lifts the flat band to mu kappa^2 / sqrt(1 + kappa^2)
    mu = 0.2
    m = shallow_water3x3(mu_reg=mu)
    xi, zeta, w = 0.7, -0.4, 0.9
    ev = np.linalg.eigvalsh(symbol_at_wall_value(m, w, xi, zeta))
    k2 = w * w + xi * xi + zeta * zeta
    assert np.allclose(sorted(ev), sorted([-math.sqrt(k2), math.sqrt(k2), mu * k2 / math.sqrt(1 + k2)]))


def test_config_roundtrip():
    m = make_model("pwave", {"mass": 2.0}, WallProfile("tanh_sine", -0.5, 1.5, None, 24.0, 2.0))
    cfg = json.loads(json.dumps(model_to_config(m)))
    m2 = model_from_config(cfg)
    assert m2 == m


def test_config_errors():
    with pytest.raises(ValueError):
        model_from_config({"params": {}})
    with pytest.raises(ValueError):
        make_model("graphene")
    with pytest.raises(ValueError):
        make_model("pwave", {"spin": 1.0})
    with pytest.raises(ValueError):
        make_model("pwave", {"mass": -1.0})
