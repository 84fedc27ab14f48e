import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitybec.errors import ParameterError
from cavitybec.params import (
    ModelParams,
    PhysicalParams,
    Quantity,
    derive_model_params,
    mechanical_frequency,
    physical_with_rad_s,
    recoil_frequency,
    RB87_MASS,
)
from cavitybec.presets import lab_params

from conftest import model

# independent arithmetic: hbar k^2 / 2m for Rb-87 at 780 nm, and g0^2 / Delta_a / omega_R
OMEGA_R = 23708.383504322977
U0_LAB = 0.44140246578409253


def test_recoil_frequency_rb87():
    assert recoil_frequency(780e-9, RB87_MASS) == pytest.approx(OMEGA_R, rel=1e-12)
    assert recoil_frequency(780e-9, RB87_MASS) == pytest.approx(2.37e4, rel=2e-3)


def test_lab_coupling(protocol):
    m = derive_model_params(protocol)
    assert m.recoil_rad_s == pytest.approx(OMEGA_R, rel=1e-12)
    assert m.U0 == pytest.approx(U0_LAB, rel=1e-12)
    assert m.stark_shift == pytest.approx(2.21e4, rel=2e-3)
    assert m.stark_shift == pytest.approx(1e5 * U0_LAB / 2, rel=1e-12)
    assert m.zeta == pytest.approx(math.sqrt(1e5) * U0_LAB / 2, rel=1e-12)
    # Delta_c = 0.994 Delta_0 leaves delta_c = 0.006 Delta_0
    assert m.delta_c == pytest.approx(0.006 * m.stark_shift, rel=1e-9)
    assert m.kappa == 24.0
    assert m.gamma == pytest.approx(0.024)
    assert m.eta == 81.0


def test_zero_swave_mode():
    m = model(omega_sw=0.0)
    assert m.Omega_c == m.Omega_plus == m.Omega_minus == 4.0
    assert m.omega_m == 4.0


@pytest.mark.parametrize(
    "omega_sw, expected, tol",
    [(50.0, 47.86, 0.01), (0.0, 4.0, 0.0), (30.0, math.sqrt(931.0), 1e-12)],
)
def test_mechanical_frequency(omega_sw, expected, tol):
    assert mechanical_frequency(omega_sw) == pytest.approx(expected, abs=tol)


def test_mechanical_frequency_matches_matter_block():
    # imaginary part of the eigenvalues of the 2x2 matter block at gamma -> 0
    Oc = 4 + 30.0
    block = np.array([[0.0, Oc - 15.0], [-(Oc + 15.0), 0.0]])
    assert np.max(np.linalg.eigvals(block).imag) == pytest.approx(mechanical_frequency(30.0), rel=1e-12)


def test_mechanical_frequency_rejects_negative():
    with pytest.raises(ParameterError):
        mechanical_frequency(-1.0)


@given(st.floats(0, 1e4), st.floats(1e-6, 1e3))
def test_mechanical_frequency_increasing(w, dw):
    assert mechanical_frequency(w + dw) > mechanical_frequency(w)


@given(st.floats(0, 1e4))
def test_mode_identities(w):
    m = model(omega_sw=w)
    assert m.Omega_plus >= m.Omega_minus >= 4.0
    assert m.omega_m**2 == pytest.approx(m.Omega_plus * m.Omega_minus, rel=1e-14)


def test_zeta_scaling():
    a, b = model(atom_count=1e5), model(atom_count=2e5)
    assert b.zeta == pytest.approx(math.sqrt(2) * a.zeta, rel=1e-15)
    assert b.stark_shift == pytest.approx(2 * a.stark_shift, rel=1e-15)


@pytest.mark.parametrize("field, value", [("kappa", 0.0), ("kappa", -1.0), ("gamma", 0.0), ("eta", -1.0),
                                          ("atom_count", 0.5), ("U0", -0.1), ("omega_sw", -1.0)])
def test_model_validation_names_field(field, value):
    with pytest.raises(ParameterError) as exc:
        model(**{field: value})
    assert exc.value.field == field
    assert field in str(exc.value)


def test_physical_validation():
    with pytest.raises(ParameterError):
        lab_params(detuning_fraction=0.994, stark_detuning=Quantity(1.0, "omega_m"))
    p = lab_params()
    with pytest.raises(ParameterError):
        derive_model_params(p.replace(atomic_frequency=p.cavity_frequency + 1.0))
    with pytest.raises(ParameterError):
        derive_model_params(lab_params(kappa=-1.0))


def test_quantity_parse():
    assert Quantity.parse({"value": 2, "unit": "kappa"}, "x") == Quantity(2.0, "kappa")
    with pytest.raises(ParameterError):
        Quantity.parse({"value": 2, "unit": "Hz"}, "x")
    with pytest.raises(ParameterError):
        Quantity.parse(3.0, "x")


def test_relative_units_resolve():
    p = lab_params(kappa=24.0, omega_sw=50.0, stark_detuning=Quantity(2.0, "omega_m"))
    m = derive_model_params(p)
    assert m.delta_c == pytest.approx(2 * m.omega_m, rel=1e-14)
    assert m.gamma == pytest.approx(1e-3 * m.kappa, rel=1e-14)


def test_scattering_length_route():
    p = lab_params()
    w_sw = derive_model_params(p.replace(swave_frequency=None, scattering_length=5.3e-9)).omega_sw
    assert w_sw > 0
    # linear in a_s
    w2 = derive_model_params(p.replace(swave_frequency=None, scattering_length=10.6e-9)).omega_sw
    assert w2 == pytest.approx(2 * w_sw, rel=1e-12)


@pytest.mark.parametrize("omega_sw", [0.0, 30.0, 120.0])
def test_unit_round_trip(protocol, omega_sw):
    m = derive_model_params(protocol.with_swave(omega_sw))
    back = derive_model_params(physical_with_rad_s(protocol.with_swave(omega_sw), m))
    for f in ModelParams.__dataclass_fields__:
        assert getattr(back, f) == pytest.approx(getattr(m, f), rel=1e-12)
    again = ModelParams.from_rad_s(m.in_rad_s())
    for f in ModelParams.__dataclass_fields__:
        assert getattr(again, f) == pytest.approx(getattr(m, f), rel=1e-12)


def test_config_round_trip(protocol):
    p = PhysicalParams.from_config(protocol.to_config())
    assert derive_model_params(p) == derive_model_params(protocol)


def test_model_dict_round_trip():
    m = model()
    assert ModelParams.from_dict(m.to_dict()) == m
    assert m.fingerprint() == ModelParams.from_dict(m.to_dict()).fingerprint()
    assert m.fingerprint() != m.replace(eta=80.0).fingerprint()
