import math
import warnings

import numpy as np
import pytest

from cavitybec.errors import NumericError, ParameterError, StabilityWarning, ZeroCaaWarning
from cavitybec.lindyn import drift_matrix, eigenvalues, resolve_working_point
from cavitybec.params import derive_model_params
from cavitybec.spectra import (
    PA,
    Grid,
    NoiseModel,
    SpectrumSeries,
    coeffs_f,
    coeffs_g,
    intensity_spectrum,
    inverse_susceptibility,
    local_maxima,
    optimal_phase,
    output_correlators,
    phase_noise_spectrum,
    squeezing_spectrum,
    susceptibility,
    transfer_matrix_correlators,
)
from cavitybec.steady import WorkingPoint

from conftest import model, random_stable_models


def wp(delta_d, G, stable=True):
    return WorkingPoint(alpha=G, beta=0.0, delta_d=delta_d, G=G, stable=stable)


@pytest.fixture(scope="module")
def point30():
    from cavitybec.presets import COLLISION_PROTOCOL

    m = derive_model_params(COLLISION_PROTOCOL.with_swave(30.0))
    return m, resolve_working_point(m)


def test_susceptibility_uncoupled():
    m = model()
    assert susceptibility(0.0, m, wp(-80.0, 0.0)) == 1 / (m.gamma**2 + m.omega_m**2)


def test_susceptibility_conjugate(point30):
    m, w = point30
    x = np.linspace(-300, 300, 1001)
    np.testing.assert_allclose(susceptibility(-x, m, w), np.conj(susceptibility(x, m, w)), rtol=1e-14)


def test_susceptibility_peak_near_lower_root(point30):
    from cavitybec.lindyn import analytic_peaks

    m, w = point30
    x = np.linspace(0, 240, 240_001)
    peaks = x[local_maxima(np.abs(susceptibility(x, m, w)))]
    lower = analytic_peaks(m, w)[1]
    step = Grid.symmetric(15.0, 3001, "kappa").step * m.kappa  # resolution of the omega/kappa figure grids
    assert np.min(np.abs(peaks - lower)) <= step


def test_pole_on_grid():
    m = model(gamma=1e-20)
    with pytest.raises(NumericError):
        susceptibility(m.omega_m, m, wp(-80.0, 0.0))


def test_f_coefficients(point30):
    m, w = point30
    x = np.linspace(-200, 200, 801)
    for a, b in zip(coeffs_f(-x, m, w), coeffs_f(x, m, w)):
        np.testing.assert_allclose(a, np.conj(b), rtol=1e-13, atol=1e-13)
    f2 = coeffs_f(np.array([0.0]), m, w)[1][0]
    k, g, D = m.kappa, m.gamma, w.delta_d
    assert f2 == pytest.approx(math.sqrt(2 * k) * k * (g * g + m.omega_m**2) / (D * D + k * k), rel=1e-13)
    f = coeffs_f(x, m, wp(-80.0, 0.0))
    assert not np.any(f[2]) and not np.any(f[3])


def test_g_coefficients(point30):
    m, w = point30
    x = np.linspace(-200, 200, 801)
    _, _, g3, g4 = coeffs_g(x, m, w)
    np.testing.assert_allclose(g4 / g3, m.Omega_minus / (m.gamma + 1j * x), rtol=1e-13)
    w0 = wp(-80.0, 0.0)
    g1, g2, g3, g4 = coeffs_g(x, m, w0)
    assert not (np.any(g2) or np.any(g3) or np.any(g4))
    expected = math.sqrt(2 * m.kappa) * inverse_susceptibility(x, m, w0) / (m.kappa + 1j * (x - w0.delta_d))
    np.testing.assert_allclose(g1, expected, rtol=1e-13)


def test_g_coefficients_at_omega_m_against_oracle(point30):
    m, w = point30
    x = np.array([-m.omega_m, m.omega_m])
    closed = intensity_spectrum(x, m, w).values
    oracle = intensity_spectrum(x, m, w, route="transfer_matrix").values
    np.testing.assert_allclose(closed, oracle, rtol=1e-10)


def test_phase_noise_tail_and_evenness(point30):
    m, w = point30
    far = phase_noise_spectrum(np.array([-1e3 * m.kappa, 1e3 * m.kappa]), m, w).values
    assert np.all(far - 0.5 < 1e-3)
    s = phase_noise_spectrum(Grid.symmetric(6, 4001, "omega_m"), m, w)
    assert np.all(s.values >= 0.5)
    np.testing.assert_allclose(s.values, s.values[::-1], rtol=1e-12, atol=0)


def test_phase_noise_peaks_follow_modes(point30):
    # every maximum of S_P at omega > 0 sits within one linewidth of a normal-mode frequency
    from cavitybec.presets import COLLISION_PROTOCOL

    for sw in (30.0, 60.0, 120.0):
        m = derive_model_params(COLLISION_PROTOCOL.with_swave(sw))
        w = resolve_working_point(m)
        ev = eigenvalues(drift_matrix(m, w))
        ev = ev[ev.imag > 0]
        s = phase_noise_spectrum(Grid.symmetric(10, 2001, "kappa"), m, w)
        idx = local_maxima(s.values)
        peaks = s.grid[idx][s.grid[idx] > 0] * m.kappa
        assert len(peaks) == 2
        for p in peaks:
            assert np.min(np.abs(p - ev.imag) - np.abs(ev.real)) <= 0


def test_intensity_uncoupled_zero():
    m = model()
    s = intensity_spectrum(Grid.symmetric(6, 401, "omega_m"), m, wp(-80.0, 0.0))
    assert np.all(s.values == 0)


def test_intensity_side_peaks_grow(protocol):
    # outermost S_I maximum relative to the value at omega = 0
    def ratio(sw):
        m = derive_model_params(protocol.with_swave(sw))
        s = intensity_spectrum(Grid.symmetric(10, 2001, "kappa"), m, resolve_working_point(m))
        idx = local_maxima(s.values)
        outer = idx[np.argmax(s.grid[idx])]
        return s.values[outer] / s.values[len(s.values) // 2]

    assert ratio(120.0) > ratio(30.0)


def test_intensity_even_nonnegative(point30):
    m, w = point30
    s = intensity_spectrum(Grid.symmetric(6, 4001, "omega_m"), m, w)
    assert np.all(s.values >= 0)
    np.testing.assert_allclose(s.values, s.values[::-1], rtol=1e-12, atol=0)


def test_squeezing_uncoupled_is_vacuum():
    m = model()
    s = squeezing_spectrum(Grid.symmetric(6, 401, "omega_m"), m, wp(-80.0, 0.0))
    np.testing.assert_allclose(s.values, 1.0, rtol=0, atol=1e-12)
    with pytest.warns(ZeroCaaWarning):
        phi = optimal_phase(Grid.symmetric(6, 401, "omega_m"), m, wp(-80.0, 0.0))
    assert phi.metadata["undefined_points"] == 401


def test_squeezing_minimality(point30):
    m, w = point30
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, 100) * m.omega_m
    phis = rng.uniform(-math.pi, math.pi, 100)
    opt = squeezing_spectrum(np.sort(x), m, w)
    order = np.argsort(x)
    for xi, phi, s_opt in zip(x[order], phis[order], opt.values):
        s_phi = squeezing_spectrum(np.array([xi]), m, w, phi=phi).values[0]
        assert s_phi >= s_opt - 1e-12
    assert np.all(opt.values >= 0)


def test_optimal_phase_attains_minimum(point30):
    m, w = point30
    x = np.linspace(-3, 3, 61) * m.omega_m
    phi = optimal_phase(x, m, w).values
    opt = squeezing_spectrum(x, m, w).values
    at = np.array([squeezing_spectrum(np.array([xi]), m, w, phi=p).values[0] for xi, p in zip(x, phi)])
    np.testing.assert_allclose(at, opt, rtol=1e-10, atol=1e-12)


def test_transfer_route_identities(point30):
    m, w = point30
    x = np.linspace(-6, 6, 401) * m.omega_m
    corr = transfer_matrix_correlators(x, drift_matrix(m, w))
    sp = phase_noise_spectrum(x, m, w).values
    np.testing.assert_allclose(2 * m.kappa * corr.block(PA, PA).real + 0.5, sp, rtol=1e-10)
    si = intensity_spectrum(x, m, w).values
    np.testing.assert_allclose(intensity_spectrum(x, m, w, route="transfer_matrix").values, si, rtol=1e-10)


def test_transfer_route_decouples():
    m = model()
    corr = transfer_matrix_correlators(np.linspace(-50, 50, 11), drift_matrix(m, wp(-80.0, 0.0)))
    for i in (0, 1):
        for j in (2, 3):
            assert np.all(corr.block(i, j) == 0) and np.all(corr.block(j, i) == 0)


@pytest.mark.parametrize("assembly", ["intracavity", "input_output"])
def test_routes_agree_for_both_assemblies(assembly):
    x = np.linspace(-6, 6, 201)
    for m, w in random_stable_models(11, 5):
        g = x * m.omega_m
        for f in (phase_noise_spectrum, squeezing_spectrum):
            a = f(g, m, w, assembly=assembly).values
            b = f(g, m, w, route="transfer_matrix", assembly=assembly).values
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)
        for key, val in output_correlators(g, m, w, assembly=assembly).items():
            ref = output_correlators(g, m, w, route="transfer_matrix", assembly=assembly)[key]
            np.testing.assert_allclose(val, ref, rtol=1e-9, atol=1e-12)


def test_intracavity_assembly_exceeds_vacuum():
    # vacuum plus intracavity spectrum keeps S_opt >= 1 even without coupling
    m = model()
    s = squeezing_spectrum(Grid.symmetric(6, 201, "omega_m"), m, wp(-80.0, 0.0), assembly="intracavity")
    assert np.all(s.values >= 1.0 - 1e-12)


def test_non_vacuum_rejected(point30):
    m, w = point30
    with pytest.raises(ParameterError):
        phase_noise_spectrum(Grid(), m, w, noise=NoiseModel(n_ph=0.1))


def test_unstable_point_warns():
    m = model(delta_c=-100.0, omega_sw=0.0)
    from cavitybec.lindyn import classify_branches
    from cavitybec.steady import solve_steady_state

    (p,) = classify_branches(m, solve_steady_state(m))
    assert p.stable is False
    with pytest.warns(StabilityWarning):
        phase_noise_spectrum(Grid.symmetric(6, 101, "omega_m"), m, p)


def test_grid_validation():
    with pytest.raises(ParameterError):
        Grid(-1, 1, 4, "kappa")
    with pytest.raises(ParameterError):
        Grid(-1, 1, 2, "kappa")
    with pytest.raises(ParameterError):
        Grid(-1, 1, 5, "Hz")
    g = Grid.symmetric(6, 4001, "omega_m")
    assert g.values[2000] == 0.0
    np.testing.assert_array_equal(g.values, -g.values[::-1])


def test_series_validation():
    with pytest.raises(ValueError):
        SpectrumSeries("PhaseNoise", [1.0, 0.0], "kappa", [1.0, 1.0])
    with pytest.raises(NumericError):
        SpectrumSeries("PhaseNoise", [0.0, 1.0], "kappa", [1.0, np.nan])
    s = SpectrumSeries("Intensity", [0.0, 1.0], "kappa", [0.0, 1.0])
    assert (s.grid_name, s.column_name) == ("omega_over_kappa", "S_I")


def test_metadata(point30):
    m, w = point30
    s = phase_noise_spectrum(Grid.symmetric(6, 11, "omega_m"), m, w, route="transfer_matrix")
    assert s.metadata["model_hash"] == m.fingerprint()
    assert s.metadata["route"] == "transfer_matrix"
    assert s.metadata["working_point"]["delta_d"] == w.delta_d


@pytest.mark.parametrize("route", ["closed_form", "transfer_matrix"])
def test_deep_squeezing_no_cancellation(route):
    # frozen deep-squeezing point, reference from 50-digit arithmetic
    m = model(delta_c=3.4979034487788936, omega_sw=138.3936421750344, kappa=51.682568896312034,
              gamma=0.014889873738948988, eta=113.21560837943323)
    wp = resolve_working_point(m, "only_stable")
    v = squeezing_spectrum(np.array([0.0]), m, wp, route=route).values[0]
    assert v == pytest.approx(7.7367102682356389986e-05, rel=1e-9)
