import json
import math

import numpy as np
import pytest

from cavitybec.calib import (
    CSV_COLUMNS,
    CalibrationCurve,
    build_curve,
    estimate_omega_sw,
    forward_splitting,
)
from cavitybec.errors import EmptyCurve, OutOfRange, ParameterError

from conftest import model


@pytest.fixture(scope="module")
def curve():
    from cavitybec.presets import COLLISION_PROTOCOL

    return build_curve(COLLISION_PROTOCOL, (0.0, 120.0), 121)


def sample(curve, omega_sw):
    return next(s for s in curve.samples if s.omega_sw == omega_sw)


@pytest.mark.parametrize("omega_sw, expected", [(30.0, 5.6), (60.0, 4.2), (120.0, 2.1)])
def test_quoted_splittings(curve, omega_sw, expected):
    assert sample(curve, omega_sw).split_numeric / curve.kappa == pytest.approx(expected, abs=0.3)


def test_small_omega_sw_endpoint(curve):
    s = curve.samples[0]
    assert s.omega_m == pytest.approx(4.0, abs=1e-12)
    assert abs(s.delta_d) == pytest.approx(250.0, rel=0.05)


def test_whole_range_monotone(curve):
    assert curve.omega_sw_interval == (0.0, 120.0)
    assert all(s.stable for s in curve.samples)


def test_single_sample_curve(protocol):
    c = build_curve(protocol, (45.0, 45.0), 1)
    assert len(c.samples) == 1
    assert c.monotone_interval is None and c.omega_sw_interval is None


def test_bad_ranges(protocol):
    with pytest.raises(ParameterError):
        build_curve(protocol, (10.0, 5.0), 10)
    with pytest.raises(ParameterError):
        build_curve(protocol, (-1.0, 5.0), 10)


def test_all_unstable_curve():
    with pytest.raises(EmptyCurve):
        build_curve(model(delta_c=-100.0), (0.0, 0.0), 1)


def test_round_trip_45(curve, protocol):
    split = forward_splitting(protocol, 45.0) / curve.kappa
    assert estimate_omega_sw(curve, split).omega_sw == pytest.approx(45.0, abs=0.5)


@pytest.mark.parametrize("measured, expected", [(4.2, 60.0), (5.6, 30.0)])
def test_quoted_inverse(curve, measured, expected):
    est = estimate_omega_sw(curve, measured, "kappa")
    assert est.omega_sw == pytest.approx(expected, abs=1.5)
    assert not est.ambiguous
    assert est.bracket[0] <= est.omega_sw <= est.bracket[1]
    assert est.sensitivity > 0


def test_inverse_consistency(curve, protocol):
    rng = np.random.default_rng(5)
    for w in rng.uniform(0.0, 120.0, 50):
        est = estimate_omega_sw(curve, forward_splitting(protocol, w) / curve.kappa)
        assert abs(est.omega_sw - w) <= 0.01 * w


def test_unpolished_inverse_is_interpolation(curve, protocol):
    rng = np.random.default_rng(6)
    for w in rng.uniform(10.0, 120.0, 20):
        est = estimate_omega_sw(curve, forward_splitting(protocol, w) / curve.kappa, polish=False)
        assert abs(est.omega_sw - w) <= 0.01 * w


def test_units(curve):
    k = curve.kappa
    a = estimate_omega_sw(curve, 4.2).omega_sw
    assert estimate_omega_sw(curve, 4.2 * k, "omega_R").omega_sw == pytest.approx(a, rel=1e-12)
    assert estimate_omega_sw(curve, 4.2 * k * curve.recoil_rad_s, "rad_s").omega_sw == pytest.approx(a, rel=1e-9)
    with pytest.raises(ParameterError):
        estimate_omega_sw(curve, 4.2, "Hz")
    with pytest.raises(ParameterError):
        estimate_omega_sw(curve, -1.0)


def test_out_of_range(curve):
    top = curve.samples[0].split_numeric / curve.kappa
    with pytest.raises(OutOfRange):
        estimate_omega_sw(curve, top * 1.01)
    with pytest.raises(OutOfRange):
        estimate_omega_sw(curve, 100.0)


def test_ambiguous_beyond_turning_point(protocol):
    c = build_curve(protocol, (0.0, 300.0), 151)
    assert len(c.runs) == 2
    ys = [s.split_numeric / c.kappa for s in c.samples]
    est = estimate_omega_sw(c, min(ys) + 0.05)
    assert est.ambiguous and len(est.preimages) == 2
    lo, hi = est.preimages
    assert lo < c.samples[int(np.argmin(ys))].omega_sw < hi


def test_analytic_column_close(curve):
    for s in curve.samples:
        if s.omega_sw >= 10.0:
            assert abs(s.split_analytic - s.split_numeric) / s.split_numeric <= 0.1


def test_serialisation_round_trip(curve):
    doc = json.loads(json.dumps(curve.to_json()))
    back = CalibrationCurve.from_json(doc)
    # splittings are stored over kappa, so scaling back can move the last bit
    for a, b in zip(back.samples, curve.samples):
        assert (a.omega_sw, a.omega_m, a.delta_d, a.stable) == (b.omega_sw, b.omega_m, b.delta_d, b.stable)
        assert a.split_numeric == pytest.approx(b.split_numeric, rel=4e-16)
        assert a.split_analytic == pytest.approx(b.split_analytic, rel=4e-16)
    assert back.monotone_interval == curve.monotone_interval
    assert estimate_omega_sw(back, 4.2).omega_sw == pytest.approx(estimate_omega_sw(curve, 4.2).omega_sw, rel=1e-12)
    lines = curve.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 122
    with pytest.raises(ParameterError):
        CalibrationCurve.from_json({"protocol": {}})


def test_model_protocol(protocol):
    from cavitybec.params import derive_model_params

    m = derive_model_params(protocol)
    c = build_curve(m, (0.0, 120.0), 25)
    assert c.samples[6].split_numeric == pytest.approx(forward_splitting(protocol, 30.0), rel=1e-12)


def test_threads_deterministic(protocol, curve):
    assert build_curve(protocol, (0.0, 120.0), 121, threads=4).samples == curve.samples
