"""Splitting-to-scattering-frequency calibration.

A curve tabulates the normal-mode splitting against omega_sw for a fixed
protocol (everything but omega_sw held constant) and is inverted with a
monotone cubic (PCHIP) interpolant on each strictly monotone stretch.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import EmptyCurve, NumericError, OutOfRange, ParameterError
from .lindyn import analytic_peaks, classify_branches, drift_matrix, numeric_splitting
from .params import ModelParams, PhysicalParams, derive_model_params
from .steady import select_branch, solve_steady_state

CSV_COLUMNS = (
    "omega_sw_over_omegaR",
    "dsplit_numeric_over_kappa",
    "dsplit_analytic_over_kappa",
    "omega_m_over_omegaR",
    "delta_d_over_omegaR",
)
SPLITTING_UNITS = ("kappa", "omega_R", "rad_s")

Protocol = Union[PhysicalParams, ModelParams]


def model_at(protocol: Protocol, omega_sw: float) -> ModelParams:
    """Model parameters of ``protocol`` with the s-wave frequency set to ``omega_sw`` (omega_R)."""
    if isinstance(protocol, ModelParams):
        return protocol.replace(omega_sw=float(omega_sw))
    return derive_model_params(protocol.with_swave(float(omega_sw)))


@dataclass(frozen=True)
class CalibrationSample:
    omega_sw: float
    split_numeric: float
    split_analytic: float
    omega_m: float
    delta_d: float
    stable: bool

    @property
    def usable(self):
        return self.stable and math.isfinite(self.split_numeric)


def compute_sample(protocol: Protocol, omega_sw: float, policy="auto") -> CalibrationSample:
    m = model_at(protocol, omega_sw)
    points = classify_branches(m, solve_steady_state(m))
    try:
        wp = select_branch(points, policy)
    except NumericError:
        wp = points[0]
    M = drift_matrix(m, wp)
    try:
        num = numeric_splitting(M)
    except NumericError:
        num = math.nan
    try:
        hi, lo = analytic_peaks(m, wp)
        an = hi - lo
    except NumericError:
        an = math.nan
    return CalibrationSample(float(omega_sw), num, an, m.omega_m, wp.delta_d, bool(wp.stable))


def _monotone_runs(samples):
    """Maximal index runs (start, stop inclusive) of usable samples with strictly monotone splitting."""
    runs = []
    start = None
    sign = 0
    for i, s in enumerate(samples):
        if not s.usable:
            if start is not None and i - 1 > start:
                runs.append((start, i - 1))
            start, sign = None, 0
            continue
        if start is None:
            start, sign = i, 0
            continue
        d = np.sign(s.split_numeric - samples[i - 1].split_numeric)
        if d == 0:
            if i - 1 > start:
                runs.append((start, i - 1))
            start, sign = i, 0
        elif sign == 0 or d == sign:
            sign = d
        else:
            runs.append((start, i - 1))
            start, sign = i - 1, d
    if start is not None and len(samples) - 1 > start:
        runs.append((start, len(samples) - 1))
    return runs


@dataclass(frozen=True)
class CalibrationCurve:
    protocol: Protocol
    kappa: float
    recoil_rad_s: float
    samples: tuple
    monotone_interval: Optional[tuple] = None
    runs: tuple = ()

    def __post_init__(self):
        sw = [s.omega_sw for s in self.samples]
        if any(b <= a for a, b in zip(sw, sw[1:])):
            raise ParameterError("samples must be sorted by omega_sw", field="samples")

    @property
    def omega_sw_interval(self):
        if self.monotone_interval is None:
            return None
        i, j = self.monotone_interval
        return self.samples[i].omega_sw, self.samples[j].omega_sw

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in self.samples:
            writer.writerow(
                [
                    repr(s.omega_sw),
                    repr(s.split_numeric / self.kappa),
                    repr(s.split_analytic / self.kappa),
                    repr(s.omega_m),
                    repr(s.delta_d),
                ]
            )
        return buf.getvalue()

    def to_json(self):
        if isinstance(self.protocol, PhysicalParams):
            protocol = {"physical": self.protocol.to_config()}
        else:
            protocol = {"model": {k: v for k, v in self.protocol.to_dict().items()
                                  if k in ModelParams.__dataclass_fields__}}
        return {
            "protocol": protocol,
            "kappa_over_omegaR": self.kappa,
            "omega_R_rad_s": self.recoil_rad_s,
            "monotone_interval": list(self.omega_sw_interval) if self.monotone_interval else None,
            "columns": list(CSV_COLUMNS) + ["stable"],
            "samples": [
                [s.omega_sw, _json_float(s.split_numeric / self.kappa),
                 _json_float(s.split_analytic / self.kappa), s.omega_m, s.delta_d, s.stable]
                for s in self.samples
            ],
        }

    @classmethod
    def from_json(cls, d):
        try:
            block = d["protocol"]
            if "physical" in block:
                protocol = PhysicalParams.from_config(block["physical"])
            else:
                protocol = ModelParams.from_dict(block["model"])
            kappa = float(d["kappa_over_omegaR"])
            rows = d["samples"]
            samples = tuple(
                CalibrationSample(
                    float(r[0]), _from_json_float(r[1]) * kappa, _from_json_float(r[2]) * kappa,
                    float(r[3]), float(r[4]), bool(r[5]),
                )
                for r in rows
            )
            return _finish(protocol, kappa, float(d["omega_R_rad_s"]), samples)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParameterError(f"malformed calibration curve: {exc}", field="curve") from None


def _json_float(x):
    return x if math.isfinite(x) else None


def _from_json_float(x):
    return math.nan if x is None else float(x)


def _finish(protocol, kappa, recoil, samples):
    runs = tuple(_monotone_runs(samples))
    primary = max(runs, key=lambda r: (r[1] - r[0], -r[0])) if runs else None
    return CalibrationCurve(protocol, kappa, recoil, samples, primary, runs)


def build_curve(protocol: Protocol, omega_sw_range=(0.0, 120.0), n_samples=121, policy="auto", threads=1):
    """Tabulate numeric and analytic splittings over an omega_sw range (omega_R units)."""
    lo, hi = omega_sw_range
    if n_samples < 1 or lo < 0 or hi < lo:
        raise ParameterError("need n_samples >= 1 and 0 <= min <= max", field="omega_sw_range")
    grid = [float(lo)] if n_samples == 1 else np.linspace(lo, hi, int(n_samples)).tolist()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = tuple(pool.map(lambda w: compute_sample(protocol, w, policy), grid))
    else:
        samples = tuple(compute_sample(protocol, w, policy) for w in grid)
    if not any(s.stable for s in samples):
        raise EmptyCurve("no stable samples in the requested omega_sw range")
    m0 = model_at(protocol, grid[0])
    return _finish(protocol, m0.kappa, m0.recoil_rad_s, samples)


@dataclass(frozen=True)
class CalibrationEstimate:
    omega_sw: float
    splitting: float
    bracket: tuple
    sensitivity: float
    preimages: tuple = ()
    ambiguous: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "omega_sw_over_omegaR": self.omega_sw,
            "splitting_over_kappa": self.splitting,
            "bracket_omega_sw_over_omegaR": list(self.bracket),
            "sensitivity_kappa_per_omegaR": self.sensitivity,
            "preimages_over_omegaR": list(self.preimages),
            "ambiguous": self.ambiguous,
        }


def _to_recoil(value, unit, curve):
    if unit not in SPLITTING_UNITS:
        raise ParameterError(f"unit must be one of {SPLITTING_UNITS}", field="unit")
    if unit == "kappa":
        return value * curve.kappa
    if unit == "rad_s":
        return value / curve.recoil_rad_s
    return value


def _invert_run(curve, run, target, polish=True):
    i, j = run
    xs = np.array([s.omega_sw for s in curve.samples[i : j + 1]])
    ys = np.array([s.split_numeric for s in curve.samples[i : j + 1]])
    if not (ys.min() <= target <= ys.max()):
        return None
    order = np.argsort(ys)
    inverse = PchipInterpolator(ys[order], xs[order])
    estimate = float(inverse(target))
    # sample interval that brackets the target
    k = next(k for k in range(1, len(xs)) if min(ys[k - 1], ys[k]) <= target <= max(ys[k - 1], ys[k]))
    bracket = (float(xs[k - 1]), float(xs[k]))
    if polish and ys[k - 1] != ys[k]:
        # the table only brackets the root; the forward model pins it down
        def residual(w):
            if w == bracket[0]:
                return ys[k - 1] - target
            if w == bracket[1]:
                return ys[k] - target
            return forward_splitting(curve.protocol, w) - target

        try:
            estimate = brentq(residual, *bracket, xtol=1e-12, rtol=1e-14)
        except (NumericError, ValueError):
            pass
    forward = PchipInterpolator(xs, ys)
    slope = abs(float(forward.derivative()(estimate))) / curve.kappa
    return estimate, bracket, slope


def estimate_omega_sw(curve: CalibrationCurve, measured_splitting: float, unit="kappa", polish=True) -> CalibrationEstimate:
    """Invert the curve at a measured splitting.

    The monotone (PCHIP) inverse of each stretch brackets the root; with
    ``polish`` the estimate is then refined against the forward model of the
    curve's protocol inside the bracketing sample interval.  Returns the
    estimate on the primary monotone interval, the bracketing samples and
    the local slope ``|d(split/kappa) / d(omega_sw/omega_R)|``.
    If the value has preimages on several monotone stretches they are all
    listed and ``ambiguous`` is set.
    """
    if not measured_splitting > 0:
        raise ParameterError("splitting must be > 0", field="splitting")
    target = _to_recoil(float(measured_splitting), unit, curve)
    usable = [s.split_numeric for s in curve.samples if s.usable]
    if not usable:
        raise EmptyCurve("curve has no usable samples")
    lo, hi = min(usable), max(usable)
    if not (lo <= target <= hi):
        raise OutOfRange(
            f"splitting {target / curve.kappa:.6g} kappa outside tabulated range "
            f"[{lo / curve.kappa:.6g}, {hi / curve.kappa:.6g}] kappa"
        )
    found = []
    for run in curve.runs:
        res = _invert_run(curve, run, target, polish)
        if res is not None:
            found.append((run, res))
    if not found:
        raise OutOfRange("splitting falls between monotone stretches of the curve")
    preimages = []
    for _, (est, _, _) in found:
        if not any(abs(est - p) <= 1e-9 * max(1.0, abs(p)) for p in preimages):
            preimages.append(est)
    primary = next((r for run, r in found if run == curve.monotone_interval), found[0][1])
    est, bracket, slope = primary
    return CalibrationEstimate(
        omega_sw=est,
        splitting=target / curve.kappa,
        bracket=bracket,
        sensitivity=slope,
        preimages=tuple(sorted(preimages)),
        ambiguous=len(preimages) > 1,
    )


def forward_splitting(protocol: Protocol, omega_sw: float, policy="auto") -> float:
    """Numeric splitting (omega_R units) at a single omega_sw."""
    return compute_sample(protocol, omega_sw, policy).split_numeric
