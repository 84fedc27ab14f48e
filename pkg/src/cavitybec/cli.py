"""Command-line front end.

Every verb computes its artifacts in memory and writes them only once all of
them are ready, so a failing run leaves nothing behind.  Exit codes: 0 on
success, 2 for invalid input, 3 for numerical failures.  Errors are reported
as one JSON record on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import io as cio
from .calib import CSV_COLUMNS, CalibrationCurve, build_curve, estimate_omega_sw, model_at
from .errors import AmbiguousEstimate, CavityBECError, NumericError, ParameterError
from .lindyn import analytic_peaks, classify_branches, drift_matrix, is_stable, mode_report
from .params import ModelParams, PhysicalParams, derive_model_params
from .presets import COLLISION_PROTOCOL, PRESETS, get_preset
from .spectra import (
    Grid,
    intensity_spectrum,
    local_maxima,
    local_minima,
    optimal_phase,
    phase_noise_spectrum,
    squeezing_spectrum,
)
from .steady import POLICIES, cubic_intensity_roots, fixed_point_residuals, select_branch, solve_steady_state

THREADS_ENV = "CAVITYBEC_THREADS"
SPECTRUM_KINDS = ("phase_noise", "intensity", "squeezing_optimal", "squeezing_phase", "optimal_phase")
TASKS = ("spectrum", "stability_sweep", "calibration", "steady_state")
STABILITY_COLUMNS = (
    "omega_sw_over_omegaR",
    "branch_index",
    "photons",
    "delta_d_over_omegaR",
    "G_over_omegaR",
    "stable",
    "margin_over_omegaR",
    "dsplit_numeric_over_kappa",
    "dsplit_analytic_over_kappa",
)


class Outputs:
    """Artifacts held in memory until the run has succeeded."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files = []

    def add(self, name, text):
        if any(n == name for n, _ in self.files):
            raise ParameterError(f"output file {name!r} produced twice", field="output")
        self.files.append((name, text))
        return name

    def commit(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        try:
            for name, text in self.files:
                path = self.out_dir / name
                with open(path, "w", newline="") as fh:
                    fh.write(text)
                written.append(path)
        except BaseException:
            for path in written:
                path.unlink(missing_ok=True)
            raise
        return written


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_")


def _policy(value):
    if value is None:
        return "auto"
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, str) and value.isdigit():
        return int(value)
    if value not in POLICIES:
        raise ParameterError(f"branch policy must be an index or one of {POLICIES}", field="branch_policy")
    return value


def _threads(flag):
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            n = int(env)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be an integer", field=THREADS_ENV) from None
    if n < 1:
        raise ParameterError("thread count must be >= 1", field="threads")
    return n


# ---------------------------------------------------------------- configs

def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc.strerror}", field="config") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path} is not valid JSON: {exc}", field="config") from None


def _schema_check(doc, name):
    try:
        cio.validate(doc, name)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or None
        raise ParameterError(f"{name} config invalid at {where or '<root>'}: {exc.message}", field=where) from None


def parse_scenario(doc):
    """Validate a scenario document and return ``(protocol, model)``.

    ``protocol`` is the PhysicalParams or ModelParams block as given and
    ``model`` the derived recoil-unit parameters.
    """
    _schema_check(doc, "scenario")
    if "physical" in doc:
        protocol = PhysicalParams.from_config(doc["physical"])
        return protocol, derive_model_params(protocol)
    protocol = ModelParams.from_dict(doc["model"])
    return protocol, protocol


def _grid(spec, default=None):
    if spec is None:
        return default or Grid()
    return Grid(float(spec["min"]), float(spec["max"]), int(spec["points"]), spec["unit"])


def _physical_block(protocol):
    return protocol.to_config() if isinstance(protocol, PhysicalParams) else None


def _model_block(m):
    return {k: v for k, v in m.to_dict().items() if k in ModelParams.__dataclass_fields__}


# ---------------------------------------------------------------- tasks

def _series_for(kind, grid, m, wp, phi=None, route="closed_form", assembly=None):
    if kind == "phase_noise":
        return phase_noise_spectrum(grid, m, wp, route=route, assembly=assembly or "intracavity")
    if kind == "intensity":
        return intensity_spectrum(grid, m, wp, route=route)
    if kind == "squeezing_optimal":
        return squeezing_spectrum(grid, m, wp, route=route, assembly=assembly or "input_output")
    if kind == "squeezing_phase":
        if phi is None:
            raise ParameterError("squeezing_phase needs a homodyne phase phi", field="task.phi")
        return squeezing_spectrum(grid, m, wp, phi=phi, route=route, assembly=assembly or "input_output")
    if kind == "optimal_phase":
        return optimal_phase(grid, m, wp, route=route, assembly=assembly or "input_output")
    raise ParameterError(f"spectrum kind must be one of {SPECTRUM_KINDS}", field="task.spectrum")


def _caught(record):
    return sorted({f"{w.category.__name__}: {w.message}" for w in record})


def spectrum_task(out, protocol, m, kind, grid, fmt, stem=None, policy="auto", phi=None,
                  route="closed_form", assembly=None):
    with warnings.catch_warnings(record=True) as record:
        warnings.simplefilter("always")
        wp = select_branch(classify_branches(m, solve_steady_state(m)), policy)
        series = _series_for(kind, grid, m, wp, phi, route, assembly)
        report = mode_report(m, wp)
    stem = stem or kind
    if fmt == "csv":
        data = out.add(f"{stem}.csv", cio.series_csv([series]))
    else:
        data = out.add(f"{stem}.json", cio.dumps(cio.series_json([series])))
    info = {k: v for k, v in series.metadata.items() if k != "working_point"}
    info["kind"] = series.kind
    meta = cio.document(
        "spectrum_meta",
        model=m.to_dict(),
        physical=_physical_block(protocol),
        working_point=wp.to_dict(),
        mode_report=report.to_dict(),
        grid=grid.to_dict(),
        series=[info],
        data_file=data,
        warnings=_caught(record),
    )
    cio.validate(meta)
    out.add(f"{stem}.meta.json", cio.dumps(meta))


def _sweep_values(lo, hi, points):
    if points < 1 or lo < 0 or hi < lo:
        raise ParameterError("sweep needs points >= 1 and 0 <= min <= max", field="sweep")
    return [float(lo)] if points == 1 else np.linspace(lo, hi, int(points)).tolist()


def stability_rows(protocol, values):
    rows = []
    for w in values:
        m = model_at(protocol, w)
        for wp in solve_steady_state(m):
            M = drift_matrix(m, wp)
            stable, margin = is_stable(M)
            rep = mode_report(m, wp)
            rows.append([
                w, wp.branch_index, wp.photons, wp.delta_d, wp.G, stable, margin,
                math.nan if rep.numeric_splitting is None else rep.numeric_splitting / m.kappa,
                math.nan if rep.analytic_splitting is None else rep.analytic_splitting / m.kappa,
            ])
    return rows


def _table(out, stem, fmt, columns, rows, name=None):
    if fmt == "csv":
        return out.add(f"{stem}.csv", cio.table_csv(columns, rows))
    doc = cio.document("table", name=name or stem, columns=list(columns), rows=[list(r) for r in rows])
    cio.validate(doc)
    return out.add(f"{stem}.json", cio.dumps(doc))


def stability_task(out, protocol, sweep, fmt, stem="stability"):
    rows = stability_rows(protocol, _sweep_values(*sweep))
    _table(out, stem, fmt, STABILITY_COLUMNS, rows)


def curve_task(out, protocol, sweep, fmt, threads=1, policy="auto", stem="calibration_curve"):
    lo, hi, n = sweep
    curve = build_curve(protocol, (lo, hi), n, policy=policy, threads=threads)
    doc = cio.document("curve", **curve.to_json())
    cio.validate(doc)
    if fmt == "csv":
        out.add(f"{stem}.csv", curve.to_csv())
    out.add(f"{stem}.json", cio.dumps(doc))
    return curve


def steady_document(m, policy="auto"):
    with warnings.catch_warnings(record=True) as record:
        warnings.simplefilter("always")
        report = cubic_intensity_roots(m)
        points = classify_branches(m, solve_steady_state(m))
        try:
            chosen = select_branch(points, policy)
            selected, problem = chosen.branch_index, None
        except NumericError as exc:
            selected, problem = None, f"{type(exc).__name__}: {exc}"
    doc = cio.document(
        "steady",
        model=m.to_dict(),
        policy=policy,
        selected=selected,
        selection_error=problem,
        branches=[
            {
                "working_point": p.to_dict(),
                "mode_report": mode_report(m, p).to_dict(),
                "residuals": list(fixed_point_residuals(m, p)),
            }
            for p in points
        ],
        root_diagnostics={
            "discarded_complex": report.discarded_complex,
            "discarded_negative": report.discarded_negative,
            "merged": report.merged,
        },
        warnings=_caught(record),
    )
    cio.validate(doc)
    return doc


def steady_task(out, m, policy="auto", stem="steady"):
    out.add(f"{stem}.json", cio.dumps(steady_document(m, policy)))


def run_scenario(path, out_dir=".", fmt=None, threads=1):
    """Execute a scenario config; returns the list of written paths."""
    doc = load_json(path)
    protocol, m = parse_scenario(doc)
    task = doc.get("task", {"kind": "spectrum"})
    kind = task.get("kind", "spectrum")
    output = doc.get("output", {})
    fmt = fmt or output.get("format", "csv")
    stem = output.get("stem")
    policy = _policy(doc.get("branch_policy"))
    out = Outputs(out_dir)
    if kind == "spectrum":
        spectrum_task(
            out, protocol, m, task.get("spectrum", "phase_noise"), _grid(doc.get("grid")), fmt, stem,
            policy, task.get("phi"), task.get("route", "closed_form"), task.get("assembly"),
        )
    else:
        sw = doc.get("sweep", {"min": 0.0, "max": 120.0, "points": 121})
        sweep = (float(sw["min"]), float(sw["max"]), int(sw["points"]))
        if kind == "stability_sweep":
            stability_task(out, protocol, sweep, fmt, stem or "stability")
        elif kind == "calibration":
            curve_task(out, protocol, sweep, fmt, threads, policy, stem or "calibration_curve")
        else:
            steady_task(out, m, policy, stem or "steady")
    return out.commit()


# ---------------------------------------------------------------- figures

_PRESET_KINDS = {
    "PhaseNoise": "phase_noise",
    "Intensity": "intensity",
    "SqueezeOptimal": "squeezing_optimal",
}


def _near(grid_values, value):
    return float(grid_values[int(np.argmin(np.abs(grid_values - value)))])


def _curve_features(preset, curve, m, wp, series_list):
    """Expected and observed qualitative features of one figure curve."""
    expected, observed = {}, {}
    x = series_list[0].grid
    scale = preset.grid.scale(m)
    for s in series_list:
        peaks = x[local_maxima(s.values)]
        observed[f"{s.column_name}_maxima"] = peaks.tolist()
        if s.kind == "SqueezeOptimal":
            dips = x[local_minima(s.values)]
            observed["S_opt_minima"] = dips.tolist()
            at = m.omega_m / scale
            observed["S_opt_at_plus_minus_omega_m"] = [
                float(np.interp(-at, x, s.values)), float(np.interp(at, x, s.values))
            ]
            expected["S_opt_at_plus_minus_omega_m"] = "< 1"
            expected["S_opt_dip_locations"] = [-at, at]
        if s.kind == "PhaseNoise" and preset.name.startswith("fig2"):
            expected["S_P_peak_count"] = 4
            try:
                hi, lo = analytic_peaks(m, wp)
                expected["S_P_peak_locations"] = sorted([-hi / scale, -lo / scale, lo / scale, hi / scale])
            except NumericError as exc:
                expected["S_P_peak_locations"] = f"{type(exc).__name__}: {exc}"
        if s.kind == "Intensity" and preset.name.startswith("fig6"):
            pos = peaks[peaks > 0]
            observed["S_I_positive_peak"] = float(pos[np.argmax(np.interp(pos, x, s.values))]) if pos.size else None
            expected["S_I_positive_peak"] = "moves toward omega_m as omega_sw grows across fig6a-c"
    observed["omega_m_over_grid_unit"] = m.omega_m / scale
    observed["stable"] = wp.stable
    return expected, observed


def _spectrum_figure(out, preset, fmt):
    entries = []
    for curve in preset.curves:
        m = derive_model_params(curve.params)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            wp = select_branch(classify_branches(m, solve_steady_state(m)), "auto")
        series_list = [_series_for(_PRESET_KINDS[k], preset.grid, m, wp) for k in curve.spectra]
        stem = f"{preset.name}_{_slug(curve.label)}"
        if fmt == "csv":
            name = out.add(f"{stem}.csv", cio.series_csv(series_list))
        else:
            name = out.add(f"{stem}.json", cio.dumps(cio.series_json(series_list)))
        expected, observed = _curve_features(preset, curve, m, wp, series_list)
        entries.append({
            "label": curve.label,
            "file": name,
            "model": _model_block(m),
            "working_point": wp.to_dict(),
            "expected": expected,
            "observed": observed,
        })
    return entries


def _sweep_figure(out, preset, fmt, threads):
    curve = build_curve(preset.curves[0].params, preset.sweep[:2], preset.sweep[2], threads=threads)
    rows = []
    for s in curve.samples:
        m = model_at(curve.protocol, s.omega_sw)
        if preset.name == "fig4a":
            rows.append([s.omega_sw, m.delta_c / m.omega_m, s.delta_d / m.omega_m])
        else:
            rows.append([
                s.omega_sw, s.split_numeric / curve.kappa, s.split_analytic / curve.kappa,
                m.omega_m / curve.kappa, m.omega_m,
            ])
    name = _table(out, preset.name, fmt, preset.columns, rows)
    if preset.name == "fig4a":
        expected = {
            "delta_d_abs_trend": "decreasing",
            "omega_m_trend": "increasing",
            "delta_c_over_omega_m_limit": 1.0,
            "delta_d_over_omega_m_limit": -1.0,
        }
        d = np.abs([s.delta_d for s in curve.samples])
        observed = {"delta_d_abs_monotone_decreasing": bool(np.all(np.diff(d) < 0))}
    else:
        expected = {"analytic_vs_numeric_relative_gap_max": 0.1, "on_interval": [10.0, 120.0]}
        gaps = [abs(s.split_analytic - s.split_numeric) / s.split_numeric
                for s in curve.samples if s.omega_sw >= 10.0 and s.usable and math.isfinite(s.split_analytic)]
        observed = {"analytic_vs_numeric_relative_gap_max": max(gaps) if gaps else None}
    return [{"label": preset.curves[0].label, "file": name, "model": _model_block(model_at(curve.protocol, 0.0)),
             "expected": expected, "observed": observed}]


def run_figure(name, out_dir=".", fmt="csv", threads=1):
    preset = get_preset(name)
    out = Outputs(out_dir)
    if preset.sweep is not None:
        entries = _sweep_figure(out, preset, fmt, threads)
    else:
        entries = _spectrum_figure(out, preset, fmt)
    manifest = cio.document(
        "manifest",
        preset=preset.name,
        version=preset.version,
        description=preset.description,
        notes=list(preset.notes),
        grid=preset.grid.to_dict() if preset.grid else None,
        sweep=list(preset.sweep) if preset.sweep else None,
        curves=entries,
    )
    cio.validate(manifest)
    out.add(f"{preset.name}_manifest.json", cio.dumps(manifest))
    return out.commit()


# ---------------------------------------------------------------- calibrate

def calibrate(splitting, unit="kappa", curve_path=None, protocol_path=None, sweep=(0.0, 120.0, 121),
              threads=1, allow_ambiguous=False, save_curve=None):
    """Build or load a calibration curve and invert it; returns the estimate document."""
    if curve_path and protocol_path:
        raise ParameterError("give either --curve or --protocol, not both", field="curve")
    if not splitting > 0:
        raise ParameterError("splitting must be > 0", field="splitting")
    if curve_path:
        doc = load_json(curve_path)
        _schema_check(doc, "curve")
        curve = CalibrationCurve.from_json(doc)
    else:
        protocol = COLLISION_PROTOCOL
        if protocol_path:
            protocol, _ = parse_scenario(load_json(protocol_path))
        curve = build_curve(protocol, sweep[:2], sweep[2], threads=threads)
    est = estimate_omega_sw(curve, splitting, unit)
    if est.ambiguous and not allow_ambiguous:
        raise AmbiguousEstimate(
            f"splitting has {len(est.preimages)} preimages on the curve: {list(est.preimages)}",
            est.preimages,
        )
    doc = cio.document(
        "estimate",
        **est.to_dict(),
        input={"splitting": float(splitting), "unit": unit},
        curve_samples=len(curve.samples),
        monotone_interval=list(curve.omega_sw_interval) if curve.monotone_interval else None,
    )
    cio.validate(doc)
    if save_curve:
        out = Outputs(Path(save_curve).parent)
        out.add(Path(save_curve).name, cio.dumps(cio.document("curve", **curve.to_json())))
        out.commit()
    return doc


# ---------------------------------------------------------------- argparse

def _add_sweep_args(p):
    p.add_argument("--range", nargs=2, type=float, metavar=("MIN", "MAX"), default=(0.0, 120.0),
                   help="omega_sw range in omega_R (default 0 120)")
    p.add_argument("--samples", type=int, default=121, help="number of omega_sw samples (default 121)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cavitybec", description="Cavity-BEC noise spectra and calibration.")
    parser.add_argument("--config", help="scenario JSON file (physical or model block)")
    parser.add_argument("--out-dir", default=".", help="directory for output files (default: current)")
    parser.add_argument("--format", choices=("csv", "json"), default=None, help="data file format")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads for sweeps (default: ${THREADS_ENV} or 1)")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute a scenario config")
    p.add_argument("scenario", nargs="?", help="scenario file (defaults to --config)")

    p = sub.add_parser("spectrum", help="one spectrum for the configured parameters")
    p.add_argument("--kind", choices=SPECTRUM_KINDS, default="phase_noise")
    p.add_argument("--phi", type=float, help="homodyne phase for squeezing_phase")
    p.add_argument("--route", choices=("closed_form", "transfer_matrix"), default="closed_form")
    p.add_argument("--assembly", choices=("intracavity", "input_output"))
    p.add_argument("--grid", nargs=4, metavar=("MIN", "MAX", "POINTS", "UNIT"))
    p.add_argument("--omega-sw", type=float, help="override omega_sw (omega_R)")
    p.add_argument("--policy", default=None, help="branch policy or index (default auto)")
    p.add_argument("--stem", help="output file stem")

    p = sub.add_parser("figure", help="reproduce a figure preset")
    p.add_argument("name", help=f"one of {', '.join(PRESETS)}")

    p = sub.add_parser("calibrate", help="estimate omega_sw from a measured splitting")
    p.add_argument("--splitting", type=float, required=True)
    p.add_argument("--unit", choices=("kappa", "omega_R", "rad_s"), default="kappa")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--curve", help="saved calibration curve JSON")
    src.add_argument("--protocol", help="scenario file giving the protocol (default: collision study)")
    _add_sweep_args(p)
    p.add_argument("--allow-ambiguous", action="store_true", help="report ambiguous estimates instead of failing")
    p.add_argument("--save-curve", help="also write the curve JSON to this path")

    p = sub.add_parser("stability", help="branch stability sweep over omega_sw")
    _add_sweep_args(p)
    p.add_argument("--stem", default="stability")

    p = sub.add_parser("steady", help="steady-state branches with mode reports")
    p.add_argument("--omega-sw", type=float, help="override omega_sw (omega_R)")
    p.add_argument("--policy", default=None)
    p.add_argument("--stem", default="steady")
    return parser


def _configured(args):
    if args.config:
        return parse_scenario(load_json(args.config))
    return COLLISION_PROTOCOL, derive_model_params(COLLISION_PROTOCOL)


def _with_omega_sw(protocol, m, omega_sw):
    if omega_sw is None:
        return protocol, m
    if omega_sw < 0:
        raise ParameterError("omega_sw must be >= 0", field="omega_sw")
    if isinstance(protocol, PhysicalParams):
        protocol = protocol.with_swave(omega_sw)
        return protocol, derive_model_params(protocol)
    m = m.replace(omega_sw=omega_sw)
    return m, m


def dispatch(args):
    threads = _threads(args.threads)
    fmt = args.format
    if args.verb == "run":
        path = args.scenario or args.config
        if not path:
            raise ParameterError("run needs a scenario file", field="config")
        return [str(p) for p in run_scenario(path, args.out_dir, fmt, threads)], None
    if args.verb == "figure":
        return [str(p) for p in run_figure(args.name, args.out_dir, fmt or "csv", threads)], None
    if args.verb == "calibrate":
        doc = calibrate(args.splitting, args.unit, args.curve, args.protocol,
                        (args.range[0], args.range[1], args.samples), threads,
                        args.allow_ambiguous, args.save_curve)
        return [], doc
    protocol, m = _configured(args)
    out = Outputs(args.out_dir)
    fmt = fmt or "csv"
    if args.verb == "spectrum":
        protocol, m = _with_omega_sw(protocol, m, args.omega_sw)
        grid = Grid()
        if args.grid:
            lo, hi, n, unit = args.grid
            try:
                grid = Grid(float(lo), float(hi), int(n), unit)
            except ValueError:
                raise ParameterError("--grid needs MIN MAX POINTS UNIT", field="grid") from None
        spectrum_task(out, protocol, m, args.kind, grid, fmt, args.stem, _policy(args.policy),
                      args.phi, args.route, args.assembly)
    elif args.verb == "stability":
        stability_task(out, protocol, (args.range[0], args.range[1], args.samples), fmt, args.stem)
    else:
        protocol, m = _with_omega_sw(protocol, m, args.omega_sw)
        steady_task(out, m, _policy(args.policy), args.stem)
    return [str(p) for p in out.commit()], None


def error_record(exc):
    code = getattr(exc, "exit_code", 3)
    rec = {"error": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None),
           "exit_code": code}
    if isinstance(exc, AmbiguousEstimate):
        rec["details"] = {"preimages_over_omegaR": list(exc.preimages)}
    return cio.document("error", **rec)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            written, doc = dispatch(args)
    except CavityBECError as exc:
        sys.stderr.write(json.dumps(error_record(exc), sort_keys=True) + "\n")
        return exc.exit_code
    if doc is not None:
        sys.stdout.write(cio.dumps(doc))
    for path in written:
        sys.stdout.write(path + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
