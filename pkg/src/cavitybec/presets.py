"""Frozen parameter sets for the published figures.

Fig. 6 uses kappa = 74 omega_R (the caption's "74 omega_m" would put kappa
three orders of magnitude away from every other preset).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UnknownPreset
from .params import PhysicalParams, Quantity
from .spectra import Grid

PRESET_VERSION = "1"

LAB = dict(
    atom_count=100_000,
    cavity_length=187e-6,
    pump_wavelength=780e-9,
    cavity_frequency=2.41494e15,
    atomic_frequency=2.41419e15,
    vacuum_rabi=2 * math.pi * 14.1e6,
    mode_waist=25e-6,
)


def lab_params(kappa=24.0, omega_sw=0.0, eta=81.0, gamma_over_kappa=1e-3, **detuning) -> PhysicalParams:
    """Experimental setup with the given damping, drive and detuning.

    ``detuning`` is one of ``detuning_fraction=...``,
    ``stark_detuning=Quantity(...)`` or ``cavity_pump_detuning=Quantity(...)``;
    the default is Delta_c = 0.994 Delta_0.
    """
    if not detuning:
        detuning = {"detuning_fraction": 0.994}
    return PhysicalParams(
        **LAB,
        cavity_decay=Quantity(kappa, "omega_R"),
        bec_decay=Quantity(gamma_over_kappa, "kappa"),
        drive_amplitude=Quantity(eta, "omega_R"),
        swave_frequency=Quantity(omega_sw, "omega_R"),
        **detuning,
    )


#: protocol of the collision study (Delta_c = 0.994 Delta_0, kappa = 24 omega_R)
COLLISION_PROTOCOL = lab_params()


@dataclass(frozen=True)
class PresetCurve:
    label: str
    params: PhysicalParams
    spectra: tuple = ("PhaseNoise",)


@dataclass(frozen=True)
class FigurePreset:
    name: str
    description: str
    curves: tuple = ()
    grid: Grid = None
    sweep: tuple = None  # (min, max, points) in omega_R for omega_sw sweeps
    columns: tuple = ()
    notes: tuple = field(default=())
    version: str = PRESET_VERSION


def _fig2(name, kappa):
    curves = tuple(
        PresetCurve(
            f"delta_c={k}omega_m",
            lab_params(kappa=kappa, omega_sw=50.0, stark_detuning=Quantity(float(k), "omega_m")),
        )
        for k in (1, 2, 3)
    )
    return FigurePreset(
        name,
        f"phase noise spectrum vs omega/omega_m, kappa = {kappa:g} omega_R, omega_sw = 50 omega_R",
        curves,
        Grid.symmetric(6.0, 4001, "omega_m"),
    )


def _fig3(name, values):
    return FigurePreset(
        name,
        "phase noise spectrum vs omega/kappa at Delta_c = 0.994 Delta_0",
        tuple(PresetCurve(f"omega_sw={w:g}omega_R", lab_params(omega_sw=w)) for w in values),
        Grid.symmetric(15.0, 3001, "kappa"),
    )


def _fig6(name, omega_sw):
    return FigurePreset(
        name,
        f"intensity and optimal squeezing spectra vs omega/omega_m, omega_sw = {omega_sw:g} omega_R",
        (
            PresetCurve(
                f"omega_sw={omega_sw:g}omega_R",
                lab_params(kappa=74.0, omega_sw=omega_sw, stark_detuning=Quantity(1.0, "omega_m")),
                ("Intensity", "SqueezeOptimal"),
            ),
        ),
        Grid.symmetric(3.0, 3001, "omega_m"),
        notes=("kappa pinned to 74 omega_R; the caption's '74 omega_m' is read as a typo",),
    )


PRESETS = {
    "fig2a": _fig2("fig2a", 74.0),
    "fig2b": _fig2("fig2b", 24.0),
    "fig3a": _fig3("fig3a", (0.0, 1.0)),
    "fig3b": _fig3("fig3b", (30.0, 60.0)),
    "fig4a": FigurePreset(
        "fig4a",
        "delta_c/omega_m and Delta_d/omega_m vs omega_sw at Delta_c = 0.994 Delta_0",
        (PresetCurve("sweep", COLLISION_PROTOCOL, ()),),
        sweep=(0.0, 120.0, 121),
        columns=("omega_sw_over_omegaR", "delta_c_over_omega_m", "delta_d_over_omega_m"),
    ),
    "fig4b": FigurePreset(
        "fig4b",
        "numeric and analytic splitting and omega_m vs omega_sw at Delta_c = 0.994 Delta_0",
        (PresetCurve("sweep", COLLISION_PROTOCOL, ()),),
        sweep=(0.0, 120.0, 121),
        columns=(
            "omega_sw_over_omegaR",
            "dsplit_numeric_over_kappa",
            "dsplit_analytic_over_kappa",
            "omega_m_over_kappa",
            "omega_m_over_omegaR",
        ),
    ),
    "fig5": FigurePreset(
        "fig5",
        "intensity spectrum vs omega/kappa at Delta_c = 0.994 Delta_0",
        tuple(
            PresetCurve(f"omega_sw={w:g}omega_R", lab_params(omega_sw=w), ("Intensity",))
            for w in (30.0, 60.0, 120.0)
        ),
        Grid.symmetric(10.0, 2001, "kappa"),
    ),
    "fig6a": _fig6("fig6a", 40.0),
    "fig6b": _fig6("fig6b", 50.0),
    "fig6c": _fig6("fig6c", 80.0),
}


def get_preset(name) -> FigurePreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown figure preset {name!r}; available: {sorted(PRESETS)}") from None
