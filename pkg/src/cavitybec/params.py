"""Laboratory parameters and the dimensionless model derived from them.

Everything downstream works in recoil units (omega_R = 1).  SI values only
appear in :class:`PhysicalParams` and in the conversion helpers here.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

from scipy import constants

from .errors import ParameterError

HBAR = constants.hbar
RB87_MASS = 86.909180527 * constants.atomic_mass

FREQUENCY_UNITS = ("rad_s", "omega_R", "kappa", "omega_m")
DETUNING_KINDS = ("Delta_c", "delta_c", "Delta_c_over_Delta_0")
SWAVE_KINDS = ("omega_sw", "scattering_length")


@dataclass(frozen=True)
class Quantity:
    """A frequency value with an explicit unit tag."""

    value: float
    unit: str = "omega_R"

    def __post_init__(self):
        if self.unit not in FREQUENCY_UNITS:
            raise ParameterError(
                f"unknown frequency unit {self.unit!r}; expected one of {FREQUENCY_UNITS}"
            )
        if not math.isfinite(self.value):
            raise ParameterError(f"non-finite frequency value {self.value!r}")

    @classmethod
    def parse(cls, obj, field):
        if not isinstance(obj, dict) or "value" not in obj or "unit" not in obj:
            raise ParameterError(
                f"{field}: expected an object {{'value': ..., 'unit': ...}}", field=field
            )
        try:
            return cls(float(obj["value"]), str(obj["unit"]))
        except ParameterError as exc:
            raise ParameterError(f"{field}: {exc}", field=field) from None
        except (TypeError, ValueError):
            raise ParameterError(f"{field}: value must be a number", field=field) from None

    def to_config(self):
        return {"value": self.value, "unit": self.unit}


def recoil_frequency(wavelength, mass):
    """Recoil frequency hbar k^2 / (2 m) in rad/s for wavenumber k = 2 pi / wavelength."""
    k = 2.0 * math.pi / wavelength
    return HBAR * k * k / (2.0 * mass)


def swave_frequency_from_length(scattering_length, atom_count, mass, cavity_length, waist):
    """s-wave scattering frequency 8 pi hbar a_s N / (m_a L w^2), in rad/s."""
    return 8.0 * math.pi * HBAR * scattering_length * atom_count / (
        mass * cavity_length * waist**2
    )


def mechanical_frequency(omega_sw, omega_R=1.0):
    """Oscillation frequency of the Bogoliubov mode.

    ``sqrt((4 omega_R + omega_sw/2) (4 omega_R + 3 omega_sw/2))``, in the same
    unit as the inputs.
    """
    if omega_sw < 0:
        raise ParameterError("omega_sw must be >= 0", field="omega_sw")
    return math.sqrt((4.0 * omega_R + 0.5 * omega_sw) * (4.0 * omega_R + 1.5 * omega_sw))


@dataclass(frozen=True)
class ModelParams:
    """Model frequencies in recoil units.

    Stored fields are the independent parameters; the Bogoliubov-mode
    frequencies, ``zeta`` and the Stark shift are derived on access so the
    identities between them hold by construction.
    """

    atom_count: float
    U0: float
    delta_c: float
    omega_sw: float
    kappa: float
    gamma: float
    eta: float
    recoil_rad_s: float = 1.0

    def __post_init__(self):
        checks = (
            ("atom_count", self.atom_count >= 1),
            ("U0", self.U0 > 0),
            ("omega_sw", self.omega_sw >= 0),
            ("kappa", self.kappa > 0),
            ("gamma", self.gamma > 0),
            ("eta", self.eta >= 0),
            ("recoil_rad_s", self.recoil_rad_s > 0),
        )
        for name, ok in checks:
            value = getattr(self, name)
            if not (ok and math.isfinite(value)):
                raise ParameterError(f"{name} has invalid value {value!r}", field=name)
        if not math.isfinite(self.delta_c):
            raise ParameterError("delta_c must be finite", field="delta_c")

    @property
    def stark_shift(self):
        """Delta_0 = N U0 / 2."""
        return 0.5 * self.atom_count * self.U0

    @property
    def zeta(self):
        return 0.5 * math.sqrt(self.atom_count) * self.U0

    @property
    def Omega_c(self):
        return 4.0 + self.omega_sw

    @property
    def Omega_plus(self):
        return self.Omega_c + 0.5 * self.omega_sw

    @property
    def Omega_minus(self):
        return self.Omega_c - 0.5 * self.omega_sw

    @property
    def omega_m(self):
        return math.sqrt(self.Omega_plus * self.Omega_minus)

    @property
    def cavity_pump_detuning(self):
        """Delta_c recovered from delta_c = -Delta_c + Delta_0."""
        return self.stark_shift - self.delta_c

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.update(
            stark_shift=self.stark_shift,
            zeta=self.zeta,
            Omega_c=self.Omega_c,
            Omega_plus=self.Omega_plus,
            Omega_minus=self.Omega_minus,
            omega_m=self.omega_m,
        )
        return d

    @classmethod
    def from_dict(cls, d):
        names = [f.name for f in dataclasses.fields(cls)]
        missing = [n for n in names if n not in d and n != "recoil_rad_s"]
        if missing:
            raise ParameterError(f"model block missing {missing}", field=missing[0])
        kwargs = {}
        for n in names:
            if n in d:
                try:
                    kwargs[n] = float(d[n])
                except (TypeError, ValueError):
                    raise ParameterError(f"{n} must be a number", field=n) from None
        return cls(**kwargs)

    def fingerprint(self):
        """Short stable hash of the independent parameters."""
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def in_rad_s(self):
        """Frequency parameters converted to rad/s (U0 included)."""
        w = self.recoil_rad_s
        return {
            "atom_count": self.atom_count,
            "U0": self.U0 * w,
            "delta_c": self.delta_c * w,
            "omega_sw": self.omega_sw * w,
            "kappa": self.kappa * w,
            "gamma": self.gamma * w,
            "eta": self.eta * w,
            "recoil_rad_s": w,
        }

    @classmethod
    def from_rad_s(cls, values):
        w = values["recoil_rad_s"]
        scaled = {k: (v if k in ("atom_count", "recoil_rad_s") else v / w) for k, v in values.items()}
        return cls(**scaled)


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory inputs.

    Lengths in metres, mass in kg, lab frequencies (cavity, atomic, vacuum
    Rabi) in rad/s.  Damping, drive, detuning and the s-wave frequency carry
    unit tags.  Exactly one of the three detuning fields and exactly one of
    ``swave_frequency`` / ``scattering_length`` must be set.
    """

    atom_count: int
    cavity_length: float
    pump_wavelength: float
    cavity_frequency: float
    atomic_frequency: float
    vacuum_rabi: float
    mode_waist: float
    cavity_decay: Quantity
    bec_decay: Quantity
    drive_amplitude: Quantity
    atom_mass: float = RB87_MASS
    cavity_pump_detuning: Optional[Quantity] = None
    stark_detuning: Optional[Quantity] = None
    detuning_fraction: Optional[float] = None
    swave_frequency: Optional[Quantity] = None
    scattering_length: Optional[float] = None

    def __post_init__(self):
        if not (isinstance(self.atom_count, (int, float)) and self.atom_count >= 1):
            raise ParameterError("atom_count must be >= 1", field="atom_count")
        for name in ("cavity_length", "pump_wavelength", "mode_waist", "atom_mass"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be > 0", field=name)
        if not self.cavity_frequency > self.atomic_frequency:
            raise ParameterError(
                "cavity_frequency must exceed atomic_frequency (dispersive regime, Delta_a > 0)",
                field="atomic_frequency",
            )
        if not self.vacuum_rabi > 0:
            raise ParameterError("vacuum_rabi must be > 0", field="vacuum_rabi")
        for name, strict in (("cavity_decay", True), ("bec_decay", True), ("drive_amplitude", False)):
            q = getattr(self, name)
            if not isinstance(q, Quantity):
                raise ParameterError(f"{name} must be a Quantity", field=name)
            if q.value < 0 or (strict and q.value == 0):
                raise ParameterError(f"{name} must be {'>' if strict else '>='} 0", field=name)
        if self.cavity_decay.unit == "kappa":
            raise ParameterError("cavity_decay cannot be given in units of kappa", field="cavity_decay")
        detunings = [self.cavity_pump_detuning, self.stark_detuning, self.detuning_fraction]
        if sum(d is not None for d in detunings) != 1:
            raise ParameterError("exactly one detuning specification must be set", field="detuning")
        swaves = [self.swave_frequency, self.scattering_length]
        if sum(s is not None for s in swaves) != 1:
            raise ParameterError("exactly one s-wave specification must be set", field="swave")
        if self.swave_frequency is not None:
            if self.swave_frequency.unit not in ("rad_s", "omega_R"):
                raise ParameterError("swave_frequency unit must be rad_s or omega_R", field="swave")
            if self.swave_frequency.value < 0:
                raise ParameterError("omega_sw must be >= 0", field="swave")
        if self.scattering_length is not None and self.scattering_length < 0:
            raise ParameterError("scattering_length must be >= 0", field="swave")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_swave(self, omega_sw, unit="omega_R"):
        """Copy with the s-wave frequency set directly."""
        return dataclasses.replace(
            self, swave_frequency=Quantity(omega_sw, unit), scattering_length=None
        )

    @property
    def recoil_rad_s(self):
        return recoil_frequency(self.pump_wavelength, self.atom_mass)

    # -- config (de)serialisation -------------------------------------------

    def to_config(self):
        d = {
            "atom_count": self.atom_count,
            "cavity_length": self.cavity_length,
            "pump_wavelength": self.pump_wavelength,
            "cavity_frequency": {"value": self.cavity_frequency, "unit": "rad_s"},
            "atomic_frequency": {"value": self.atomic_frequency, "unit": "rad_s"},
            "vacuum_rabi": {"value": self.vacuum_rabi, "unit": "rad_s"},
            "mode_waist": self.mode_waist,
            "atom_mass": self.atom_mass,
            "cavity_decay": self.cavity_decay.to_config(),
            "bec_decay": self.bec_decay.to_config(),
            "drive_amplitude": self.drive_amplitude.to_config(),
        }
        if self.detuning_fraction is not None:
            d["detuning"] = {"kind": "Delta_c_over_Delta_0", "value": self.detuning_fraction}
        elif self.cavity_pump_detuning is not None:
            d["detuning"] = {"kind": "Delta_c", **self.cavity_pump_detuning.to_config()}
        else:
            d["detuning"] = {"kind": "delta_c", **self.stark_detuning.to_config()}
        if self.swave_frequency is not None:
            d["swave"] = {"kind": "omega_sw", **self.swave_frequency.to_config()}
        else:
            d["swave"] = {"kind": "scattering_length", "value": self.scattering_length}
        return d

    @classmethod
    def from_config(cls, d):
        """Build from a JSON-style dict (see README for the key layout)."""
        if not isinstance(d, dict):
            raise ParameterError("physical block must be an object", field="physical")
        required = (
            "atom_count", "cavity_length", "pump_wavelength", "cavity_frequency",
            "atomic_frequency", "vacuum_rabi", "mode_waist", "cavity_decay",
            "bec_decay", "drive_amplitude", "detuning", "swave",
        )
        for key in required:
            if key not in d:
                raise ParameterError(f"missing required field {key!r}", field=key)

        def number(key):
            try:
                return float(d[key])
            except (TypeError, ValueError):
                raise ParameterError(f"{key} must be a number", field=key) from None

        lengths = {k: number(k) for k in ("cavity_length", "pump_wavelength", "mode_waist")}
        mass = number("atom_mass") if "atom_mass" in d else RB87_MASS
        if not (lengths["pump_wavelength"] > 0 and mass > 0):
            raise ParameterError("pump_wavelength and atom_mass must be > 0", field="pump_wavelength")
        w_R = recoil_frequency(lengths["pump_wavelength"], mass)

        def lab_frequency(key):
            q = Quantity.parse(d[key], key)
            if q.unit == "rad_s":
                return q.value
            if q.unit == "omega_R":
                return q.value * w_R
            raise ParameterError(f"{key}: unit must be rad_s or omega_R", field=key)

        det = d["detuning"]
        if not isinstance(det, dict) or det.get("kind") not in DETUNING_KINDS:
            raise ParameterError(f"detuning.kind must be one of {DETUNING_KINDS}", field="detuning")
        det_kwargs = {}
        if det["kind"] == "Delta_c_over_Delta_0":
            try:
                det_kwargs["detuning_fraction"] = float(det["value"])
            except (KeyError, TypeError, ValueError):
                raise ParameterError("detuning.value must be a number", field="detuning") from None
        else:
            q = Quantity.parse(det, "detuning")
            key = "cavity_pump_detuning" if det["kind"] == "Delta_c" else "stark_detuning"
            det_kwargs[key] = q

        sw = d["swave"]
        if not isinstance(sw, dict) or sw.get("kind") not in SWAVE_KINDS:
            raise ParameterError(f"swave.kind must be one of {SWAVE_KINDS}", field="swave")
        if sw["kind"] == "omega_sw":
            sw_kwargs = {"swave_frequency": Quantity.parse(sw, "swave")}
        else:
            try:
                sw_kwargs = {"scattering_length": float(sw["value"])}
            except (KeyError, TypeError, ValueError):
                raise ParameterError("swave.value must be a number", field="swave") from None

        count = d["atom_count"]
        if not isinstance(count, (int, float)) or isinstance(count, bool):
            raise ParameterError("atom_count must be a number", field="atom_count")

        return cls(
            atom_count=count,
            cavity_length=lengths["cavity_length"],
            pump_wavelength=lengths["pump_wavelength"],
            cavity_frequency=lab_frequency("cavity_frequency"),
            atomic_frequency=lab_frequency("atomic_frequency"),
            vacuum_rabi=lab_frequency("vacuum_rabi"),
            mode_waist=lengths["mode_waist"],
            atom_mass=mass,
            cavity_decay=Quantity.parse(d["cavity_decay"], "cavity_decay"),
            bec_decay=Quantity.parse(d["bec_decay"], "bec_decay"),
            drive_amplitude=Quantity.parse(d["drive_amplitude"], "drive_amplitude"),
            **det_kwargs,
            **sw_kwargs,
        )


def _in_recoil(q, field, w_R, refs):
    if q.unit == "rad_s":
        return q.value / w_R
    if q.unit == "omega_R":
        return q.value
    if q.unit not in refs:
        raise ParameterError(f"{field}: unit {q.unit!r} not allowed here", field=field)
    return q.value * refs[q.unit]


def derive_model_params(p: PhysicalParams) -> ModelParams:
    """Convert laboratory inputs to recoil-unit model parameters.

    The atomic detuning is evaluated at the cavity frequency,
    ``Delta_a = omega_c - omega_a``, so that ``U0`` does not depend on the
    pump detuning being resolved.
    """
    w_R = p.recoil_rad_s
    detuning_a = p.cavity_frequency - p.atomic_frequency
    if detuning_a <= 0:
        raise ParameterError("non-dispersive: omega_c - omega_a must be > 0", field="atomic_frequency")
    U0 = p.vacuum_rabi**2 / detuning_a / w_R

    if p.swave_frequency is not None:
        omega_sw = _in_recoil(p.swave_frequency, "swave", w_R, {})
    else:
        omega_sw = swave_frequency_from_length(
            p.scattering_length, p.atom_count, p.atom_mass, p.cavity_length, p.mode_waist
        ) / w_R
    if omega_sw < 0:
        raise ParameterError("omega_sw must be >= 0", field="swave")

    refs = {"omega_m": mechanical_frequency(omega_sw)}
    kappa = _in_recoil(p.cavity_decay, "cavity_decay", w_R, refs)
    refs["kappa"] = kappa
    gamma = _in_recoil(p.bec_decay, "bec_decay", w_R, refs)
    eta = _in_recoil(p.drive_amplitude, "drive_amplitude", w_R, refs)

    stark_shift = 0.5 * p.atom_count * U0
    if p.detuning_fraction is not None:
        delta_c = stark_shift - p.detuning_fraction * stark_shift
    elif p.cavity_pump_detuning is not None:
        delta_c = stark_shift - _in_recoil(p.cavity_pump_detuning, "detuning", w_R, refs)
    else:
        delta_c = _in_recoil(p.stark_detuning, "detuning", w_R, refs)

    return ModelParams(
        atom_count=float(p.atom_count),
        U0=U0,
        delta_c=delta_c,
        omega_sw=omega_sw,
        kappa=kappa,
        gamma=gamma,
        eta=eta,
        recoil_rad_s=w_R,
    )


def physical_with_rad_s(p: PhysicalParams, m: ModelParams) -> PhysicalParams:
    """Re-express every tagged frequency of ``p`` in rad/s using the values in ``m``."""
    w = m.recoil_rad_s
    return dataclasses.replace(
        p,
        cavity_decay=Quantity(m.kappa * w, "rad_s"),
        bec_decay=Quantity(m.gamma * w, "rad_s"),
        drive_amplitude=Quantity(m.eta * w, "rad_s"),
        cavity_pump_detuning=None,
        detuning_fraction=None,
        stark_detuning=Quantity(m.delta_c * w, "rad_s"),
        swave_frequency=Quantity(m.omega_sw * w, "rad_s"),
        scattering_length=None,
    )
