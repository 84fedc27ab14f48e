"""Output-field spectra of the cavity: phase noise, intensity and squeezing.

Fourier convention: ``F(t) = (1/2 pi) int F(omega) exp(+i omega t) d omega``,
so ``d/dt -> +i omega``.  All spectra are densities with the
``2 pi delta(omega + omega')`` factors removed.

Two independent routes are provided.  The closed-form route evaluates the
coefficient expressions (``chi``, ``f_i``, ``g_i``) directly; the
transfer-matrix route inverts ``(i omega - M)`` numerically and assembles the
same correlators from the input-noise correlation matrix.

Output assembly
---------------
``"intracavity"`` adds the vacuum level to ``2 kappa`` times the intracavity
correlator and drops input/system cross terms.  ``"input_output"`` uses the
full relation ``a_out = sqrt(2 kappa) a - a_in``.  The phase-noise spectrum
defaults to the former, the squeezing spectra to the latter (only the full
relation gives the vacuum level 1 for a decoupled cavity and allows
sub-vacuum dips).  The intensity spectrum is identical under both.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    NumericError,
    ParameterError,
    PoleOnGrid,
    SingularResolvent,
    StabilityWarning,
    ZeroCaaWarning,
)
from .lindyn import DriftMatrix, drift_matrix
from .params import ModelParams
from .steady import WorkingPoint

GRID_UNITS = ("omega_R", "kappa", "omega_m")
KINDS = ("PhaseNoise", "Intensity", "SqueezeFixedPhase", "SqueezeOptimal", "OptimalPhase")
ROUTES = ("closed_form", "transfer_matrix")
ASSEMBLIES = ("intracavity", "input_output")
ZERO_CAA = 1e-14

# operator order used by the transfer-matrix route
XA, PA, XC, PC, XA_IN, PA_IN, XC_IN, PC_IN = range(8)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class NoiseModel:
    """Thermal occupations of the optical and Bogoliubov input noise."""

    n_ph: float = 0.0
    n_c: float = 0.0

    def __post_init__(self):
        if self.n_ph < 0 or self.n_c < 0:
            raise ParameterError("thermal occupations must be >= 0", field="noise")

    def quadrature_correlations(self):
        """<xi_j(w) xi_k(w')> / (2 pi delta(w + w')) over (X_a, P_a, X_c, P_c) inputs."""
        Q = np.zeros((4, 4), dtype=complex)
        for i, n in ((0, self.n_ph), (2, self.n_c)):
            Q[i : i + 2, i : i + 2] = [[n + 0.5, 0.5j], [-0.5j, n + 0.5]]
        return Q

    def ladder_correlations(self):
        """Same, over (a_in, a_in^dag, X_c_in, P_c_in)."""
        K = np.zeros((4, 4), dtype=complex)
        K[0, 1] = self.n_ph + 1.0
        K[1, 0] = self.n_ph
        K[2:, 2:] = [[self.n_c + 0.5, 0.5j], [-0.5j, self.n_c + 0.5]]
        return K

    @property
    def is_vacuum(self):
        return self.n_ph == 0 and self.n_c == 0


VACUUM = NoiseModel()


@dataclass(frozen=True)
class Grid:
    """Frequency grid in a display unit (``omega_R``, ``kappa`` or ``omega_m``)."""

    start: float = -6.0
    stop: float = 6.0
    points: int = 4001
    unit: str = "omega_m"

    def __post_init__(self):
        if self.unit not in GRID_UNITS:
            raise ParameterError(f"grid unit must be one of {GRID_UNITS}", field="grid.unit")
        if int(self.points) != self.points or self.points < 3:
            raise ParameterError("grid needs at least 3 points", field="grid.points")
        if not self.stop > self.start:
            raise ParameterError("grid max must exceed grid min", field="grid.max")
        if self.is_symmetric and self.points % 2 == 0:
            raise ParameterError("symmetric grids need an odd point count", field="grid.points")

    @classmethod
    def symmetric(cls, half_width=6.0, points=4001, unit="omega_m"):
        return cls(-half_width, half_width, points, unit)

    @property
    def is_symmetric(self):
        return self.start == -self.stop

    @property
    def values(self):
        v = np.linspace(self.start, self.stop, int(self.points))
        if self.is_symmetric:
            v = 0.5 * (v - v[::-1])  # exact mirror symmetry, exact zero
        return v

    @property
    def step(self):
        return (self.stop - self.start) / (self.points - 1)

    def scale(self, m: ModelParams):
        return {"omega_R": 1.0, "kappa": m.kappa, "omega_m": m.omega_m}[self.unit]

    def omega(self, m: ModelParams):
        """Grid frequencies in recoil units."""
        return self.values * self.scale(m)

    def to_dict(self):
        return {"min": self.start, "max": self.stop, "points": int(self.points), "unit": self.unit}


@dataclass
class SpectrumSeries:
    kind: str
    grid: np.ndarray
    unit: str
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown spectrum kind {self.kind!r}", field="kind")
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in shape")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise NumericError(f"{self.kind}: non-finite spectrum values")

    @property
    def column_name(self):
        return {
            "PhaseNoise": "S_P",
            "Intensity": "S_I",
            "SqueezeFixedPhase": "S_phi",
            "SqueezeOptimal": "S_opt",
            "OptimalPhase": "phi_opt",
        }[self.kind]

    @property
    def grid_name(self):
        return f"omega_over_{self.unit}"


def _as_grid(grid, m):
    if isinstance(grid, Grid):
        return grid.values, grid.omega(m), grid.unit
    w = np.asarray(grid, dtype=float)
    return w, w, "omega_R"


def _check(wp, noise):
    noise = VACUUM if noise is None else noise
    if not noise.is_vacuum:
        raise ParameterError(
            "output spectra assume zero thermal occupation (n_ph = n_c = 0)", field="noise"
        )
    if wp.stable is False:
        warnings.warn("spectrum evaluated at an unstable working point", StabilityWarning, stacklevel=3)
    return noise


def _check_choice(value, allowed, name):
    if value not in allowed:
        raise ParameterError(f"{name} must be one of {allowed}", field=name)


# ---------------------------------------------------------------------------
# closed-form route
# ---------------------------------------------------------------------------


def inverse_susceptibility(omega, m: ModelParams, wp: WorkingPoint):
    w = np.asarray(omega, dtype=float)
    k, g, D, G = m.kappa, m.gamma, wp.delta_d, wp.G
    return (g + 1j * w) ** 2 + m.omega_m**2 + G * G * D * m.Omega_minus / (D * D + (k + 1j * w) ** 2)


def susceptibility(omega, m: ModelParams, wp: WorkingPoint):
    """Effective mechanical susceptibility chi(omega)."""
    inv = inverse_susceptibility(omega, m, wp)
    if np.any(np.abs(inv) < 1e-12):
        raise PoleOnGrid("|1/chi| < 1e-12 on the grid (undamped resonance)")
    return 1.0 / inv


def _optical_denominator(w, m, wp):
    den = wp.delta_d**2 + (m.kappa + 1j * w) ** 2
    assert np.all(den != 0), "Delta_d^2 + (kappa + i omega)^2 vanished"
    return den


def coeffs_f(omega, m: ModelParams, wp: WorkingPoint):
    """Coefficients (f1, f2, f3, f4) of the input quadratures in P_a = chi * sum f_i xi_i."""
    w = np.asarray(omega, dtype=float)
    k, g, D, G, Om = m.kappa, m.gamma, wp.delta_d, wp.G, m.Omega_minus
    den = _optical_denominator(w, m, wp)
    mech = (g + 1j * w) ** 2 + m.omega_m**2
    sk, sg = math.sqrt(2 * k), math.sqrt(2 * g)
    f1 = sk * (D * mech + G * G * Om) / den
    f2 = sk * (k + 1j * w) * mech / den
    f3 = -G * sg * (g + 1j * w) * (k + 1j * w) / den
    f4 = -G * sg * Om * (k + 1j * w) / den
    return f1, f2, f3, f4


def coeffs_g(omega, m: ModelParams, wp: WorkingPoint):
    """Coefficients (g1, g2, g3, g4) in a = chi (g1 a_in + g2 a_in^dag + g3 X_c_in + g4 P_c_in).

    ``g2`` carries the product of the two optical resonance denominators
    ``[kappa + i(omega - Delta_d)][kappa + i(omega + Delta_d)]``.
    """
    w = np.asarray(omega, dtype=float)
    k, g, D, G, Om = m.kappa, m.gamma, wp.delta_d, wp.G, m.Omega_minus
    q_minus = k + 1j * (w - D)
    q_plus = k + 1j * (w + D)
    g1 = math.sqrt(2 * k) / q_minus * (
        inverse_susceptibility(w, m, wp) + 1j * Om * G * G / 2.0 / q_minus
    )
    g2 = 1j * G * G * math.sqrt(k) * Om / (_SQRT2 * q_minus * q_plus)
    g3 = -1j * G * math.sqrt(g) * (g + 1j * w) / q_minus
    g4 = -1j * G * math.sqrt(g) * Om / q_minus
    return g1, g2, g3, g4


def _sym(x_w, x_mw, y_w, y_mw, C):
    """Symmetrised correlator 1/2 [x(w) C y(-w) + x(-w) C y(w)], batched over rows."""
    return 0.5 * (
        np.einsum("ni,ij,nj->n", x_w, C, y_mw) + np.einsum("ni,ij,nj->n", x_mw, C, y_w)
    )


def _ladder_rows(w, m, wp):
    """Rows of a(w) and a^dag(w) over (a_in, a_in^dag, X_c_in, P_c_in)."""

    def a_row(x):
        chi = susceptibility(x, m, wp)
        return np.stack([chi * gi for gi in coeffs_g(x, m, wp)], axis=-1)

    a_w, a_mw = a_row(w), a_row(-w)
    swap = [1, 0, 2, 3]
    ad_w = np.conj(a_mw)[:, swap]
    ad_mw = np.conj(a_w)[:, swap]
    return a_w, a_mw, ad_w, ad_mw


def _closed_ladder_correlators(w, m, wp, noise, output):
    a_w, a_mw, ad_w, ad_mw = _ladder_rows(w, m, wp)
    K = noise.ladder_correlations()
    if output:
        s = math.sqrt(2 * m.kappa)
        e_a = np.array([1.0, 0, 0, 0])
        e_ad = np.array([0, 1.0, 0, 0])
        a_w, a_mw = s * a_w - e_a, s * a_mw - e_a
        ad_w, ad_mw = s * ad_w - e_ad, s * ad_mw - e_ad
    return {
        "aa": _sym(a_w, a_mw, a_w, a_mw, K),
        "adad": _sym(ad_w, ad_mw, ad_w, ad_mw, K),
        "aad": _sym(a_w, a_mw, ad_w, ad_mw, K),
        "ada": _sym(ad_w, ad_mw, a_w, a_mw, K),
    }


# ---------------------------------------------------------------------------
# transfer-matrix route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Correlators:
    """Symmetrised spectral correlation matrix of system and input quadratures.

    ``matrix[n, i, j]`` is ``C_ij(omega_n)`` for operators ordered
    (X_a, P_a, X_c, P_c, X_a_in, P_a_in, X_c_in, P_c_in).
    """

    omega: np.ndarray
    matrix: np.ndarray

    def pair(self, x, y):
        """C_xy for operators given as coefficient vectors over the 8 quadratures."""
        return np.einsum("i,nij,j->n", np.asarray(x), self.matrix, np.asarray(y))

    def block(self, i, j):
        return self.matrix[:, i, j]


def _transfer(omega, M: DriftMatrix):
    A = M.matrix
    w = np.asarray(omega, dtype=float)
    R = 1j * w[:, None, None] * np.eye(4) - A
    try:
        H = np.linalg.solve(R, np.broadcast_to(np.diag(M.noise_gains).astype(complex), R.shape))
    except np.linalg.LinAlgError:
        raise SingularResolvent("i omega - M is singular on the grid") from None
    if not np.all(np.isfinite(H)) or np.max(np.linalg.cond(R)) > 1e14:
        raise SingularResolvent("i omega - M is numerically singular on the grid")
    eye = np.broadcast_to(np.eye(4, dtype=complex), H.shape)
    return np.concatenate([H, eye], axis=1)


def transfer_matrix_correlators(omega, M: DriftMatrix, noise: Optional[NoiseModel] = None) -> Correlators:
    """Intracavity and input correlators from ``u(w) = (i w - M)^-1 n(w)``."""
    noise = VACUUM if noise is None else noise
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    T_w = _transfer(w, M)
    T_mw = _transfer(-w, M)
    Q = noise.quadrature_correlations()
    C = 0.5 * (
        np.einsum("nik,kl,njl->nij", T_w, Q, T_mw) + np.einsum("nik,kl,njl->nij", T_mw, Q, T_w)
    )
    return Correlators(w, C)


def _unit(i, coeff=1.0):
    v = np.zeros(8, dtype=complex)
    v[i] = coeff
    return v


def _a(kappa=None):
    """Coefficient vectors of a, a^dag (intracavity) or of a_out, a_out^dag when kappa is given."""
    a = (_unit(XA) + _unit(PA, 1j)) / _SQRT2
    ad = (_unit(XA) + _unit(PA, -1j)) / _SQRT2
    if kappa is None:
        return a, ad
    a_in = (_unit(XA_IN) + _unit(PA_IN, 1j)) / _SQRT2
    ad_in = (_unit(XA_IN) + _unit(PA_IN, -1j)) / _SQRT2
    s = math.sqrt(2 * kappa)
    return s * a - a_in, s * ad - ad_in


def _tm_ladder_correlators(corr, kappa, output):
    a, ad = _a(kappa if output else None)
    return {
        "aa": corr.pair(a, a),
        "adad": corr.pair(ad, ad),
        "aad": corr.pair(a, ad),
        "ada": corr.pair(ad, a),
    }


def _split_ladder_rows(r):
    """Annihilator and creator coefficients of rows over (a_in, a_in^dag, X_c_in, P_c_in)."""
    c = (r[:, 2] - 1j * r[:, 3]) / _SQRT2
    cd = (r[:, 2] + 1j * r[:, 3]) / _SQRT2
    return np.stack([r[:, 0], c], axis=-1), np.stack([r[:, 1], cd], axis=-1)


def _split_quadrature_rows(r):
    """Annihilator and creator coefficients of rows over (X_a_in, P_a_in, X_c_in, P_c_in)."""
    return (r[:, 0::2] - 1j * r[:, 1::2]) / _SQRT2, (r[:, 0::2] + 1j * r[:, 1::2]) / _SQRT2


def _vacuum_optimum(rows_w, rows_mw):
    """min over phi of S_phi = C_aad + C_ada - 2|C_aa| for vacuum inputs.

    With u = (p(w), p(-w)) and t = conj(q(-w), q(w)) built from the
    annihilator/creator coefficients, the minimum is
    (|u| - |t|)^2 / 2 + |u||t| - |<t, u>|.  The second term is evaluated
    through the Lagrange identity as a sum of squares, so deep squeezing does
    not come out of a difference of large numbers.
    """
    (p, q), (p2, q2) = rows_w, rows_mw
    u = np.concatenate([p, p2], axis=1)
    t = np.conj(np.concatenate([q2, q], axis=1))
    nu2 = np.sum(np.abs(u) ** 2, axis=1)
    nt2 = np.sum(np.abs(t) ** 2, axis=1)
    nu, nt = np.sqrt(nu2), np.sqrt(nt2)
    inner = np.abs(np.sum(np.conj(t) * u, axis=1))
    i, k = np.triu_indices(u.shape[1], 1)
    gram = np.sum(np.abs(u[:, i] * t[:, k] - u[:, k] * t[:, i]) ** 2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        first = np.where(nu + nt > 0, 0.5 * ((nu2 - nt2) / (nu + nt)) ** 2, 0.0)
        second = np.where(nu * nt + inner > 0, gram / (nu * nt + inner), 0.0)
    return first + second


def _optimal_squeezing(w, m, wp, route, output):
    if route == "closed_form":
        a_w, a_mw, _, _ = _ladder_rows(w, m, wp)
        if output:
            s = math.sqrt(2 * m.kappa)
            e_a = np.array([1.0, 0, 0, 0])
            a_w, a_mw = s * a_w - e_a, s * a_mw - e_a
        return _vacuum_optimum(_split_ladder_rows(a_w), _split_ladder_rows(a_mw))
    M = drift_matrix(m, wp)
    a, _ = _a(m.kappa if output else None)
    rows = [np.einsum("i,nij->nj", a, _transfer(x, M)) for x in (w, -w)]
    return _vacuum_optimum(*(_split_quadrature_rows(r) for r in rows))


# ---------------------------------------------------------------------------
# public spectra
# ---------------------------------------------------------------------------


def _meta(m, wp, route, unit, **extra):
    d = {"model_hash": m.fingerprint(), "working_point": wp.to_dict(), "route": route, "unit": unit}
    d.update(extra)
    return d


def _real(z, what):
    z = np.asarray(z)
    scale = np.maximum(np.abs(z), 1.0)
    if np.any(np.abs(z.imag) > 1e-8 * scale):
        raise NumericError(f"{what}: spectrum has a non-negligible imaginary part")
    return z.real


def phase_noise_spectrum(grid, m, wp, noise=None, route="closed_form", assembly="intracavity") -> SpectrumSeries:
    """Homodyne phase-quadrature spectrum S_P of the output field."""
    _check_choice(route, ROUTES, "route")
    _check_choice(assembly, ASSEMBLIES, "assembly")
    noise = _check(wp, noise)
    disp, w, unit = _as_grid(grid, m)
    if route == "closed_form":
        if assembly == "intracavity":
            chi = susceptibility(w, m, wp)
            values = 0.5 + m.kappa * np.abs(chi) ** 2 * sum(np.abs(f) ** 2 for f in coeffs_f(w, m, wp))
        else:
            s = math.sqrt(2 * m.kappa)
            e_p = np.array([0, 1.0, 0, 0])

            def row(x):
                chi = susceptibility(x, m, wp)
                return s * np.stack([chi * f for f in coeffs_f(x, m, wp)], axis=-1) - e_p

            values = _real(_sym(row(w), row(-w), row(w), row(-w), noise.quadrature_correlations()), "S_P")
    else:
        corr = transfer_matrix_correlators(w, drift_matrix(m, wp), noise)
        if assembly == "intracavity":
            values = 0.5 + 2 * m.kappa * _real(corr.block(PA, PA), "S_P")
        else:
            p_out = _unit(PA, math.sqrt(2 * m.kappa)) - _unit(PA_IN)
            values = _real(corr.pair(p_out, p_out), "S_P")
    return SpectrumSeries("PhaseNoise", disp, unit, values, _meta(m, wp, route, unit, assembly=assembly))


def intensity_spectrum(grid, m, wp, noise=None, route="closed_form") -> SpectrumSeries:
    """Output intensity spectrum S_I = 2 kappa C_{a^dag a}, symmetrised over +-omega."""
    _check_choice(route, ROUTES, "route")
    noise = _check(wp, noise)
    disp, w, unit = _as_grid(grid, m)
    if route == "closed_form":

        def bracket(x):
            _, g2, g3, g4 = coeffs_g(x, m, wp)
            return (
                2 * np.abs(g2) ** 2
                + np.abs(g3) ** 2
                + np.abs(g4) ** 2
                + 1j * np.conj(g3) * g4
                - 1j * np.conj(g4) * g3
            )

        chi2 = np.abs(susceptibility(w, m, wp)) ** 2
        values = _real(0.5 * m.kappa * chi2 * (bracket(w) + bracket(-w)), "S_I")
    else:
        corr = transfer_matrix_correlators(w, drift_matrix(m, wp), noise)
        a, ad = _a()
        values = 2 * m.kappa * _real(corr.pair(ad, a), "S_I")
    return SpectrumSeries("Intensity", disp, unit, values, _meta(m, wp, route, unit))


def output_correlators(omega, m, wp, noise=None, route="closed_form", assembly="input_output"):
    """Output-field correlators C_aa, C_{a^dag a^dag}, C_{a a^dag}, C_{a^dag a}.

    Returned as a dict keyed ``"aa"``, ``"adad"``, ``"aad"``, ``"ada"``.
    """
    _check_choice(route, ROUTES, "route")
    _check_choice(assembly, ASSEMBLIES, "assembly")
    noise = VACUUM if noise is None else noise
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    output = assembly == "input_output"
    if route == "closed_form":
        C = _closed_ladder_correlators(w, m, wp, noise, output)
    else:
        C = _tm_ladder_correlators(transfer_matrix_correlators(w, drift_matrix(m, wp), noise), m.kappa, output)
    if not output:
        s = 2 * m.kappa
        C = {k: s * v for k, v in C.items()}
        C["aad"] = C["aad"] + 1.0
    return C


def squeezing_spectrum(grid, m, wp, noise=None, phi=None, route="closed_form", assembly="input_output"):
    """Quadrature squeezing spectrum at fixed homodyne phase ``phi``, or optimised when ``phi`` is None."""
    noise = _check(wp, noise)
    disp, w, unit = _as_grid(grid, m)
    if phi is None:
        _check_choice(route, ROUTES, "route")
        _check_choice(assembly, ASSEMBLIES, "assembly")
        values = _optimal_squeezing(w, m, wp, route, assembly == "input_output")
        if assembly == "intracavity":
            values = 2 * m.kappa * values + 1.0
        kind, extra = "SqueezeOptimal", {}
    else:
        C = output_correlators(w, m, wp, noise, route, assembly)
        phase = np.exp(2j * phi)
        values = _real(np.conj(phase) * C["aa"] + phase * C["adad"] + C["aad"] + C["ada"], "S_phi")
        kind, extra = "SqueezeFixedPhase", {"phi": float(phi)}
    return SpectrumSeries(kind, disp, unit, values, _meta(m, wp, route, unit, assembly=assembly, **extra))


def optimal_phase(grid, m, wp, noise=None, route="closed_form", assembly="input_output") -> SpectrumSeries:
    """Homodyne phase minimising S_phi: exp(2 i phi) = -C_aa / |C_aa|.

    Where ``|C_aa| < 1e-14`` the phase is undefined; those points are set to
    0, counted in the metadata and reported with a :class:`ZeroCaaWarning`.
    """
    noise = _check(wp, noise)
    disp, w, unit = _as_grid(grid, m)
    caa = output_correlators(w, m, wp, noise, route, assembly)["aa"]
    undefined = np.abs(caa) < ZERO_CAA
    phi = np.where(undefined, 0.0, 0.5 * np.angle(-caa))
    if undefined.any():
        warnings.warn(
            f"optimal phase undefined at {int(undefined.sum())} grid points (|C_aa| ~ 0)",
            ZeroCaaWarning,
            stacklevel=2,
        )
    meta = _meta(m, wp, route, unit, assembly=assembly, undefined_points=int(undefined.sum()))
    return SpectrumSeries("OptimalPhase", disp, unit, phi, meta)


def local_maxima(values):
    """Indices of strict interior local maxima."""
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1


def local_minima(values):
    return local_maxima(-np.asarray(values))
