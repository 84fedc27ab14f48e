"""Linearised fluctuation dynamics: drift matrix, stability, normal modes."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ComplexRoot,
    InconsistentStability,
    NegativeSquare,
    NumericError,
    OverdampedMode,
)
from .params import ModelParams
from .steady import WorkingPoint, select_branch, solve_steady_state

MARGIN_TOL = 1e-10
CONSISTENCY_TOL = 1e-8


@dataclass(frozen=True)
class DriftMatrix:
    """Drift matrix of ``u' = M u + n`` over (X_a, P_a, X_c, P_c)."""

    kappa: float
    gamma: float
    delta_d: float
    G: float
    Omega_plus: float
    Omega_minus: float

    @property
    def matrix(self):
        k, g, D, G = self.kappa, self.gamma, self.delta_d, self.G
        return np.array(
            [
                [-k, -D, 0.0, 0.0],
                [D, -k, -G, 0.0],
                [0.0, 0.0, -g, self.Omega_minus],
                [-G, 0.0, -self.Omega_plus, -g],
            ]
        )

    @property
    def noise_gains(self):
        """sqrt of the input rates multiplying each input quadrature."""
        return np.sqrt([2 * self.kappa, 2 * self.kappa, 2 * self.gamma, 2 * self.gamma])

    @property
    def diffusion(self):
        """Symmetrised diffusion matrix for vacuum inputs, diag(k, k, g, g)."""
        return np.diag([self.kappa, self.kappa, self.gamma, self.gamma])

    def characteristic_coefficients(self):
        """(a1, a2, a3, a4) of det(lambda - M) = lambda^4 + a1 lambda^3 + ... + a4."""
        k, g, D, G = self.kappa, self.gamma, self.delta_d, self.G
        Op, Om = self.Omega_plus, self.Omega_minus
        wm2 = Op * Om
        a1 = 2.0 * (k + g)
        a2 = D * D + wm2 + g * g + 4.0 * g * k + k * k
        a3 = 2.0 * (D * D * g + wm2 * k + g * g * k + g * k * k)
        a4 = (D * D + k * k) * (wm2 + g * g) + D * G * G * Om
        return a1, a2, a3, a4


def drift_matrix(m: ModelParams, wp: WorkingPoint) -> DriftMatrix:
    return DriftMatrix(
        kappa=m.kappa,
        gamma=m.gamma,
        delta_d=wp.delta_d,
        G=wp.G,
        Omega_plus=m.Omega_plus,
        Omega_minus=m.Omega_minus,
    )


def eigenvalues(M: DriftMatrix):
    return np.linalg.eigvals(M.matrix)


def routh_hurwitz(coeffs) -> bool:
    """Routh-Hurwitz test for a monic quartic with coefficients (a1, a2, a3, a4)."""
    a1, a2, a3, a4 = coeffs
    return (
        a1 > 0
        and a3 > 0
        and a4 > 0
        and a1 * a2 - a3 > 0
        and a1 * a2 * a3 - a3 * a3 - a1 * a1 * a4 > 0
    )


def is_stable(M: DriftMatrix):
    """Return ``(stable, margin)``; margin is the largest eigenvalue real part.

    Real parts within ``MARGIN_TOL`` of zero count as unstable.  The
    Routh-Hurwitz verdict must agree with the eigenvalue verdict unless the
    margin is within ``CONSISTENCY_TOL`` of zero.
    """
    ev = eigenvalues(M)
    margin = float(np.max(ev.real))
    scale = max(1.0, float(np.max(np.abs(ev))))
    by_eigen = margin < -MARGIN_TOL * scale
    by_rh = routh_hurwitz(M.characteristic_coefficients())
    if by_eigen != by_rh and abs(margin) > CONSISTENCY_TOL * scale:
        raise InconsistentStability(
            f"eigenvalues say {'stable' if by_eigen else 'unstable'} (margin {margin:.3e}) "
            f"but Routh-Hurwitz says {'stable' if by_rh else 'unstable'}"
        )
    return bool(by_eigen and by_rh), margin


def positive_frequencies(M: DriftMatrix, ev=None):
    """The two positive eigenvalue imaginary parts, largest first."""
    ev = eigenvalues(M) if ev is None else ev
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.any(np.abs(ev.imag) <= 1e-12 * scale):
        raise OverdampedMode("an eigenvalue of the drift matrix is purely real")
    pos = np.sort(ev.imag[ev.imag > 0])[::-1]
    if pos.size != 2:
        raise OverdampedMode(f"expected two positive imaginary parts, found {pos.size}")
    return pos


def numeric_splitting(M: DriftMatrix) -> float:
    """Difference of the two positive eigenvalue imaginary parts."""
    pos = positive_frequencies(M)
    return float(pos[0] - pos[1])


def analytic_peaks(m: ModelParams, wp: WorkingPoint):
    """Damping-free roots (omega_plus, omega_minus) of |D(omega)|."""
    wm2 = m.omega_m**2
    D2 = wp.delta_d**2
    inner = (wm2 - D2) ** 2 - 4.0 * wp.G**2 * wp.delta_d * m.Omega_minus
    if inner < 0:
        raise ComplexRoot(f"inner radicand {inner:.6g} < 0: modes hybridise beyond the approximation")
    root = math.sqrt(inner)
    hi = 0.5 * (wm2 + D2) + 0.5 * root
    lo = 0.5 * (wm2 + D2) - 0.5 * root
    if lo < 0 or hi < 0:
        raise NegativeSquare(f"squared peak frequency {min(lo, hi):.6g} < 0")
    return math.sqrt(hi), math.sqrt(lo)


@dataclass(frozen=True)
class ModeReport:
    eigenvalues: tuple
    stable: bool
    margin: float
    positive_imag_parts: tuple
    numeric_splitting: Optional[float]
    analytic_roots: Optional[tuple]
    analytic_splitting: Optional[float]
    notes: tuple = ()

    def to_dict(self):
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "stable": self.stable,
            "margin": self.margin,
            "positive_imag_parts": list(self.positive_imag_parts),
            "numeric_splitting": self.numeric_splitting,
            "analytic_roots": list(self.analytic_roots) if self.analytic_roots else None,
            "analytic_splitting": self.analytic_splitting,
            "notes": list(self.notes),
        }


def mode_report(m: ModelParams, wp: WorkingPoint) -> ModeReport:
    M = drift_matrix(m, wp)
    ev = eigenvalues(M)
    stable, margin = is_stable(M)
    notes = []
    pos = tuple(float(x) for x in np.sort(ev.imag[ev.imag > 0])[::-1])
    try:
        split = float(np.subtract(*positive_frequencies(M, ev)))
    except OverdampedMode as exc:
        split = None
        notes.append(f"OverdampedMode: {exc}")
    try:
        roots = analytic_peaks(m, wp)
        an_split = roots[0] - roots[1]
    except NumericError as exc:
        roots = an_split = None
        notes.append(f"{type(exc).__name__}: {exc}")
    ordered = tuple(sorted((complex(z) for z in ev), key=lambda z: (z.imag, z.real)))
    return ModeReport(ordered, stable, margin, pos, split, roots, an_split, tuple(notes))


def classify_branches(m: ModelParams, points):
    """Fill the ``stable`` flag of each working point."""
    return [dataclasses.replace(p, stable=is_stable(drift_matrix(m, p))[0]) for p in points]


def resolve_working_point(m: ModelParams, policy="auto") -> WorkingPoint:
    """Solve, classify and select a working point in one call."""
    return select_branch(classify_branches(m, solve_steady_state(m)), policy)
