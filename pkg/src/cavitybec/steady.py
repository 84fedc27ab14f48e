"""Mean-field fixed point of the driven cavity-BEC system.

With ``beta`` eliminated, the intracavity photon number ``I = alpha**2``
satisfies the cubic

    I * ((delta_c + c1 I)**2 + kappa**2) = eta**2,
    c1 = zeta**2 / sqrt(Omega_plus**2 + gamma**2),

and the effective detuning is ``Delta_d = -delta_c - c1 I``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import AmbiguousBranch, BranchFallbackWarning, NoStableBranch, ParameterError, RegimeWarning
from .params import ModelParams

MERGE_TOL = 1e-9
REGIME_LIMIT = 10.0  # U0 * alpha**2 in units of omega_R


@dataclass(frozen=True)
class WorkingPoint:
    """A steady-state solution about which the dynamics is linearised."""

    alpha: float
    beta: float
    delta_d: float
    G: float
    branch_index: int = 0
    stable: Optional[bool] = None
    regime_warning: bool = False

    @property
    def photons(self):
        return self.alpha**2

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["photons"] = self.photons
        return d


@dataclass(frozen=True)
class RootReport:
    intensities: tuple
    discarded_complex: int
    discarded_negative: int
    merged: int


def feedback_coefficient(m: ModelParams) -> float:
    """c1 in ``Delta_d = -delta_c - c1 * alpha**2``."""
    return math.sqrt(2.0 * m.atom_count) * m.zeta * (math.sqrt(2.0) / 4.0) * m.U0 / math.hypot(
        m.Omega_plus, m.gamma
    )


def cubic_coefficients(m: ModelParams):
    """Coefficients (highest power first) of the photon-number cubic."""
    c1 = feedback_coefficient(m)
    return np.array(
        [c1 * c1, 2.0 * m.delta_c * c1, m.delta_c**2 + m.kappa**2, -(m.eta**2)]
    )


def _newton_polish(coeffs, x, iters=50):
    dcoeffs = np.polyder(coeffs)
    for _ in range(iters):
        f = np.polyval(coeffs, x)
        df = np.polyval(dcoeffs, x)
        if df == 0.0:
            break
        step = f / df
        x_new = x - step
        if abs(step) <= 1e-15 * max(abs(x_new), 1e-300):
            return x_new
        x = x_new
    return x


def cubic_intensity_roots(m: ModelParams) -> RootReport:
    """All real, non-negative photon numbers solving the steady-state cubic."""
    coeffs = cubic_coefficients(m)
    if m.eta == 0.0:
        # I = 0 is exact; the remaining quadratic (delta_c + c1 I)^2 + kappa^2 has no real root
        return RootReport((0.0,), 2, 0, 0)
    raw = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(raw))))
    real = []
    n_complex = n_negative = 0
    for r in raw:
        if abs(r.imag) > 1e-6 * scale:
            n_complex += 1
            continue
        x = _newton_polish(coeffs, float(r.real))
        size = np.polyval(np.abs(coeffs), abs(x))
        if abs(np.polyval(coeffs, x)) > 1e-8 * size:
            # near-real complex pair that Newton could not pin to the axis
            n_complex += 1
            continue
        if x < 0:
            n_negative += 1
            continue
        real.append(x)
    real.sort()
    merged = []
    for x in real:
        if merged and abs(x - merged[-1]) <= MERGE_TOL * max(abs(x), 1.0):
            continue
        merged.append(x)
    return RootReport(tuple(merged), n_complex, n_negative, len(real) - len(merged))


def working_point_from_intensity(m: ModelParams, intensity: float, branch_index=0) -> WorkingPoint:
    intensity = float(intensity)
    alpha = math.sqrt(intensity)
    beta = (math.sqrt(2.0) / 4.0) * m.U0 * intensity / math.hypot(m.Omega_plus, m.gamma)
    delta_d = -m.delta_c - math.sqrt(2.0 * m.atom_count) * m.zeta * beta
    G = math.sqrt(2.0) * m.zeta * alpha
    return WorkingPoint(
        alpha=alpha,
        beta=beta,
        delta_d=delta_d,
        G=G,
        branch_index=branch_index,
        regime_warning=bool(m.U0 * intensity > REGIME_LIMIT),
    )


def solve_steady_state(m: ModelParams) -> list:
    """Enumerate every physical steady-state branch, sorted by photon number.

    Between one and three branches are returned; more than one indicates
    optical bistability.  The ``stable`` flag is left unset (see
    :func:`cavitybec.lindyn.classify_branches`).
    """
    report = cubic_intensity_roots(m)
    points = [working_point_from_intensity(m, I, k) for k, I in enumerate(report.intensities)]
    if any(p.regime_warning for p in points):
        warnings.warn(
            f"U0*alpha^2 exceeds {REGIME_LIMIT} omega_R on at least one branch", RegimeWarning,
            stacklevel=2,
        )
    return points


def fixed_point_residuals(m: ModelParams, wp: WorkingPoint):
    """Relative residuals of the three mean-field equations at ``wp``."""
    alpha = m.eta / math.hypot(wp.delta_d, m.kappa)
    beta = (math.sqrt(2.0) / 4.0) * m.U0 * wp.alpha**2 / math.hypot(m.Omega_plus, m.gamma)
    delta_d = -m.delta_c - math.sqrt(2.0 * m.atom_count) * m.zeta * wp.beta

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-300) if (a or b) else 0.0

    return rel(wp.alpha, alpha), rel(wp.beta, beta), rel(wp.delta_d, delta_d)


BranchPolicy = Union[str, int]
POLICIES = ("auto", "only_stable", "lowest_stable", "highest_stable")


def select_branch(points, policy: BranchPolicy = "auto") -> WorkingPoint:
    """Pick one working point from a classified branch list.

    ``policy`` is ``"only_stable"`` (exactly one stable branch required),
    ``"lowest_stable"``, ``"highest_stable"``, an integer branch index, or
    ``"auto"``: only-stable, falling back to the lowest stable branch with a
    :class:`BranchFallbackWarning` when several are stable.
    """
    if not points:
        raise ParameterError("no working points to select from", field="points")
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        for p in points:
            if p.branch_index == policy:
                return p
        raise ParameterError(f"no branch with index {policy}", field="branch_policy")
    if policy not in POLICIES:
        raise ParameterError(f"unknown branch policy {policy!r}", field="branch_policy")
    if any(p.stable is None for p in points):
        raise ParameterError("stability flags must be filled before selection", field="points")

    stable = [p for p in points if p.stable]
    if not stable:
        raise NoStableBranch(f"all {len(points)} steady-state branches are unstable")
    if policy == "lowest_stable":
        return stable[0]
    if policy == "highest_stable":
        return stable[-1]
    if len(stable) == 1:
        return stable[0]
    if policy == "only_stable":
        raise AmbiguousBranch(f"{len(stable)} stable branches; choose a policy")
    warnings.warn(
        f"{len(stable)} stable branches; using the lowest (branch {stable[0].branch_index})",
        BranchFallbackWarning,
        stacklevel=2,
    )
    return stable[0]
