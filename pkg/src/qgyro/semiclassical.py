"""Large-l equation of motion for the reference's polar angle.

One unit of time is one measured particle. With the source along +z the
angle obeys dtheta/dt = -r (s_z / l) sin(theta), whose r = 1 solution is
theta(t) = 2 arccot(cot(theta0/2) exp(s_z t / l)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spin import ReferenceGeometry, SourceState, coherent_state


@dataclass(frozen=True)
class SemiclassicalParams:
    s_z: float
    ell: float
    theta0: float
    r_assumption: float = 1.0

    def __post_init__(self):
        if not abs(self.s_z) <= 0.5:
            raise ValidationError(f"|s_z| must be <= 1/2, got {self.s_z}")
        if not 0 <= self.theta0 <= math.pi:
            raise ValidationError(f"theta0 must lie in [0, pi], got {self.theta0}")
        if not 0 < self.r_assumption <= 1:
            raise ValidationError(f"r must lie in (0, 1], got {self.r_assumption}")
        if not self.ell > 0:
            raise ValidationError(f"ell must be positive, got {self.ell}")


def dtheta_dt(theta, r, s_z, ell):
    return -r * (s_z / ell) * np.sin(theta)


def theta_closed_form(params: SemiclassicalParams, t):
    """Closed-form angle for r = 1; theta0 in {0, pi} stays put."""
    if params.r_assumption != 1:
        raise ValidationError("the closed form assumes r = 1 throughout")
    t = np.asarray(t, dtype=float)
    th0 = params.theta0
    if th0 == 0 or th0 == math.pi:
        return np.full_like(t, th0)
    # 2 arccot(cot(th0/2) e^x) = 2 arctan(tan(th0/2) e^-x); overflow to inf gives the right limit
    with np.errstate(over="ignore"):
        return 2 * np.arctan(math.tan(th0 / 2) * np.exp(-params.s_z * t / params.ell))


def integrate_theta(params: SemiclassicalParams, steps: int, substeps: int = 1, r_series=None) -> np.ndarray:
    """RK4 solution sampled after every measured particle (length steps + 1).

    ``r_series`` optionally replaces the constant r by a per-step sequence
    (e.g. the exact r(t) of a trajectory), held fixed within each unit step.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if r_series is not None and len(r_series) < steps:
        raise ValidationError("r_series must cover every step")
    h = 1.0 / substeps
    theta = np.empty(steps + 1)
    theta[0] = th = params.theta0
    for t in range(steps):
        r = params.r_assumption if r_series is None else r_series[t]
        for _ in range(substeps):
            k1 = dtheta_dt(th, r, params.s_z, params.ell)
            k2 = dtheta_dt(th + h / 2 * k1, r, params.s_z, params.ell)
            k3 = dtheta_dt(th + h / 2 * k2, r, params.s_z, params.ell)
            k4 = dtheta_dt(th + h * k3, r, params.s_z, params.ell)
            th = th + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        theta[t + 1] = th
    return theta


def first_order_channel(rho, r: float, theta: float, s_z: float, geom: ReferenceGeometry) -> np.ndarray:
    """rho + i (r s_z / l) sin(theta) [L_y, rho]: the leading large-l part of the channel."""
    from .spin import angular_momentum_ops

    rho = np.asarray(rho, dtype=complex)
    ly = angular_momentum_ops(geom).L_y
    return rho + 1j * (r * s_z / geom.ell) * math.sin(theta) * (ly @ rho - rho @ ly)


@dataclass
class Comparison:
    times: np.ndarray
    theta_exact: np.ndarray
    theta_sc: np.ndarray
    r_exact: np.ndarray
    L_exp: np.ndarray
    max_deviation: float
    min_r: float
    max_abs_Ly: float


def compare_exact_semiclassical(geom: ReferenceGeometry, theta0: float, s_z: float, steps: int) -> Comparison:
    """Run the exact channel from a coherent state and set it beside theta_SC(t)."""
    from .channel import iterate

    if theta0 in (0.0, math.pi):
        raise ValidationError("theta0 must avoid the fixed points 0 and pi")
    params = SemiclassicalParams(s_z, geom.ell, theta0)
    rec = iterate(coherent_state(geom, theta0), SourceState.polarized_z(s_z), steps, geom=geom)
    sc = theta_closed_form(params, rec.times)
    dev = np.abs(rec.theta - sc)
    return Comparison(
        rec.times, rec.theta, sc, rec.r, rec.L_exp,
        float(np.nanmax(dev)), float(rec.r.min()), float(np.max(np.abs(rec.L_exp[:, 1]))),
    )
