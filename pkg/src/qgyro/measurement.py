"""Joint J^2 measurement, the POVM it induces on a source particle, and merit metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .spin import (
    ReferenceGeometry,
    SourceState,
    angular_momentum_ops,
    check_density_matrix,
    geometry_of,
    spin_half_ops,
    state_statistics,
)

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class ProjectorPair:
    """Projectors onto the j = l +- 1/2 sectors of reference (x) source."""

    pi_plus: np.ndarray
    pi_minus: np.ndarray


@dataclass(frozen=True)
class PovmPair:
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray


def dot_ls(geom: ReferenceGeometry) -> np.ndarray:
    """L.S on the 2d-dimensional joint space, ordered reference (x) source."""
    L = angular_momentum_ops(geom)
    S = spin_half_ops()
    return sum(np.kron(li, si) for li, si in zip(L.vector, S.vector))


def total_spin_ops(geom: ReferenceGeometry):
    """J_i = L_i (x) I + I (x) S_i."""
    L = angular_momentum_ops(geom)
    S = spin_half_ops()
    i2 = np.eye(2)
    i_d = np.eye(geom.d)
    return tuple(np.kron(li, i2) + np.kron(i_d, si) for li, si in zip(L.vector, S.vector))


@lru_cache(maxsize=32)
def total_projectors(geom: ReferenceGeometry) -> ProjectorPair:
    d = geom.d
    eye = np.eye(2 * d)
    a = (4 * dot_ls(geom) + eye) / d
    pp, pm = (eye + a) / 2, (eye - a) / 2
    pp.setflags(write=False)
    pm.setflags(write=False)
    return ProjectorPair(pp, pm)


def j_squared(geom: ReferenceGeometry) -> np.ndarray:
    """J^2 assembled from the projectors and the j(j+1) eigenvalues."""
    ell = geom.ell
    p = total_projectors(geom)
    return (ell + 0.5) * (ell + 1.5) * p.pi_plus + (ell - 0.5) * (ell + 0.5) * p.pi_minus


def partial_trace_source(x: np.ndarray, d: int) -> np.ndarray:
    """Tr_S of a (2d x 2d) operator on reference (x) source."""
    return np.trace(x.reshape(d, 2, d, 2), axis1=1, axis2=3)


def partial_trace_reference(x: np.ndarray, d: int) -> np.ndarray:
    return np.trace(x.reshape(d, 2, d, 2), axis1=0, axis2=2)


def _n_dot_s(n) -> np.ndarray:
    S = spin_half_ops()
    return sum(c * op for c, op in zip(n, S.vector))


def induced_povm(rho, geom: ReferenceGeometry | None = None) -> PovmPair:
    """POVM induced on the source: Lambda_+ = (l+1)/d I + n.S, Lambda_- = l/d I - n.S."""
    geom = geometry_of(rho, geom)
    stats = state_statistics(rho, geom)
    ns = _n_dot_s(stats.n_rho)
    i2 = np.eye(2, dtype=complex)
    return PovmPair((geom.ell + 1) / geom.d * i2 + ns, geom.ell / geom.d * i2 - ns)


def induced_povm_partial_trace(rho, geom: ReferenceGeometry | None = None) -> PovmPair:
    """Same POVM computed literally as Tr_R Pi_+-(rho (x) I_2)."""
    geom = geometry_of(rho, geom)
    p = total_projectors(geom)
    joint = np.kron(np.asarray(rho, dtype=complex), np.eye(2))
    return PovmPair(
        partial_trace_reference(p.pi_plus @ joint, geom.d),
        partial_trace_reference(p.pi_minus @ joint, geom.d),
    )


def _unit(n_hat) -> np.ndarray:
    n = np.asarray(n_hat, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1) > UNIT_TOL:
        raise ValidationError(f"n_hat must be a unit 3-vector, got {n_hat!r}")
    return n


def ideal_projectors(n_hat) -> PovmPair:
    """Spectral projectors I/2 +- n.S of a perfect measurement along n_hat."""
    ns = _n_dot_s(_unit(n_hat))
    i2 = np.eye(2, dtype=complex) / 2
    return PovmPair(i2 + ns, i2 - ns)


def figure_of_merit(rho, n_hat, geom: ReferenceGeometry | None = None) -> float:
    """Average probability of correctly identifying +-n_hat polarized sources."""
    n = _unit(n_hat)
    stats = state_statistics(rho, geometry_of(rho, geom))
    return float(0.5 * (1 + n @ stats.n_rho))


def outcome_probabilities(rho, xi: SourceState, geom: ReferenceGeometry | None = None):
    """(p_+, p_-) = Tr[Pi_+-(rho (x) xi)] on the joint space."""
    geom = geometry_of(rho, geom)
    p = total_projectors(geom)
    joint = np.kron(np.asarray(rho, dtype=complex), xi.matrix())
    return (float(np.real(np.sum(p.pi_plus.T * joint))), float(np.real(np.sum(p.pi_minus.T * joint))))


def longevity(rho0, xi: SourceState, n_hat, threshold: float, max_steps: int,
              geom: ReferenceGeometry | None = None):
    """Number of uses before the figure of merit drops below ``threshold``.

    The state is propagated with the exact channel. Returns the first step
    t with merit < threshold, or ``math.inf`` when that does not happen
    within ``max_steps`` channel applications.
    """
    from .channel import iterate

    geom = geometry_of(rho0, geom)
    n = _unit(n_hat)
    if not 0.5 < threshold < 1:
        raise ValidationError(f"threshold must lie in (1/2, 1), got {threshold}")
    rho0 = check_density_matrix(rho0, geom)
    q0 = figure_of_merit(rho0, n, geom)
    if q0 < threshold:
        raise ValidationError(f"initial figure of merit {q0:.6g} is already below threshold {threshold}")
    hit = {}

    def stop(t, lvec):
        if 0.5 * (1 + n @ lvec / (geom.ell + 0.5)) < threshold:
            hit["t"] = t
            return True
        return False

    iterate(rho0, xi, max_steps, geom=geom, stop=stop)
    return hit.get("t", math.inf)
