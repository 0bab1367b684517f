"""Equilibrium of the reference with a stream of polarized source particles.

The sign convention follows detailed balance of the population chain: the
thermal populations grow as ((1 + 2 s_z)/(1 - 2 s_z))^m, so a reference
thermalized with a +z polarized source points along +z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import ValidationError
from .spin import ReferenceGeometry, SourceState

SERIES_CUTOFF = 1e-2
MAX_SYMMETRIC_TWICE_ELL = 12


def _check_sz(s_z):
    s_z = float(s_z)
    if not abs(s_z) <= 0.5:
        raise ValidationError(f"|s_z| must be <= 1/2, got {s_z}")
    return s_z


def inverse_temperature(s_z: float) -> float:
    """beta = 2 artanh(2 s_z); +-inf at the fully polarized endpoints."""
    s = _check_sz(s_z)
    if abs(s) == 0.5:
        return math.copysign(math.inf, s)
    return 2 * math.atanh(2 * s)


def bath_entropy(s_z: float) -> float:
    """Binary entropy (bits) of one source particle, p = 1/2 + s_z."""
    p = 0.5 + _check_sz(s_z)
    return float(sum(-q * math.log2(q) for q in (p, 1 - p) if q > 0))


@dataclass(frozen=True)
class ThermalModel:
    s_z: float
    beta: float
    geom: ReferenceGeometry

    @classmethod
    def from_source(cls, s_z: float, geom: ReferenceGeometry) -> "ThermalModel":
        return cls(float(s_z), inverse_temperature(s_z), geom)


def log_partition_function(beta: float, geom: ReferenceGeometry) -> float:
    """ln Z with Z = sum_m exp(-beta m) = sinh(beta d/2)/sinh(beta/2)."""
    b = abs(float(beta))
    if not math.isfinite(b):
        raise ValidationError("partition function needs a finite beta")
    d = geom.d
    if b == 0:
        return math.log(d)
    if b * d > 700:
        # sinh(x) = e^x (1 - e^-2x)/2 for both numerator and denominator
        return (b * d / 2 + math.log1p(-math.exp(-b * d))
                - b / 2 - math.log1p(-math.exp(-b)))
    return math.log(math.sinh(b * d / 2) / math.sinh(b / 2))


def partition_function(beta: float, geom: ReferenceGeometry) -> float:
    if beta == 0:
        return float(geom.d)
    try:
        return math.exp(log_partition_function(beta, geom))
    except OverflowError:
        return math.inf


def thermal_populations(s_z: float, geom: ReferenceGeometry) -> np.ndarray:
    s = _check_sz(s_z)
    d = geom.d
    if s == 0:
        return np.full(d, 1 / d)
    if abs(s) == 0.5:
        p = np.zeros(d)
        p[-1 if s > 0 else 0] = 1.0
        return p
    logw = inverse_temperature(s) * geom.m_values
    return np.exp(logw - logsumexp(logw))


def thermal_state(s_z: float, geom: ReferenceGeometry) -> np.ndarray:
    """Fixed point of the channel for a source polarized along z."""
    return np.diag(thermal_populations(s_z, geom)).astype(complex)


def _half_langevin(x: float, d: int) -> float:
    """(d/2) coth(d x) - (1/2) coth(x) for x >= 0, with a series near 0."""
    if d * x < SERIES_CUTOFF:
        d2 = d * d
        return ((d2 - 1) * x / 6 - (d2 * d2 - 1) * x ** 3 / 90
                + 2 * (d2 ** 3 - 1) * x ** 5 / 1890)
    if d * x > 20:
        big = d / 2
    else:
        big = d / 2 / math.tanh(d * x)
    return big - 0.5 / math.tanh(x)


def thermal_Lz(s_z: float, geom: ReferenceGeometry) -> float:
    """<L_z> of the thermal state: (d/2) coth(d artanh 2s) - 1/(4s), odd in s."""
    s = _check_sz(s_z)
    if s == 0:
        return 0.0
    if abs(s) == 0.5:
        return math.copysign(geom.ell, s)
    return math.copysign(_half_langevin(math.atanh(2 * abs(s)), geom.d), s)


@dataclass(frozen=True)
class AsymptoticMerit:
    merit: float
    regime: str
    small_polarization_estimate: float
    finite_polarization_bound: float | None
    exponent_a: float | None


def asymptotic_merit(s_z: float, geom: ReferenceGeometry) -> AsymptoticMerit:
    """|n_rho| of the thermal state together with the applicable regime estimate.

    ``regime`` is "fluctuation" when |s_z| < 1/l and "polarized" otherwise.
    When |s_z| = l^-a with 0 < a < 1 the bound 1 - 1/(4 l^(1-a)) is reported.
    """
    s = abs(_check_sz(s_z))
    ell = geom.ell
    merit = abs(thermal_Lz(s, geom)) / (ell + 0.5)
    regime = "fluctuation" if s < 1 / ell else "polarized"
    a = bound = None
    if 0 < s < 1 and ell > 1:
        a_val = -math.log(s) / math.log(ell)
        if 0 < a_val < 1:
            a = a_val
            bound = 1 - 1 / (4 * ell ** (1 - a_val))
    return AsymptoticMerit(merit, regime, 4 / 3 * ell * s, bound, a)


def thermal_curve(geom: ReferenceGeometry, n_points: int):
    """(s_z, <L_z>/l) on a grid over [-1/2, 1/2] that is exactly symmetric about 0."""
    if n_points < 3:
        raise ValidationError("thermal_curve needs at least 3 points")
    k = n_points // 2
    pos = 0.5 * np.arange(1, k + 1) / k
    middle = [0.0] if n_points % 2 else []
    s = np.concatenate([-pos[::-1], middle, pos])
    y_pos = np.array([thermal_Lz(x, geom) / geom.ell for x in pos])
    y = np.concatenate([-y_pos[::-1], middle, y_pos])
    return s, y


def transition_width(geom: ReferenceGeometry, level: float = 0.5) -> float:
    """Width in s_z over which <L_z>/l climbs from -level to +level."""
    ell = geom.ell
    s_half = brentq(lambda s: thermal_Lz(s, geom) / ell - level, 1e-15, 0.5 - 1e-15, xtol=1e-15)
    return 2 * s_half


def _dicke_vectors(n: int) -> np.ndarray:
    """Columns: normalized symmetric states with k excitations, k = 0..n.

    Qubit basis index 1 means spin up, matching the increasing-m convention,
    so column k carries m = k - n/2.
    """
    dim = 2 ** n
    out = np.zeros((dim, n + 1))
    for k in range(n + 1):
        for ups in combinations(range(n), k):
            idx = sum(1 << (n - 1 - q) for q in ups)
            out[idx, k] = 1.0
        out[:, k] /= math.sqrt(math.comb(n, k))
    return out


def _apply_product(op: np.ndarray, vecs: np.ndarray, n: int) -> np.ndarray:
    """(op (x) ... (x) op) applied to each column of ``vecs``."""
    k = vecs.shape[1]
    t = vecs.reshape((2,) * n + (k,))
    for q in range(n):
        t = np.moveaxis(np.tensordot(op, t, axes=([1], [q])), 0, q)
    return t.reshape(2 ** n, k)


def symmetric_subspace_state(xi: SourceState, geom: ReferenceGeometry) -> np.ndarray:
    """Normalized compression of xi^(x 2l) onto the symmetric subspace of 2l qubits."""
    n = geom.twice_ell
    if n > MAX_SYMMETRIC_TWICE_ELL:
        raise ValidationError(f"symmetric-subspace construction limited to 2l <= {MAX_SYMMETRIC_TWICE_ELL}, got {n}")
    dicke = _dicke_vectors(n).astype(complex)
    block = dicke.conj().T @ _apply_product(xi.matrix(), dicke, n)
    block = (block + block.conj().T) / 2
    return block / np.trace(block).real


def thermal_fixed_point_residual(s_z: float, geom: ReferenceGeometry) -> float:
    from .channel import apply_channel_polarized
    from .spin import trace_distance

    rho = thermal_state(s_z, geom)
    return trace_distance(apply_channel_polarized(rho, s_z, geom), rho)

