"""Angular-momentum operators, reference states and small matrix utilities.

All matrices live in the L_z eigenbasis ordered by increasing magnetic
quantum number, m = -l, ..., l. Index ``i`` therefore carries m = i - l.
The spin-1/2 source uses the same convention, so ``|up>`` is index 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ToleranceError, ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
UNDEFINED_DIRECTION_TOL = 1e-12


@dataclass(frozen=True)
class ReferenceGeometry:
    """Size of the spin-l reference, stored as ``twice_ell = 2l``."""

    twice_ell: int

    def __post_init__(self):
        if isinstance(self.twice_ell, bool) or not isinstance(self.twice_ell, (int, np.integer)):
            raise ValidationError(f"twice_ell must be an integer, got {self.twice_ell!r}")
        if self.twice_ell < 1:
            raise ValidationError(f"twice_ell must be >= 1, got {self.twice_ell}")
        object.__setattr__(self, "twice_ell", int(self.twice_ell))

    @classmethod
    def from_ell(cls, ell: float) -> "ReferenceGeometry":
        twice = 2 * ell
        if abs(twice - round(twice)) > 1e-9:
            raise ValidationError(f"ell must be an integer or half-integer, got {ell}")
        return cls(int(round(twice)))

    @classmethod
    def from_dim(cls, d: int) -> "ReferenceGeometry":
        return cls(int(d) - 1)

    @property
    def ell(self) -> float:
        return self.twice_ell / 2

    @property
    def d(self) -> int:
        return self.twice_ell + 1

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.d) - self.ell

    def __str__(self):
        return f"l={self.ell:g} (d={self.d})"


class AngularMomentum(NamedTuple):
    L_x: np.ndarray
    L_y: np.ndarray
    L_z: np.ndarray
    L_plus: np.ndarray
    L_minus: np.ndarray
    L_squared: np.ndarray

    @property
    def vector(self):
        return (self.L_x, self.L_y, self.L_z)


def _frozen(a):
    a.setflags(write=False)
    return a


def ladder_coefficients(geom: ReferenceGeometry) -> np.ndarray:
    """<m+1|L_+|m> for m = -l, ..., l-1 (length d-1)."""
    ell = geom.ell
    m = geom.m_values[:-1]
    return np.sqrt(ell * (ell + 1) - m * (m + 1))


@lru_cache(maxsize=64)
def angular_momentum_ops(geom: ReferenceGeometry) -> AngularMomentum:
    """Spin-l generators as dense complex matrices (read-only, cached)."""
    d = geom.d
    lp = np.zeros((d, d), dtype=complex)
    idx = np.arange(d - 1)
    lp[idx + 1, idx] = ladder_coefficients(geom)
    lm = lp.conj().T.copy()
    lx = (lp + lm) / 2
    ly = (lp - lm) / 2j
    lz = np.diag(geom.m_values).astype(complex)
    l2 = lx @ lx + ly @ ly + lz @ lz
    return AngularMomentum(*(_frozen(a) for a in (lx, ly, lz, lp, lm, l2)))


SPIN_HALF = ReferenceGeometry(1)


def spin_half_ops() -> AngularMomentum:
    """S operators of a spin-1/2 particle in the same basis convention."""
    return angular_momentum_ops(SPIN_HALF)


@lru_cache(maxsize=64)
def _ly_eigensystem(geom: ReferenceGeometry):
    w, v = np.linalg.eigh(angular_momentum_ops(geom).L_y)
    return w, v


def rotation_operator(geom: ReferenceGeometry, theta: float, phi: float = 0.0) -> np.ndarray:
    """exp(-i phi L_z) exp(-i theta L_y), built from the spectral decomposition of L_y."""
    w, v = _ly_eigensystem(geom)
    ry = (v * np.exp(-1j * theta * w)) @ v.conj().T
    rz = np.exp(-1j * phi * geom.m_values)
    return rz[:, None] * ry


def basis_state(geom: ReferenceGeometry, m: float) -> np.ndarray:
    """Projector |l,m><l,m|."""
    i = int(round(m + geom.ell))
    if not 0 <= i < geom.d or abs(i - geom.ell - m) > 1e-9:
        raise ValidationError(f"m={m} is not a magnetic quantum number of {geom}")
    rho = np.zeros((geom.d, geom.d), dtype=complex)
    rho[i, i] = 1.0
    return rho


def maximally_mixed(geom: ReferenceGeometry) -> np.ndarray:
    return np.eye(geom.d, dtype=complex) / geom.d


def coherent_state(geom: ReferenceGeometry, theta: float, phi: float = 0.0) -> np.ndarray:
    """Spin coherent state pointing along (sin t cos p, sin t sin p, cos t)."""
    u = rotation_operator(geom, theta, phi)
    psi = u[:, -1]
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class SourceState:
    """Spin-1/2 source state described by its polarization <S>, |<S>| <= 1/2."""

    bloch: tuple

    def __post_init__(self):
        b = np.asarray(self.bloch, dtype=float)
        if b.shape != (3,) or not np.all(np.isfinite(b)):
            raise ValidationError(f"source polarization must be a finite 3-vector, got {self.bloch!r}")
        if np.linalg.norm(b) > 0.5 + 1e-12:
            raise ValidationError(
                f"|<S>| = {np.linalg.norm(b):.6g} exceeds the bound 1/2"
            )
        object.__setattr__(self, "bloch", tuple(float(x) for x in b))

    @classmethod
    def polarized_z(cls, s_z: float) -> "SourceState":
        return cls((0.0, 0.0, s_z))

    @classmethod
    def unpolarized(cls) -> "SourceState":
        return cls((0.0, 0.0, 0.0))

    @classmethod
    def from_matrix(cls, xi) -> "SourceState":
        xi = check_density_matrix(xi)
        if xi.shape != (2, 2):
            raise DimensionError(f"source state must be 2x2, got {xi.shape}")
        s = spin_half_ops()
        return cls(tuple(float(np.real(np.trace(xi @ op))) for op in s.vector))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.bloch)

    @property
    def polarization(self) -> float:
        return float(np.linalg.norm(self.bloch))

    def matrix(self) -> np.ndarray:
        s = spin_half_ops()
        return np.eye(2, dtype=complex) / 2 + 2 * sum(c * op for c, op in zip(self.bloch, s.vector))


def check_density_matrix(rho, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """Validate a density matrix and return it as a complex array.

    Raises DimensionError on shape problems and ToleranceError if the
    Hermiticity, trace or positivity tolerances are breached.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
    if geom is not None and rho.shape[0] != geom.d:
        raise DimensionError(f"density matrix has dim {rho.shape[0]}, expected {geom.d} for {geom}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise ToleranceError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise ToleranceError(f"density matrix trace {tr!r} differs from 1")
    check_positive(rho)
    return rho


def check_positive(rho: np.ndarray, tol: float = POSITIVITY_TOL) -> None:
    # Cholesky of the shifted matrix is a cheap sufficient test; eigvalsh only on failure.
    try:
        np.linalg.cholesky(rho + tol * np.eye(rho.shape[0]))
        return
    except np.linalg.LinAlgError:
        pass
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < -tol:
        raise ToleranceError(f"state lost positivity: minimum eigenvalue {lo:.3e}")


def geometry_of(rho, geom: ReferenceGeometry | None = None) -> ReferenceGeometry:
    shape = np.shape(rho)
    if len(shape) != 2 or shape[0] != shape[1] or shape[0] < 2:
        raise DimensionError(f"expected a square matrix of dim >= 2, got shape {shape}")
    if geom is None:
        return ReferenceGeometry.from_dim(shape[0])
    if shape[0] != geom.d:
        raise DimensionError(f"matrix has dim {shape[0]}, expected {geom.d} for {geom}")
    return geom


def expectations(rho: np.ndarray, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """(<L_x>, <L_y>, <L_z>) of a reference state."""
    geom = geometry_of(rho, geom)
    m = geom.m_values
    c = ladder_coefficients(geom)
    # <L_+> = sum_m c_m rho[m, m+1]
    lp = np.sum(c * np.diagonal(rho, offset=1))
    lz = np.real(np.sum(m * np.diagonal(rho)))
    return np.array([lp.real, lp.imag, lz])


def polar_angle(vec, tol: float = UNDEFINED_DIRECTION_TOL) -> float:
    """Angle from +z in [0, pi]; nan when the vector is (numerically) zero."""
    vec = np.asarray(vec, dtype=float)
    if np.linalg.norm(vec) < tol:
        return float("nan")
    return float(np.arctan2(np.hypot(vec[0], vec[1]), vec[2]))


@dataclass(frozen=True)
class StateStatistics:
    expectations: np.ndarray
    n_rho: np.ndarray
    r: float
    theta: float

    @property
    def direction_defined(self) -> bool:
        return not np.isnan(self.theta)


def state_statistics(rho, geom: ReferenceGeometry | None = None) -> StateStatistics:
    """Expectations of L, n_rho = <L>/(l + 1/2), its length r and polar angle theta.

    ``theta`` is nan when |<L>| < 1e-12 since the state then has no direction.
    """
    geom = geometry_of(rho, geom)
    lvec = expectations(np.asarray(rho), geom)
    n = lvec / (geom.ell + 0.5)
    return StateStatistics(lvec, n, float(np.linalg.norm(n)), polar_angle(lvec))


def trace_distance(rho, sigma) -> float:
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError(f"cannot compare states of shapes {rho.shape} and {sigma.shape}")
    diff = rho - sigma
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed random state, used for randomized checks."""
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_source(rng: np.random.Generator, max_norm: float = 0.5) -> SourceState:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return SourceState(tuple(v * max_norm * rng.uniform() ** (1 / 3)))


def commutator(a, b):
    return a @ b - b @ a
