"""Birth-death chain obeyed by the L_z populations under a z-polarized source."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

from .errors import ValidationError
from .spin import ReferenceGeometry, basis_state

TRIDIAGONAL_SOLVER_MIN_DIM = 100


def _check_sz(s_z):
    s_z = float(s_z)
    if not abs(s_z) <= 0.5:
        raise ValidationError(f"|s_z| must be <= 1/2, got {s_z}")
    return s_z


@dataclass(frozen=True)
class MarkovChain:
    """Column-stochastic P with P[i, j] = Prob(m_i | m_j), m increasing from -l."""

    geom: ReferenceGeometry
    s_z: float
    up: np.ndarray    # P_{m+1|m} for m = -l .. l-1
    down: np.ndarray  # P_{m-1|m} for m = -l+1 .. l

    @property
    def P(self) -> np.ndarray:
        d = self.geom.d
        p = np.zeros((d, d))
        idx = np.arange(d - 1)
        p[idx + 1, idx] = self.up
        p[idx, idx + 1] = self.down
        p[np.arange(d), np.arange(d)] = self.stay
        return p

    @property
    def stay(self) -> np.ndarray:
        st = np.ones(self.geom.d)
        st[:-1] -= self.up
        st[1:] -= self.down
        return st

    @property
    def degenerate(self) -> bool:
        return abs(self.s_z) == 0.5

    def step(self, p: np.ndarray) -> np.ndarray:
        """Propagate a probability vector by one use (tridiagonal product)."""
        out = self.stay * p
        out[1:] += self.up * p[:-1]
        out[:-1] += self.down * p[1:]
        return out


def transition_matrix(geom: ReferenceGeometry, s_z: float) -> MarkovChain:
    """P_{m+-1|m} = (1 +- 2 s_z)/4 * (1 - ((2m +- 1)/d)^2)."""
    s = _check_sz(s_z)
    d = geom.d
    m = geom.m_values
    up = (1 + 2 * s) / 4 * (1 - ((2 * m[:-1] + 1) / d) ** 2)
    down = (1 - 2 * s) / 4 * (1 - ((2 * m[1:] - 1) / d) ** 2)
    return MarkovChain(geom, s, up, down)


def channel_diagonal_agreement(chain: MarkovChain) -> float:
    """Max |diag E(|m><m|) - P[:, m]| over all basis states m."""
    from .channel import apply_channel_polarized

    geom = chain.geom
    p = chain.P
    worst = 0.0
    for i, m in enumerate(geom.m_values):
        out = apply_channel_polarized(basis_state(geom, m), chain.s_z, geom)
        worst = max(worst, float(np.max(np.abs(np.real(np.diag(out)) - p[:, i]))))
        worst = max(worst, float(np.max(np.abs(out - np.diag(np.diag(out))))))
    return worst


def log_stationary_weights(geom: ReferenceGeometry, s_z: float) -> np.ndarray:
    """Unnormalized log P_m = beta m with beta = ln((1 + 2s)/(1 - 2s)); |s| < 1/2."""
    beta = math.log((1 + 2 * s_z) / (1 - 2 * s_z))
    return beta * geom.m_values


def stationary_distribution(chain: MarkovChain) -> np.ndarray:
    """Equilibrium populations fixed by detailed balance.

    P_{m+1}/P_m = (1 + 2 s_z)/(1 - 2 s_z): the reference aligns with the
    source. At |s_z| = 1/2 the chain is absorbing and the point mass at
    m = sign(s_z) l is returned.
    """
    d = chain.geom.d
    if chain.degenerate:
        p = np.zeros(d)
        p[-1 if chain.s_z > 0 else 0] = 1.0
        return p
    logw = log_stationary_weights(chain.geom, chain.s_z)
    return np.exp(logw - logsumexp(logw))


def stationary_by_power_iteration(chain: MarkovChain, tol: float = 1e-15, max_iter: int = 10**7) -> np.ndarray:
    """Fixed vector of P found by repeated application; independent of detailed balance."""
    p = np.full(chain.geom.d, 1 / chain.geom.d)
    for _ in range(max_iter):
        nxt = chain.step(p)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - p)) < tol:
            return nxt
        p = nxt
    raise RuntimeError("power iteration did not converge")


def symmetrized_bands(chain: MarkovChain):
    """Diagonal and off-diagonal of W = D^-1 P D, D = diag(sqrt(P_m)).

    The off-diagonal sqrt(P_{m+1|m} P_{m|m+1}) avoids forming D, whose
    entries under- or overflow once beta * l is large.
    """
    if chain.degenerate:
        raise ValidationError("the |s_z| = 1/2 chain is absorbing and has no symmetrized form")
    return chain.stay, np.sqrt(chain.up * chain.down)


def symmetrized_matrix(chain: MarkovChain) -> np.ndarray:
    diag, off = symmetrized_bands(chain)
    d = chain.geom.d
    w = np.diag(diag)
    idx = np.arange(d - 1)
    w[idx + 1, idx] = off
    w[idx, idx + 1] = off
    return w


def symmetrized_matrix_explicit(chain: MarkovChain) -> np.ndarray:
    """W = D^-1 P D computed literally (for moderate beta * l only)."""
    sq = np.sqrt(stationary_distribution(chain))
    return (chain.P * sq[None, :]) / sq[:, None]


def w_eigenvalues(chain: MarkovChain) -> np.ndarray:
    """Eigenvalues of W in decreasing order."""
    diag, off = symmetrized_bands(chain)
    if chain.geom.d > TRIDIAGONAL_SOLVER_MIN_DIM:
        ev = eigh_tridiagonal(diag, off, eigvals_only=True)
    else:
        ev = np.linalg.eigvalsh(symmetrized_matrix(chain))
    return ev[::-1]


@dataclass(frozen=True)
class SpectralGap:
    gap: float
    relaxation_time: float
    lambda1: float
    lambda2: float


def spectral_gap(chain: MarkovChain) -> SpectralGap:
    ev = w_eigenvalues(chain)
    gap = 1 - ev[1]
    return SpectralGap(float(gap), float(1 / gap), float(ev[0]), float(ev[1]))


@dataclass(frozen=True)
class AntiparallelHittingTime:
    exact_sum: float
    closed_form: float


def _hitting_terms(geom: ReferenceGeometry) -> np.ndarray:
    m = geom.m_values[:-1]
    return 2 / (1 - ((2 * m + 1) / geom.d) ** 2)


def hitting_time_antiparallel(geom: ReferenceGeometry) -> AntiparallelHittingTime:
    """Mean number of uses to go from |l,-l> to |l,l> under a fully polarized source.

    At s_z = 1/2 the chain only climbs, so the mean is the sum of the mean
    waiting times 1/P_{m+1|m} at each level.
    """
    d = geom.d
    closed = d * math.log(d - 1) if d > 2 else float("nan")
    return AntiparallelHittingTime(float(np.sum(_hitting_terms(geom))), closed)


@dataclass(frozen=True)
class RelaxedHittingTime:
    epsilon: float
    truncated_sum: float
    closed_form: float
    empirical: float
    start_m: float
    target_m: float


def expected_hitting_time_by_iteration(chain: MarkovChain, start_index: int, target_index: int,
                                       tol: float = 1e-13, max_steps: int = 10**8) -> float:
    """Mean first time the chain reaches index >= target_index, by propagating the survival mass.

    E[T] = sum_t Prob(T > t); the region at and above the target is made absorbing.
    """
    d = chain.geom.d
    p = np.zeros(d)
    p[start_index] = 1.0
    total = 0.0
    for _ in range(max_steps):
        alive = p[:target_index].sum()
        if alive < tol:
            return total
        total += alive
        p = chain.step(p)
        p[target_index] += p[target_index + 1:].sum()
        p[target_index + 1:] = 0.0
    raise RuntimeError("hitting-time iteration did not converge")


def hitting_time_epsilon(geom: ReferenceGeometry, epsilon: float) -> RelaxedHittingTime:
    """Hitting time with the endpoints relaxed to |<L_z>/l| <= 1 - epsilon.

    Reports the truncated waiting-time sum over levels with
    |(2m+1)/d| <= 1 - epsilon, its closed form d ln(2/epsilon - 1), and the
    mean first time a fully polarized source carries the chain from the
    highest level with m/l <= -(1 - epsilon) to m/l >= 1 - epsilon.
    """
    eps = float(epsilon)
    if not 0 < eps < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
    d = geom.d
    ell = geom.ell
    m_all = geom.m_values
    m = m_all[:-1]
    keep = np.abs((2 * m + 1) / d) <= 1 - eps + 1e-12
    truncated = float(np.sum(_hitting_terms(geom)[keep]))
    closed = d * math.log(2 / eps - 1)

    start = int(np.nonzero(m_all / ell <= -(1 - eps) + 1e-12)[0].max())
    target = int(np.nonzero(m_all / ell >= 1 - eps - 1e-12)[0].min())
    chain = transition_matrix(geom, 0.5)
    empirical = expected_hitting_time_by_iteration(chain, start, target)
    return RelaxedHittingTime(eps, truncated, closed, empirical, float(m_all[start]), float(m_all[target]))


def longevity_lower_bound(geom: ReferenceGeometry, s_z: float) -> float:
    """Order-of-magnitude lower bound on the uses needed to disturb the reference.

    Fluctuations dominate (l^2) when |s_z| < 1/l, drift (l / 2|s_z|) otherwise.
    """
    s = abs(_check_sz(s_z))
    ell = geom.ell
    if s < 1 / ell:
        return ell * ell
    return ell / (2 * s)
