"""Back-action channel on the reference and its iteration.

Four independent routes to the same map are kept side by side:

* ``apply_channel_polarized``: the z-aligned closed form, O(d^2) per call
  because L_z is diagonal and L_+- are single off-diagonals.
* ``apply_channel``: arbitrary source polarization, by rotating the frame so
  that <S> lies along +z and using the closed form there.
* ``apply_channel_direct``: the L.S form with the source partial trace
  carried out through the 2x2 coefficients Tr(S_i xi S_j).
* ``brute_force_step``: projectors on the 2d-dimensional joint space,
  followed by a literal partial trace. This is the reference oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MemoryBudgetError, ValidationError
from .measurement import partial_trace_source, total_projectors
from .spin import (
    ReferenceGeometry,
    SourceState,
    angular_momentum_ops,
    check_density_matrix,
    check_positive,
    expectations,
    geometry_of,
    ladder_coefficients,
    polar_angle,
    rotation_operator,
    spin_half_ops,
)

DEFAULT_MEMORY_BUDGET = 512 * 2**20  # bytes of recorded states


def _check_sz(s_z: float) -> float:
    s_z = float(s_z)
    if not abs(s_z) <= 0.5 + 1e-12:
        raise ValidationError(f"|s_z| must be <= 1/2, got {s_z}")
    return max(-0.5, min(0.5, s_z))


def _finish(out: np.ndarray, validate: bool) -> np.ndarray:
    if validate:
        check_positive(out)
    return out


def apply_channel_polarized(rho, s_z: float, geom: ReferenceGeometry | None = None,
                            validate: bool = True) -> np.ndarray:
    """Channel for a source polarized along z with <S_z> = s_z.

    Works on any d x d operator when ``validate`` is False (the map is linear),
    which is how the off-diagonal bands are studied.
    """
    s = _check_sz(s_z)
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    if validate:
        check_density_matrix(rho, geom)
    d = geom.d
    d2 = d * d
    c = ladder_coefficients(geom)
    shifted = geom.m_values + s

    out = (0.5 + (1 - 4 * s * s) / (2 * d2)) * rho
    out += (2 / d2) * np.outer(shifted, shifted) * rho
    cc = np.outer(c, c)
    # L_+ rho L_-  ->  c_{i-1} c_{j-1} rho[i-1, j-1]
    out[1:, 1:] += ((1 + 2 * s) / d2) * cc * rho[:-1, :-1]
    # L_- rho L_+  ->  c_i c_j rho[i+1, j+1]
    out[:-1, :-1] += ((1 - 2 * s) / d2) * cc * rho[1:, 1:]
    return _finish(out, validate)


def source_frame(xi: SourceState, geom: ReferenceGeometry):
    """(|<S>|, V) with V the reference rotation carrying +z onto <S>.

    V is None when the source is already polarized along the z axis.
    """
    v = xi.vector
    s = float(np.linalg.norm(v))
    if np.hypot(v[0], v[1]) == 0.0:
        return float(v[2]), None
    alpha = np.arctan2(np.hypot(v[0], v[1]), v[2])
    phi = np.arctan2(v[1], v[0])
    return s, rotation_operator(geom, alpha, phi)


def apply_channel(rho, xi: SourceState, geom: ReferenceGeometry | None = None,
                  validate: bool = True) -> np.ndarray:
    """One use of the reference: E_xi(rho) for an arbitrary source polarization."""
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    if validate:
        check_density_matrix(rho, geom)
    s, v = source_frame(xi, geom)
    if v is None:
        return apply_channel_polarized(rho, s, geom, validate=validate)
    vh = v.conj().T
    out = v @ apply_channel_polarized(vh @ rho @ v, s, geom, validate=False) @ vh
    return _finish(out, validate)


def apply_channel_direct(rho, xi: SourceState, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """L.S form: (1/2 + 1/2d^2) rho + 8/d^2 Tr_S[(L.S)(rho x xi)(L.S)] + 2/d^2 {L.<S>, rho}."""
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    d2 = geom.d ** 2
    L = angular_momentum_ops(geom).vector
    S = spin_half_ops().vector
    xim = xi.matrix()
    out = (0.5 + 0.5 / d2) * rho
    for i in range(3):
        for j in range(3):
            coef = np.trace(S[i] @ xim @ S[j])
            if coef != 0:
                out = out + (8 / d2) * coef * (L[i] @ rho @ L[j])
    ls = sum(c * li for c, li in zip(xi.bloch, L))
    out = out + (2 / d2) * (ls @ rho + rho @ ls)
    return out


def brute_force_step(rho, xi: SourceState, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """Tr_S(Pi_+ (rho x xi) Pi_+ + Pi_- (rho x xi) Pi_-) on the joint space."""
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    p = total_projectors(geom)
    joint = np.kron(rho, xi.matrix())
    post = p.pi_plus @ joint @ p.pi_plus + p.pi_minus @ joint @ p.pi_minus
    return partial_trace_source(post, geom.d)


def joint_post_measurement(rho, xi: SourceState, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """Joint reference-source state after the unread J^2 measurement."""
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    p = total_projectors(geom)
    joint = np.kron(rho, xi.matrix())
    return p.pi_plus @ joint @ p.pi_plus + p.pi_minus @ joint @ p.pi_minus


@dataclass(frozen=True)
class KrausSet:
    operators: tuple
    s_z: float
    theta: float

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(e @ rho @ e.conj().T for e in self.operators)

    def completeness_residual(self) -> float:
        d = self.operators[0].shape[0]
        total = sum(e.conj().T @ e for e in self.operators)
        return float(np.max(np.abs(total - np.eye(d))))


def rotated_generators(geom: ReferenceGeometry, theta: float):
    """(L_x^t, L_y^t, L_z^t) = (cos t L_x - sin t L_z, L_y, sin t L_x + cos t L_z)."""
    L = angular_momentum_ops(geom)
    ct, st = np.cos(theta), np.sin(theta)
    return ct * L.L_x - st * L.L_z, L.L_y, st * L.L_x + ct * L.L_z


def kraus_operators(s_z: float, theta: float, geom: ReferenceGeometry) -> KrausSet:
    """Four Kraus operators of the z-polarized channel written in the frame tilted by theta.

    The map they generate does not depend on theta; theta only chooses the
    operator basis (normally the reference's own polar angle).
    """
    s = _check_sz(s_z)
    d = geom.d
    lx, ly, lz = rotated_generators(geom, theta)
    eye = np.eye(d, dtype=complex)
    ct, st = np.cos(theta), np.sin(theta)
    ops = (
        np.sqrt(d * d + 1 - 4 * s * s) * eye,
        2j * np.sqrt(1 - 4 * s * s) * ly,
        2 * lz + 4j * s * st * ly + 2 * s * ct * eye,
        2 * lx + 4j * s * ct * ly - 2 * s * st * eye,
    )
    scale = 1 / (d * np.sqrt(2))
    return KrausSet(tuple(scale * e for e in ops), s, float(theta))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    L_exp: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    merit: np.ndarray | None = None
    states: list | None = field(default=None, repr=False)
    final: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)


def _frame_rotation_matrix(v_half: np.ndarray) -> np.ndarray:
    """SO(3) matrix R with V^dag S_i V = sum_j R_ji S_j for the spin-1/2 rotation V."""
    S = spin_half_ops().vector
    return np.array([[2 * np.real(np.trace(S[i] @ v_half @ S[j] @ v_half.conj().T)) for j in range(3)]
                     for i in range(3)])


def iterate(rho0, xi: SourceState, steps: int, record_states: bool = False,
            geom: ReferenceGeometry | None = None, n_hat=None,
            memory_budget: int = DEFAULT_MEMORY_BUDGET, check_every: int = 1,
            stop=None) -> TrajectoryRecord:
    """Apply the channel ``steps`` times, recording <L>, r, theta after every use.

    The state is propagated in the frame where the source points along +z,
    so each step costs O(d^2); observables are rotated back to the lab frame.
    ``stop(t, L_exp)`` may end the run early by returning True.
    """
    if isinstance(steps, bool) or int(steps) != steps or steps < 0:
        raise ValidationError(f"steps must be a non-negative integer, got {steps!r}")
    steps = int(steps)
    rho0 = np.asarray(rho0, dtype=complex)
    geom = geometry_of(rho0, geom)
    rho0 = check_density_matrix(rho0, geom)
    d = geom.d
    if record_states:
        need = 16 * d * d * (steps + 1)
        if need > memory_budget:
            raise MemoryBudgetError(
                f"recording {steps + 1} states of dim {d} needs {need} bytes, budget is {memory_budget}"
            )
    n = None if n_hat is None else np.asarray(n_hat, dtype=float)

    s, v = source_frame(xi, geom)
    if v is None:
        rot = np.eye(3)
        rho = rho0.copy()
    else:
        # spin-1/2 copy of the same rotation gives the SO(3) matrix for <L>
        from .spin import SPIN_HALF
        vec = xi.vector
        alpha = np.arctan2(np.hypot(vec[0], vec[1]), vec[2])
        phi = np.arctan2(vec[1], vec[0])
        rot = _frame_rotation_matrix(rotation_operator(SPIN_HALF, alpha, phi))
        rho = v.conj().T @ rho0 @ v

    lexp = np.empty((steps + 1, 3))
    states = [] if record_states else None
    t_end = steps
    for t in range(steps + 1):
        if t > 0:
            rho = apply_channel_polarized(rho, s, geom, validate=False)
            if check_every and t % check_every == 0:
                check_positive(rho)
        lexp[t] = rot @ expectations(rho, geom)
        if record_states:
            states.append(rho.copy() if v is None else v @ rho @ v.conj().T)
        if stop is not None and stop(t, lexp[t]):
            t_end = t
            break
    lexp = lexp[: t_end + 1]
    r = np.linalg.norm(lexp, axis=1) / (geom.ell + 0.5)
    theta = np.array([polar_angle(x) for x in lexp])
    merit = None if n is None else 0.5 * (1 + lexp @ n / (geom.ell + 0.5))
    final = rho if v is None else v @ rho @ v.conj().T
    return TrajectoryRecord(np.arange(t_end + 1), lexp, r, theta, merit, states, final)


def channel_power(rho, xi: SourceState, steps: int, geom: ReferenceGeometry | None = None) -> np.ndarray:
    """E_xi^steps(rho), without recording the path."""
    rho = np.asarray(rho, dtype=complex)
    geom = geometry_of(rho, geom)
    s, v = source_frame(xi, geom)
    if v is not None:
        rho = v.conj().T @ rho @ v
    for _ in range(steps):
        rho = apply_channel_polarized(rho, s, geom, validate=False)
    if v is not None:
        rho = v @ rho @ v.conj().T
    return rho

