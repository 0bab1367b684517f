import math

import numpy as np
import pytest

from qgyro.errors import ValidationError
from qgyro.measurement import (
    figure_of_merit,
    ideal_projectors,
    induced_povm,
    induced_povm_partial_trace,
    j_squared,
    longevity,
    outcome_probabilities,
    total_projectors,
    total_spin_ops,
)
from qgyro.spin import (
    ReferenceGeometry,
    SourceState,
    basis_state,
    coherent_state,
    maximally_mixed,
    random_density_matrix,
    random_source,
)


def test_projectors_complete_and_idempotent(small_geom):
    p = total_projectors(small_geom)
    n = 2 * small_geom.d
    np.testing.assert_allclose(p.pi_plus + p.pi_minus, np.eye(n), atol=1e-14)
    np.testing.assert_allclose(p.pi_plus @ p.pi_plus, p.pi_plus, atol=1e-13)
    np.testing.assert_allclose(p.pi_plus @ p.pi_minus, 0, atol=1e-13)
    assert np.trace(p.pi_plus).real == pytest.approx(small_geom.d + 1)


def test_projectors_match_total_spin(small_geom):
    ell = small_geom.ell
    jx, jy, jz = total_spin_ops(small_geom)
    j2 = jx @ jx + jy @ jy + jz @ jz
    np.testing.assert_allclose(j_squared(small_geom), j2, atol=1e-12)
    np.testing.assert_allclose(j2 @ total_projectors(small_geom).pi_plus,
                               (ell + 0.5) * (ell + 1.5) * total_projectors(small_geom).pi_plus, atol=1e-12)


def test_highest_weight_in_upper_sector():
    g = ReferenceGeometry(5)
    v = np.kron(basis_state(g, g.ell)[:, -1], [0, 1])
    np.testing.assert_allclose(total_projectors(g).pi_plus @ v, v, atol=1e-14)


def test_spin_half_triplet_singlet():
    ev = np.linalg.eigvalsh(total_projectors(ReferenceGeometry(1)).pi_plus)
    np.testing.assert_allclose(np.sort(ev), [0, 1, 1, 1], atol=1e-14)


def test_povm_of_mixed_state():
    g = ReferenceGeometry(6)
    p = induced_povm(maximally_mixed(g), g)
    np.testing.assert_allclose(p.lambda_plus, 4 / 7 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(p.lambda_minus, 3 / 7 * np.eye(2), atol=1e-15)


def test_povm_closed_form_matches_partial_trace(rng):
    g = ReferenceGeometry(6)
    for _ in range(10):
        rho = random_density_matrix(g.d, rng)
        a = induced_povm(rho, g)
        b = induced_povm_partial_trace(rho, g)
        assert np.max(np.abs(a.lambda_plus - b.lambda_plus)) < 1e-12
        assert np.max(np.abs(a.lambda_minus - b.lambda_minus)) < 1e-12


def test_ideal_projectors():
    p = ideal_projectors([0, 0, 1])
    np.testing.assert_allclose(p.lambda_plus, np.diag([0, 1]), atol=1e-15)
    np.testing.assert_allclose(p.lambda_minus, np.diag([1, 0]), atol=1e-15)
    np.testing.assert_allclose(p.lambda_plus @ p.lambda_minus, 0, atol=1e-15)
    px = ideal_projectors([1, 0, 0])
    v = np.array([1, 1]) / math.sqrt(2)
    np.testing.assert_allclose(px.lambda_plus @ v, v, atol=1e-15)
    np.testing.assert_allclose(px.lambda_minus @ v, 0, atol=1e-15)
    with pytest.raises(ValidationError):
        ideal_projectors([1, 1, 0])


def test_figure_of_merit_examples():
    g = ReferenceGeometry(4)
    assert figure_of_merit(maximally_mixed(g), [0.6, 0, 0.8], g) == pytest.approx(0.5)
    assert figure_of_merit(coherent_state(g, 0), [0, 0, 1], g) == pytest.approx(0.5 * (1 + 4 / 5))
    assert figure_of_merit(coherent_state(ReferenceGeometry(1), 0), [0, 0, 1]) == pytest.approx(0.75)
    assert figure_of_merit(coherent_state(g, 0), [1, 0, 0], g) == pytest.approx(0.5, abs=1e-12)


def test_outcome_probabilities_examples():
    g = ReferenceGeometry(5)
    up = SourceState.polarized_z(0.5)
    p_plus, p_minus = outcome_probabilities(basis_state(g, g.ell), up, g)
    assert (p_plus, p_minus) == (pytest.approx(1, abs=1e-14), pytest.approx(0, abs=1e-14))
    p = outcome_probabilities(maximally_mixed(g), SourceState.unpolarized(), g)
    d = g.d
    assert p == (pytest.approx((d + 1) / (2 * d)), pytest.approx((d - 1) / (2 * d)))


def test_outcome_probabilities_consistent_with_povm(rng, small_geom):
    for _ in range(5):
        rho = random_density_matrix(small_geom.d, rng)
        xi = random_source(rng)
        pp, pm = outcome_probabilities(rho, xi, small_geom)
        povm = induced_povm(rho, small_geom)
        assert pp == pytest.approx(np.trace(povm.lambda_plus @ xi.matrix()).real, abs=1e-12)
        assert pp + pm == pytest.approx(1, abs=1e-12)


def test_longevity_exceeds_budget_for_aligned_source():
    g = ReferenceGeometry(40)
    rho0 = coherent_state(g, 0)
    assert longevity(rho0, SourceState.polarized_z(0.25), [0, 0, 1], 0.9, 2000, g) == math.inf


def test_longevity_antiparallel_is_finite():
    g = ReferenceGeometry(20)
    t = longevity(coherent_state(g, 0), SourceState.polarized_z(-0.5), [0, 0, 1], 0.6, 10**5, g)
    assert 0 < t < 10**5


def test_longevity_validation():
    g = ReferenceGeometry(4)
    with pytest.raises(ValidationError):
        longevity(coherent_state(g, 0), SourceState.unpolarized(), [0, 0, 1], 0.4, 10, g)
    with pytest.raises(ValidationError):
        longevity(maximally_mixed(g), SourceState.unpolarized(), [0, 0, 1], 0.6, 10, g)
