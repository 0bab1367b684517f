import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgyro.errors import ValidationError
from qgyro.markov import stationary_distribution, transition_matrix
from qgyro.spin import ReferenceGeometry, SourceState, maximally_mixed
from qgyro.thermo import (
    asymptotic_merit,
    bath_entropy,
    inverse_temperature,
    log_partition_function,
    partition_function,
    symmetric_subspace_state,
    thermal_curve,
    thermal_fixed_point_residual,
    thermal_Lz,
    thermal_populations,
    thermal_state,
    transition_width,
)


def test_inverse_temperature():
    assert inverse_temperature(0) == 0
    assert inverse_temperature(0.25) == pytest.approx(math.log(3))
    assert inverse_temperature(-0.3) == -inverse_temperature(0.3)
    assert inverse_temperature(0.5) == math.inf
    with pytest.raises(ValidationError):
        inverse_temperature(0.6)


def test_bath_entropy():
    assert bath_entropy(0) == pytest.approx(1)
    assert bath_entropy(0.5) == 0
    assert bath_entropy(0.25) == pytest.approx(0.8112781245, abs=1e-9)


def test_partition_function_limits():
    g = ReferenceGeometry(9)
    assert partition_function(0.0, g) == 10
    assert partition_function(1e-9, g) == pytest.approx(10, rel=1e-12)
    assert partition_function(0.7, g) == partition_function(-0.7, g)


@pytest.mark.parametrize("t", range(1, 21))
def test_partition_function_matches_geometric_sum(t):
    g = ReferenceGeometry(t)
    for beta in (-2.0, -0.3, 0.05, 1.1, 4.0):
        direct = np.sum(np.exp(-beta * g.m_values))
        assert partition_function(beta, g) == pytest.approx(direct, rel=1e-12)


def test_log_partition_function_large_argument():
    g = ReferenceGeometry(4000)
    beta = 3.0
    expected = beta * g.ell - math.log1p(-math.exp(-beta))
    assert log_partition_function(beta, g) == pytest.approx(expected, rel=1e-14)


def test_thermal_state_examples():
    g = ReferenceGeometry(7)
    np.testing.assert_allclose(thermal_state(0.0, g), maximally_mixed(g), atol=1e-15)
    half = ReferenceGeometry(1)
    np.testing.assert_allclose(np.diag(thermal_state(0.3, half)).real, [0.2, 0.8], atol=1e-15)
    np.testing.assert_allclose(thermal_state(0.3, half), SourceState.polarized_z(0.3).matrix(), atol=1e-15)


@pytest.mark.parametrize("t", [4, 20, 40, 80])
@pytest.mark.parametrize("s", [-0.45, 0.0, 0.1, 0.25, 0.4, 0.5])
def test_thermal_state_is_fixed_point(t, s):
    assert thermal_fixed_point_residual(s, ReferenceGeometry(t)) < 1e-10


def test_thermal_matches_markov_stationary():
    for t in (20, 40, 80):
        for s in (0.0, 0.1, 0.25, 0.4):
            g = ReferenceGeometry(t)
            p = stationary_distribution(transition_matrix(g, s))
            assert 0.5 * np.abs(thermal_populations(s, g) - p).sum() < 1e-12


def test_thermal_lz_against_direct_sum():
    for t in (1, 5, 40, 161):
        g = ReferenceGeometry(t)
        for s in (1e-7, 1e-4, 0.003, 0.1, 0.3, 0.49):
            direct = float(thermal_populations(s, g) @ g.m_values)
            assert thermal_Lz(s, g) == pytest.approx(direct, rel=1e-10, abs=1e-13)


def test_thermal_lz_limits():
    g = ReferenceGeometry(40)
    assert thermal_Lz(0.5, g) == 20
    assert thermal_Lz(0.0, g) == 0
    s = 1e-4
    assert thermal_Lz(s, g) == pytest.approx(4 / 3 * s * 20 * 21, rel=0.01)


def test_asymptotic_merit_examples():
    g20 = ReferenceGeometry(40)
    m = asymptotic_merit(1e-5, g20)
    assert m.regime == "fluctuation"
    assert m.merit == pytest.approx(4 / 3 * 20 * 1e-5, rel=0.05)
    g100 = ReferenceGeometry(200)
    m = asymptotic_merit(0.1, g100)
    assert m.exponent_a == pytest.approx(0.5)
    assert m.merit >= 1 - 1 / (4 * math.sqrt(100))
    assert asymptotic_merit(0.5, g20).merit == pytest.approx(40 / 41)


def test_asymptotic_merit_monotone():
    for t in (4, 40, 160):
        g = ReferenceGeometry(t)
        vals = [asymptotic_merit(s, g).merit for s in np.linspace(0, 0.5, 101)]
        assert np.all(np.diff(vals) >= 0)


def test_thermal_curve_shape():
    for t in (40, 80, 160):
        g = ReferenceGeometry(t)
        s, y = thermal_curve(g, 201)
        assert np.max(np.abs(y + y[::-1])) <= 1e-12
        np.testing.assert_array_equal(s, -s[::-1])
        assert y[0] == -1 and y[-1] == 1
        assert np.all(np.diff(y) > 0)


def test_thermal_curve_slope_at_origin():
    h = 1e-7
    slopes = {x: thermal_Lz(h, ReferenceGeometry.from_ell(x)) / x / h for x in (20, 40, 80)}
    for x, v in slopes.items():
        assert v == pytest.approx(4 / 3 * (x + 1), rel=1e-6)


def test_transition_widths():
    w = [transition_width(ReferenceGeometry.from_ell(x)) for x in (20, 40, 80)]
    assert w[0] > w[1] > w[2]
    assert w[2] / w[0] == pytest.approx(0.25, abs=0.1)
    g = ReferenceGeometry(40)
    assert thermal_Lz(w[0] / 2, g) / 20 == pytest.approx(0.5, abs=1e-12)


def test_symmetric_subspace_examples():
    xi = SourceState((0.1, 0.2, -0.3))
    np.testing.assert_allclose(symmetric_subspace_state(xi, ReferenceGeometry(1)), xi.matrix(), atol=1e-15)
    g = ReferenceGeometry(2)
    np.testing.assert_allclose(symmetric_subspace_state(SourceState.polarized_z(0.25), g),
                               thermal_state(0.25, g), atol=1e-12)
    np.testing.assert_allclose(np.diag(thermal_state(0.25, g)).real, [1 / 13, 3 / 13, 9 / 13], atol=1e-15)
    for t in (3, 6):
        g = ReferenceGeometry(t)
        np.testing.assert_allclose(symmetric_subspace_state(SourceState.unpolarized(), g),
                                   maximally_mixed(g), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.floats(-0.49, 0.49))
def test_symmetric_subspace_equals_thermal(twice_ell, s):
    g = ReferenceGeometry(twice_ell)
    sym = symmetric_subspace_state(SourceState.polarized_z(s), g)
    assert np.max(np.abs(sym - thermal_state(s, g))) < 1e-12


def test_symmetric_subspace_size_limit():
    with pytest.raises(ValidationError):
        symmetric_subspace_state(SourceState.unpolarized(), ReferenceGeometry(13))
