import numpy as np
import pytest
from hypothesis import given, strategies as st

from dmaloc.geometry import ArrayGeometry, CarrierConfig
from dmaloc.hardware import (CombinerMatrix, WaveguideConfig, assemble_combiner,
                             lorentzian_weight, map_to_lorentzian, propagation_matrix,
                             wrap_phase)
from oracles import dense_combiner

LAM = 299_792_458.0 / 140e9


def test_propagation_first_element_is_one():
    g = ArrayGeometry(2, 4, LAM / 2, LAM / 5)
    wg = WaveguideConfig.default(g, CarrierConfig(LAM), alpha=0.3)
    p = propagation_matrix(g, wg)
    assert p[0] == 1 and p[4] == 1


def test_propagation_pure_phase():
    g = ArrayGeometry(1, 2, 1.0, 1.0)
    wg = WaveguideConfig(alpha=[0.0], beta=[np.pi], rho=[[0.0, 1.0]])
    assert propagation_matrix(g, wg)[1] == pytest.approx(-1.0)


def test_propagation_lossy_entry():
    g = ArrayGeometry(1, 2, LAM, LAM)
    wg = WaveguideConfig(alpha=[0.5], beta=[2 * np.pi / LAM], rho=[[0.0, LAM]])
    p = propagation_matrix(g, wg)[1]
    assert abs(p) == pytest.approx(np.exp(-0.5 * LAM))
    assert np.angle(p) == pytest.approx(0.0, abs=1e-12)   # -2 pi wraps to 0


def test_propagation_is_passive():
    rng = np.random.default_rng(3)
    g = ArrayGeometry(3, 6, 0.01, 0.01)
    rho = np.cumsum(np.c_[np.zeros(3), rng.uniform(0.001, 0.01, (3, 5))], axis=1)
    wg = WaveguideConfig(rng.uniform(0, 5, 3), rng.uniform(1, 3000, 3), rho)
    assert np.all(np.abs(propagation_matrix(g, wg)) <= 1.0)


def test_waveguide_validation():
    with pytest.raises(ValueError):
        WaveguideConfig([-1.0], [1.0], [[0.0, 1.0]])
    with pytest.raises(ValueError):
        WaveguideConfig([0.0], [1.0], [[0.1, 1.0]])
    with pytest.raises(ValueError):
        WaveguideConfig([0.0], [1.0], [[0.0, 0.0]])
    g = ArrayGeometry(2, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        propagation_matrix(g, WaveguideConfig([0.0], [1.0], [[0.0, 1.0]]))


@pytest.mark.parametrize("phi,expected", [(np.pi / 2, 1j), (-np.pi / 2, 0), (0.0, 0.5 + 0.5j)])
def test_lorentzian_examples(phi, expected):
    assert lorentzian_weight(phi) == pytest.approx(expected, abs=1e-16)


def test_lorentzian_rejects_out_of_range():
    with pytest.raises(ValueError):
        lorentzian_weight(2.0)


@given(st.floats(-np.pi / 2, np.pi / 2))
def test_lorentzian_circle_and_magnitude(phi):
    w = lorentzian_weight(phi)
    assert abs(abs(w - 0.5j) - 0.5) <= 1e-15
    assert abs(w) == pytest.approx(np.cos((np.pi / 2 - phi) / 2), abs=1e-15)


def test_wrap_phase():
    assert wrap_phase(np.pi) == pytest.approx(np.pi)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def test_map_examples():
    assert map_to_lorentzian(1.0, 0.0, 5.0) == pytest.approx(0.5 + 0.5j)
    assert map_to_lorentzian(np.exp(1j * np.pi / 4), 1.0, np.pi / 4) == pytest.approx(1j)


def test_map_clamps_to_nearest_endpoint():
    # composite phase 3pi/4 -> pi/2 ; -3pi/4 -> -pi/2
    assert map_to_lorentzian(np.exp(1j * np.pi / 2), 1.0, np.pi / 4) == pytest.approx(1j)
    assert map_to_lorentzian(np.exp(-1j * np.pi / 2), 1.0, -np.pi / 4) == pytest.approx(0, abs=1e-16)


def test_map_rejects_non_unit_modulus():
    with pytest.raises(ValueError):
        map_to_lorentzian(0.5, 0.0, 1.0)


def test_map_stays_on_circle():
    rng = np.random.default_rng(4)
    w_t = np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2, 1000))
    w = map_to_lorentzian(w_t, rng.uniform(0, 0.1, 1000), rng.uniform(1, 3000, 1000))
    np.testing.assert_allclose(np.abs(w - 0.5j), 0.5, atol=1e-15)


def test_assemble_structure_example():
    g = ArrayGeometry(2, 2, 1.0, 1.0)
    dense = assemble_combiner(g, np.full((2, 2), 1j)).dense()
    np.testing.assert_array_equal(dense, [[1j, 0], [1j, 0], [0, 1j], [0, 1j]])


def test_assemble_matches_indicator_rule():
    rng = np.random.default_rng(5)
    g = ArrayGeometry(3, 4, 1.0, 1.0)
    w = lorentzian_weight(rng.uniform(-np.pi / 2, np.pi / 2, (3, 4)))
    comb = assemble_combiner(g, w)
    dense = comb.dense()
    np.testing.assert_array_equal(dense, dense_combiner(3, 4, w))
    mask = dense_combiner(3, 4, np.ones((3, 4))) == 0
    assert np.count_nonzero(dense[mask]) == 0
    x = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    np.testing.assert_allclose(comb.hermitian_apply(x), dense.conj().T @ x, rtol=1e-14)


def test_assemble_dimension_mismatch():
    with pytest.raises(ValueError):
        assemble_combiner(ArrayGeometry(2, 3, 1.0, 1.0), np.ones((3, 2)))


def test_combiner_stack_apply():
    rng = np.random.default_rng(6)
    w = rng.standard_normal((5, 2, 3)) + 1j * rng.standard_normal((5, 2, 3))
    x = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    got = CombinerMatrix(w).hermitian_apply(x)
    for t in range(5):
        np.testing.assert_allclose(got[t], CombinerMatrix(w[t]).dense().conj().T @ x[t])
