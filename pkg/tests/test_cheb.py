import numpy as np
import pytest

from superbloch.cheb import CollocationGrid, differentiation_matrix, lobatto_points


def test_lobatto_endpoints():
    x = lobatto_points(9)
    assert x[0] == pytest.approx(1.0)
    assert x[-1] == pytest.approx(-1.0)
    assert np.all(np.diff(x) < 0)


def test_grid_nodes_ascending():
    g = CollocationGrid(2.0, 21)
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == 2.0
    assert np.all(np.diff(g.nodes) > 0)


def test_polynomial_differentiation_exact():
    g = CollocationGrid(1.0, 17)
    f = g.nodes ** 5 - 2 * g.nodes ** 2
    df = g.derivative(f)
    assert np.max(np.abs(df - (5 * g.nodes ** 4 - 4 * g.nodes))) < 1e-10


def test_matrix_valued_differentiation():
    g = CollocationGrid(1.0, 25)
    base = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    samples = np.array([np.sin(3 * s) * base for s in g.nodes])
    ds = g.derivative(samples)
    expected = np.array([3 * np.cos(3 * s) * base for s in g.nodes])
    assert np.max(np.abs(ds - expected)) < 1e-9


def test_second_derivative():
    g = CollocationGrid(1.0, 33)
    f = np.exp(g.nodes)
    assert np.max(np.abs(g.derivative(f, 2) - f)) < 1e-8


def test_barycentric_interpolation():
    g = CollocationGrid(1.0, 25)
    f = np.cos(4 * g.nodes)
    for s in (0.1234, 0.5, 0.987):
        assert g.evaluate(f, s) == pytest.approx(np.cos(4 * s), abs=1e-10)
    # exact node hit returns the sample
    assert g.evaluate(f, g.nodes[7]) == pytest.approx(f[7], abs=1e-14)


def test_cumulative_integral_polynomial():
    g = CollocationGrid(1.0, 17)
    f = 3 * g.nodes ** 2
    integral = g.cumulative_integral(f)
    assert np.max(np.abs(integral.node_values - g.nodes ** 3)) < 1e-12
    assert integral(0.3) == pytest.approx(0.027, abs=1e-12)


def test_cumulative_integral_transcendental():
    g = CollocationGrid(2.0, 33)
    f = np.exp(-g.nodes) * np.cos(2 * g.nodes)
    integral = g.cumulative_integral(f)
    # antiderivative of exp(-s) cos(2s)
    exact = (np.exp(-g.nodes) * (2 * np.sin(2 * g.nodes)
                                 - np.cos(2 * g.nodes)) + 1.0) / 5.0
    assert np.max(np.abs(integral.node_values - exact)) < 1e-12


def test_differentiation_matrix_rowsum():
    d = differentiation_matrix(12)
    assert np.max(np.abs(d.sum(axis=1))) < 1e-12
