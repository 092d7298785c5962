import math

import numpy as np
import pytest

from exceptions.numerics_exceptions import GridMismatch, GridTooCoarse
from models.grid import Grid1D
from utils.quadrature import compensated_mean, gauss_cell_integrals, gregory_weights
from utils.random_streams import block_generators, draw_normals, path_generator


def test_gregory_rule_is_exact_for_cubics():
    grid = Grid1D.line(1.0, 41)
    values = 1.0 + grid.nodes - 2.0 * grid.nodes ** 2 + 3.0 * grid.nodes ** 3
    assert grid.integrate(values) == pytest.approx(2.0 - 4.0 / 3.0, abs=1e-13)


def test_torus_rule_integrates_trigonometric_polynomials():
    grid = Grid1D.torus(1.0, 64)
    values = np.cos(2 * np.pi * grid.nodes) ** 2
    assert grid.integrate(values) == pytest.approx(0.5, abs=1e-14)


def test_integrate_keeps_trailing_axes():
    grid = Grid1D.half_line(0.0, 2.0, 33)
    values = np.stack([np.ones(grid.size), grid.nodes], axis=1)
    np.testing.assert_allclose(grid.integrate(values), [2.0, 2.0], atol=1e-13)


def test_periodic_interpolation_wraps():
    grid = Grid1D.torus(1.0, 16)
    values = grid.nodes.copy()
    assert grid.interpolate(values, np.array(1.0 + grid.nodes[3])) == pytest.approx(grid.nodes[3])


def test_trusted_mask_drops_boundary_cells():
    grid = Grid1D.line(4.0, 21)
    mask = grid.trusted_mask()
    assert not mask[:2].any() and not mask[-2:].any() and mask[2:-2].all()


def test_grid_validation():
    with pytest.raises(GridTooCoarse):
        Grid1D.line(1.0, 5)
    with pytest.raises(GridMismatch):
        Grid1D.line(1.0, 9).integrate(np.ones(10))
    with pytest.raises(ValueError):
        gregory_weights(5, 0.1)


def test_gauss_cells_integrate_exponential():
    edges = np.linspace(0.0, 1.0, 5)
    total = gauss_cell_integrals(np.exp, edges).sum()
    assert total == pytest.approx(math.e - 1.0, rel=1e-14)


def test_compensated_mean():
    values = np.array([1e16, 1.0, -1e16, 1.0])
    assert compensated_mean(values) == pytest.approx(0.5)
    assert math.isnan(compensated_mean(np.array([])))


def test_path_streams_do_not_depend_on_blocking():
    whole = draw_normals(block_generators(7, 0, 6), 5, 2)
    first = draw_normals(block_generators(7, 0, 3), 5, 2)
    second = draw_normals(block_generators(7, 3, 3), 5, 2)
    np.testing.assert_array_equal(whole, np.concatenate([first, second]))


def test_path_streams_continue_across_chunks():
    one = path_generator(3, 11).standard_normal((8, 1))
    generator = path_generator(3, 11)
    two = np.concatenate([generator.standard_normal((4, 1)), generator.standard_normal((4, 1))])
    np.testing.assert_array_equal(one, two)
    assert not np.array_equal(one, path_generator(4, 11).standard_normal((8, 1)))
