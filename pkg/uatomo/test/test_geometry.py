# UATomo performs ultrasound attenuation tomography with a passive reflector.
# Copyright (C) 2024 The UATomo Development Team
#
# This file is part of UATomo.
#
# UATomo is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# UATomo is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
# --
"""Unit tests for the module uatomo.geometry."""


import pytest
import numpy as np
from numpy.testing import assert_allclose, assert_equal

from ..geometry import (
    AcquisitionGeometry,
    DimensionError,
    ImagingGrid,
    all_rays,
    ray_angles,
    ray_for_pair,
    ray_lengths,
)


GEOM = AcquisitionGeometry(128, 3e-4, 0.030)


def test_geometry_properties():
    assert GEOM.nray == 16384
    assert_allclose(GEOM.aperture, 127 * 3e-4)
    assert_allclose(GEOM.positions[[0, 1, 127]], [0.0, 3e-4, 0.0381])
    assert_allclose(GEOM.max_incidence_angle, np.arctan(0.0381 / 0.06))


@pytest.mark.parametrize(
    "n_elements, pitch, depth",
    [(0, 3e-4, 0.03), (2.5, 3e-4, 0.03), (4, 0.0, 0.03), (4, 3e-4, -0.01)],
)
def test_geometry_invalid(n_elements, pitch, depth):
    with pytest.raises(ValueError):
        AcquisitionGeometry(n_elements, pitch, depth)


def test_normal_incidence():
    ray = ray_for_pair(GEOM, 0, 0)
    assert ray.incidence_angle == 0.0
    assert_allclose(ray.total_length, 0.06, rtol=1e-12)
    assert_allclose(ray.vertex, (0.0, 0.03))


def test_outermost_pair():
    ray = ray_for_pair(GEOM, 0, 127)
    assert_allclose(ray.incidence_angle, 0.5658, atol=1e-4)
    assert_allclose(ray.total_length, np.hypot(0.0381, 0.06), rtol=1e-12)
    assert_allclose(ray.total_length, 2 * 0.03 / np.cos(ray.incidence_angle), rtol=1e-12)
    assert_allclose(ray.vertex, (0.01905, 0.03))


def test_pair_symmetry():
    ray1 = ray_for_pair(GEOM, 3, 40)
    ray2 = ray_for_pair(GEOM, 40, 3)
    assert ray1.incidence_angle == ray2.incidence_angle
    assert ray1.total_length == ray2.total_length
    assert ray1.vertex == ray2.vertex
    assert (ray1.tx_index, ray1.rx_index) == (3, 40)


def test_segments():
    ray = ray_for_pair(GEOM, 2, 6)
    (start1, end1), (start2, end2) = ray.segments
    assert_allclose(start1, [6e-4, 0.0])
    assert_allclose(end1, ray.vertex)
    assert_allclose(start2, ray.vertex)
    assert_allclose(end2, [18e-4, 0.0])
    total = np.linalg.norm(end1 - start1) + np.linalg.norm(end2 - start2)
    assert_allclose(total, ray.total_length, rtol=1e-14)


@pytest.mark.parametrize("t, r", [(-1, 0), (0, 128), (128, 3)])
def test_pair_out_of_range(t, r):
    with pytest.raises(IndexError):
        ray_for_pair(GEOM, t, r)


def test_single_element():
    geom = AcquisitionGeometry(1, 3e-4, 0.02)
    rays = all_rays(geom)
    assert len(rays) == 1
    assert rays[0].incidence_angle == 0.0
    assert_allclose(rays[0].total_length, 0.04)


def test_vectorized_angles_and_lengths():
    geom = AcquisitionGeometry(7, 5e-4, 0.035)
    angles = ray_angles(geom)
    lengths = ray_lengths(geom)
    assert angles.shape == (7, 7)
    assert_equal(angles, angles.T)
    for ray in all_rays(geom):
        assert_allclose(angles[ray.tx_index, ray.rx_index], ray.incidence_angle)
        assert_allclose(lengths[ray.tx_index, ray.rx_index], ray.total_length)
    assert_allclose(lengths, 2 * geom.reflector_depth / np.cos(angles), rtol=1e-12)


def test_grid_from_geometry():
    grid = ImagingGrid.from_geometry(GEOM, 64, 32)
    assert grid.shape == (64, 32)
    assert grid.size == 2048
    assert_allclose(grid.width, GEOM.aperture)
    assert_allclose(grid.depth, GEOM.reflector_depth)
    assert grid.matches(GEOM)
    assert_allclose(grid.lateral_centers[0], grid.cell_width / 2)
    assert_allclose(grid.axial_centers[-1], grid.depth - grid.cell_height / 2)
    assert not ImagingGrid(64, 32, 1e-3, 1e-3).matches(GEOM)


def test_grid_refine():
    grid = ImagingGrid.from_geometry(GEOM, 8, 6)
    fine = grid.refine(4)
    assert fine.shape == (32, 24)
    assert_allclose([fine.width, fine.depth], [grid.width, grid.depth])
    assert grid.refine(1) == grid
    with pytest.raises(ValueError):
        grid.refine(0)


def test_grid_check_image():
    grid = ImagingGrid(3, 4, 1e-3, 1e-3)
    image = grid.check_image(np.arange(12))
    assert image.shape == (3, 4)
    # Flat index is iaxial * n_lateral + ilateral.
    assert image[1, 2] == 6
    with pytest.raises(DimensionError):
        grid.check_image(np.zeros(11))


def test_grid_invalid():
    with pytest.raises(ValueError):
        ImagingGrid(0, 4, 1e-3, 1e-3)
    with pytest.raises(ValueError):
        ImagingGrid(4, 4, 1e-3, 0.0)
