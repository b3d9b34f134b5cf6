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
"""Unit tests for the module uatomo.calibration."""


import logging

import pytest
import numpy as np
from numpy.testing import assert_allclose, assert_equal

from ..calibration import (
    AmplitudeMatrix,
    NormalizedData,
    denormalize,
    from_matrix,
    normalize,
    reshape_to_matrix,
)
from ..geometry import AcquisitionGeometry, DimensionError, ImagingGrid, ray_lengths
from ..physics import PLEXIGLAS, WATER, MediumSpec
from ..raypath import build_system_matrix
from ..recon import AttenuationImage
from ..simulator import Media, NoiseSpec, simulate_measurement


GEOM = AcquisitionGeometry(6, 3e-4, 0.030)


def random_amplitudes(seed, geom=GEOM, medium="tissue"):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.05, 0.2, (geom.n_elements, geom.n_elements))
    return AmplitudeMatrix(values, medium, geom.reflector_depth)


def test_self_calibration_is_zero():
    calib = random_amplitudes(1, medium="water")
    data = normalize(calib, calib, None, WATER, PLEXIGLAS, GEOM, absolute=False)
    assert_equal(data.values, np.zeros(GEOM.nray))
    assert not data.absolute


def test_absolute_offset():
    calib = random_amplitudes(2, medium="water")
    data = normalize(calib, calib, WATER, WATER, PLEXIGLAS, GEOM, absolute=True)
    assert_allclose(data.values, -WATER.attenuation * ray_lengths(GEOM).ravel())
    # Normal incidence at 30 mm depth: 0.05 Np/cm over 6 cm.
    assert_allclose(reshape_to_matrix(data)[0, 0], -0.30, rtol=1e-12)


def test_unknown_tissue_warns(caplog):
    calib = random_amplitudes(3, medium="water")
    meas = random_amplitudes(4)
    with caplog.at_level(logging.WARNING):
        data1 = normalize(meas, calib, None, WATER, PLEXIGLAS, GEOM)
    assert "speed of sound unknown" in caplog.text
    data2 = normalize(meas, calib, WATER, WATER, PLEXIGLAS, GEOM)
    assert_equal(data1.values, data2.values)


def test_closed_loop_with_tissue_coefficients():
    # Tissue with a different speed of sound changes the reflection coefficient.
    tissue = MediumSpec(1540.0, 1050.0, 0.0, "tissue")
    grid = ImagingGrid.from_geometry(GEOM, 5, 4)
    L = build_system_matrix(GEOM, grid)
    rng = np.random.default_rng(5)
    image = AttenuationImage(grid, rng.uniform(2.0, 30.0, grid.shape))
    media = Media(WATER, PLEXIGLAS, tissue)
    meas, calib, _ = simulate_measurement(image, L, GEOM, media, NoiseSpec())
    absolute = normalize(meas, calib, tissue, WATER, PLEXIGLAS, GEOM, absolute=True)
    assert_allclose(absolute.values, -L.apply(image.values), rtol=1e-10, atol=1e-13)
    relative = normalize(meas, calib, tissue, WATER, PLEXIGLAS, GEOM, absolute=False)
    expected = -L.apply(image.values - WATER.attenuation)
    assert_allclose(relative.values, expected, rtol=1e-10, atol=1e-13)
    # Ignoring the tissue reflection coefficient leaves a bias.
    biased = normalize(meas, calib, None, WATER, PLEXIGLAS, GEOM, absolute=True)
    assert abs(biased.values - absolute.values).min() > 1e-3


@pytest.mark.parametrize("absolute", [True, False])
def test_denormalize(absolute):
    tissue = MediumSpec(1560.0, 1020.0)
    calib = random_amplitudes(6, medium="water")
    meas = random_amplitudes(7)
    data = normalize(meas, calib, tissue, WATER, PLEXIGLAS, GEOM, absolute)
    restored = denormalize(data, calib, tissue, WATER, PLEXIGLAS)
    assert_allclose(restored.values, meas.values, rtol=1e-12)
    assert restored.medium == "tissue"


def test_matrix_layout():
    calib = random_amplitudes(8, medium="water")
    meas = random_amplitudes(9)
    data = normalize(meas, calib, None, WATER, PLEXIGLAS, GEOM)
    matrix = reshape_to_matrix(data)
    assert matrix.shape == (6, 6)
    # Row-major in (t, r).
    assert matrix[2, 4] == data.values[2 * 6 + 4]
    assert_equal(from_matrix(matrix, GEOM).values, data.values)
    with pytest.raises(DimensionError):
        from_matrix(np.zeros((6, 5)), GEOM)


def test_mismatched_matrices():
    calib = random_amplitudes(10, medium="water")
    small = random_amplitudes(11, AcquisitionGeometry(5, 3e-4, 0.030))
    with pytest.raises(DimensionError):
        normalize(small, calib, None, WATER, PLEXIGLAS, GEOM)
    deeper = AmplitudeMatrix(calib.values, "water", 0.046)
    with pytest.raises(ValueError):
        normalize(calib, deeper, None, WATER, PLEXIGLAS, GEOM)


@pytest.mark.parametrize(
    "values",
    [np.ones((3, 4)), np.zeros((3, 3)), np.full((3, 3), np.nan), -np.ones((3, 3))],
)
def test_invalid_amplitudes(values):
    with pytest.raises(ValueError):
        AmplitudeMatrix(values, "water", 0.03)


def test_amplitudes_read_only():
    amplitudes = random_amplitudes(12)
    with pytest.raises(ValueError):
        amplitudes.values[0, 0] = 1.0


def test_normalized_data_checks():
    with pytest.raises(DimensionError):
        NormalizedData(np.zeros(35), GEOM)
    with pytest.raises(ValueError):
        NormalizedData(np.full(36, np.inf), GEOM)
