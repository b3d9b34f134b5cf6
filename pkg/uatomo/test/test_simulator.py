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
"""Unit tests for the module uatomo.simulator."""


import pytest
import numpy as np
from numpy.testing import assert_allclose, assert_equal

from ..calibration import normalize
from ..geometry import AcquisitionGeometry, ImagingGrid
from ..metrics import connected_components
from ..physics import PLEXIGLAS, WATER, np_per_m_to_db_per_cm
from ..simulator import (
    PHANTOM_PRESETS,
    Inclusion,
    Media,
    NoiseSpec,
    PhantomSpec,
    inclusion_mask,
    preset_phantom,
    rasterize,
    ray_normals,
    simulate_phantom,
)


GEOM = AcquisitionGeometry(16, 1.2e-3, 0.030)
GRID = ImagingGrid.from_geometry(GEOM, 16, 16)


def test_homogeneous_phantom():
    image = rasterize(PhantomSpec(0.5), GRID)
    assert_allclose(image.db_per_cm, np.full((16, 16), 0.5))
    assert not inclusion_mask(PhantomSpec(0.5), GRID).any()


def test_last_inclusion_wins():
    phantom = PhantomSpec(
        0.5,
        [
            Inclusion("rectangle", (0.009, 0.015), (0.009, 0.015), 1.0),
            Inclusion("ellipse", (0.009, 0.015), (0.004, 0.004), 2.0),
        ],
    )
    values = rasterize(phantom, GRID).db_per_cm
    assert_allclose(np.unique(values), [1.0, 2.0])
    assert_allclose(values[8, 8], 2.0)
    assert inclusion_mask(phantom, GRID).all()


def test_out_of_domain():
    phantom = PhantomSpec(0.5, [Inclusion("ellipse", (0.0, 0.015), (0.004, 0.004), 1.5)])
    with pytest.raises(ValueError):
        rasterize(phantom, GRID)
    with pytest.raises(ValueError):
        inclusion_mask(phantom, GRID)


@pytest.mark.parametrize(
    "shape, half_widths, attenuation",
    [
        ("triangle", (1e-3, 1e-3), 1.0),
        ("ellipse", (0.0, 1e-3), 1.0),
        ("ellipse", (1e-3, 1e-3), -1.0),
    ],
)
def test_invalid_inclusion(shape, half_widths, attenuation):
    with pytest.raises(ValueError):
        Inclusion(shape, (0.01, 0.01), half_widths, attenuation)


def test_phantom_dict():
    phantom = preset_phantom("complex", GEOM)
    data = phantom.to_dict()
    assert len(data["inclusions"]) == 4
    assert PhantomSpec.from_dict(data) == phantom
    with pytest.raises(ValueError):
        PhantomSpec.from_dict({"inclusions": []})
    with pytest.raises(ValueError):
        preset_phantom("unknown", GEOM)


@pytest.mark.parametrize(
    "name, ncomponent",
    [("single", 1), ("lateral", 2), ("axial", 2), ("complex", 4), ("gelatin-muscle", 1)],
)
def test_preset_components(name, ncomponent):
    geom = AcquisitionGeometry(64, 6e-4, 0.030)
    grid = ImagingGrid.from_geometry(geom, 64, 64)
    mask = inclusion_mask(preset_phantom(name, geom), grid)
    assert connected_components(mask) == ncomponent


def test_presets_fit_default_geometry():
    geom = AcquisitionGeometry(128, 3e-4, 0.030)
    grid = ImagingGrid.from_geometry(geom, 64, 64)
    for name in PHANTOM_PRESETS:
        rasterize(preset_phantom(name, geom), grid)


def test_water_phantom_equals_calibration():
    background = float(np_per_m_to_db_per_cm(WATER.attenuation))
    tissue, water, metadata, truth, mask = simulate_phantom(
        PhantomSpec(background), GEOM, GRID, Media(), NoiseSpec()
    )
    assert_allclose(tissue.values, water.values, rtol=1e-12)
    assert metadata["noise_level"] == 0.0
    assert "noise_scale" not in metadata
    assert tissue.medium == "tissue"
    assert water.medium == "water"
    assert not mask.any()


def test_noise_deterministic():
    phantom = preset_phantom("single", GEOM)
    results = [
        simulate_phantom(phantom, GEOM, GRID, Media(), NoiseSpec(0.05, seed))[0].values
        for seed in (3, 3, 4)
    ]
    assert_equal(results[0], results[1])
    assert abs(results[0] - results[2]).max() > 0


# The full 128-element aperture gives 16384 rays.
NOISE_GEOM = AcquisitionGeometry(128, 3e-4, 0.030)
NOISE_GRID = ImagingGrid.from_geometry(NOISE_GEOM, 8, 8)


@pytest.mark.parametrize("seed", range(10))
def test_noise_statistics(seed):
    phantom = preset_phantom("single", NOISE_GEOM)
    media = Media()
    clean = simulate_phantom(phantom, NOISE_GEOM, NOISE_GRID, media, NoiseSpec())
    noisy = simulate_phantom(
        phantom, NOISE_GEOM, NOISE_GRID, media, NoiseSpec(0.1, seed)
    )

    def data(result):
        return normalize(
            result[0], result[1], None, WATER, PLEXIGLAS, NOISE_GEOM, absolute=True
        ).values

    b_clean = data(clean)
    assert b_clean.size == 16384
    scale = noisy[2]["noise_scale"]
    assert_allclose(scale, abs(b_clean).max())
    assert noisy[2]["noise_reference"] == "max|b|"
    difference = data(noisy) - b_clean
    assert abs(difference.mean()) < 0.01 * scale
    assert_allclose(difference.std(), 0.1 * scale, rtol=0.05)


def test_ray_normals_per_ray():
    draws = ray_normals(5, 1000)
    assert np.isfinite(draws).all()
    assert_equal(ray_normals(5, 10), draws[:10])
    assert_equal(ray_normals(5, 1000), draws)
    assert abs(ray_normals(6, 10) - draws[:10]).max() > 0
    assert abs(draws.mean()) < 0.15
    assert_allclose(draws.std(), 1.0, rtol=0.1)


def test_refined_simulation():
    # Exact row sums make the homogeneous case independent of the grid.
    phantom = PhantomSpec(0.7)
    coarse = simulate_phantom(phantom, GEOM, GRID, Media(), NoiseSpec())
    fine = simulate_phantom(phantom, GEOM, GRID, Media(), NoiseSpec(), refine=3)
    assert_allclose(fine[0].values, coarse[0].values, rtol=1e-12)
    assert fine[2]["refine"] == 3
    assert fine[3].grid == GRID


def test_negative_noise_level():
    with pytest.raises(ValueError):
        NoiseSpec(-0.01)
