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
"""Unit tests for the module uatomo.metrics."""


import logging

import pytest
import numpy as np
from numpy.testing import assert_allclose

from ..geometry import DimensionError, ImagingGrid
from ..metrics import (
    MetricsReport,
    cnr,
    connected_components,
    contrast,
    crf,
    evaluate,
    psnr,
    region_statistics,
    rmse,
    threshold_mask,
)
from ..recon import AttenuationImage


MASK = np.zeros((4, 4), dtype=bool)
MASK[1:3, 1:3] = True
TRUTH = np.where(MASK, 1.5, 0.5)


def test_region_statistics():
    image = TRUTH.copy()
    image[0, 0] = 0.7
    stats = region_statistics(image, MASK)
    assert_allclose(stats.mu_inc, 1.5)
    assert_allclose(stats.mu_bkg, (11 * 0.5 + 0.7) / 12)
    assert stats.sigma_inc == 0.0
    assert_allclose(stats.sigma_bkg, np.std([0.5] * 11 + [0.7]))


def test_perfect_reconstruction():
    assert crf(TRUTH, TRUTH, MASK) == 1.0
    assert rmse(TRUTH, TRUTH) == 0.0
    assert psnr(TRUTH, TRUTH) == np.inf
    report = evaluate(TRUTH, TRUTH, MASK)
    assert report.as_dict()["psnr_is_infinite"] == 1


def test_contrast():
    assert_allclose(contrast(1.5, 0.5), 1.0)
    assert contrast(0.0, 0.0) == 0.0
    assert_allclose(crf(np.where(MASK, 1.0, 0.5), TRUTH, MASK), (2 * 0.5 / 1.5) / 1.0)


def test_crf_without_true_contrast():
    with pytest.raises(ValueError):
        crf(TRUTH, np.full((4, 4), 0.5), MASK)


def test_cnr():
    rng = np.random.default_rng(1)
    image = TRUTH + rng.normal(0, 0.1, (4, 4))
    stats = region_statistics(image, MASK)
    expected = abs(stats.mu_inc - stats.mu_bkg) / np.hypot(stats.sigma_inc, stats.sigma_bkg)
    assert_allclose(cnr(image, MASK), expected)


def test_cnr_constant_regions(caplog):
    with caplog.at_level(logging.WARNING):
        assert cnr(np.full((4, 4), 0.5), MASK) == 0.0
        assert cnr(TRUTH, MASK) == np.inf
    assert "CNR" in caplog.text


def test_rmse_psnr():
    recon = TRUTH + 0.1
    assert_allclose(rmse(recon, TRUTH), 0.1)
    assert_allclose(psnr(recon, TRUTH), 20 * np.log10(1.6 / 0.1))


def test_attenuation_images_in_db_per_cm():
    grid = ImagingGrid(4, 4, 1e-3, 1e-3)
    truth = AttenuationImage.from_db_per_cm(grid, TRUTH)
    recon = AttenuationImage.from_db_per_cm(grid, TRUTH + 0.1)
    assert_allclose(rmse(recon, truth), 0.1)
    assert_allclose(region_statistics(truth, MASK).mu_inc, 1.5)


def test_shape_checks():
    with pytest.raises(DimensionError):
        rmse(TRUTH, np.zeros((4, 5)))
    with pytest.raises(DimensionError):
        region_statistics(TRUTH, MASK[:3])
    with pytest.raises(ValueError):
        region_statistics(TRUTH, np.zeros((4, 4), dtype=bool))
    with pytest.raises(ValueError):
        region_statistics(TRUTH, np.ones((4, 4), dtype=bool))


def test_report_formats():
    report = evaluate(TRUTH + 0.05 * MASK, TRUTH, MASK)
    assert isinstance(report, MetricsReport)
    lines = report.to_text().splitlines()
    assert [line.split("=")[0] for line in lines] == list(MetricsReport.FIELDS)
    row = report.to_csv_row().strip().split(",")
    assert len(row) == len(MetricsReport.FIELDS)
    assert_allclose(float(row[0]), report.crf, rtol=1e-11)
    assert row[-1] == "0"


def test_components():
    image = np.zeros((6, 6))
    image[1, 1] = 2.0
    image[2, 2] = 2.0
    image[4, 4] = 2.0
    mask = threshold_mask(image, 1.0)
    # Diagonal neighbors are connected.
    assert connected_components(mask) == 2
    assert connected_components(np.zeros((3, 3), dtype=bool)) == 0
    assert not threshold_mask(image, 2.0).any()
