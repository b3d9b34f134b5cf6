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
"""Image quality metrics: CRF, CNR, RMSE and PSNR.

Images may be ``AttenuationImage`` instances, which are evaluated in dB/cm,
or plain arrays. Region variances are population variances.
"""


from dataclasses import dataclass
import logging

import numpy as np
from scipy import ndimage

from .geometry import DimensionError


__all__ = [
    "RegionStatistics",
    "MetricsReport",
    "region_statistics",
    "contrast",
    "crf",
    "cnr",
    "rmse",
    "psnr",
    "evaluate",
    "threshold_mask",
    "connected_components",
]


logger = logging.getLogger(__name__)


def _values(image):
    values = getattr(image, "db_per_cm", image)
    return np.asarray(values, dtype=float)


def _check_mask(mask, shape):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise DimensionError(
            "Mask shape {} differs from image shape {}.".format(mask.shape, shape)
        )
    if mask.all() or not mask.any():
        raise ValueError("The mask needs at least one inclusion and one background cell.")
    return mask


@dataclass(frozen=True)
class RegionStatistics:
    """Mean and population standard deviation of inclusion and background."""

    mu_inc: float
    mu_bkg: float
    sigma_inc: float
    sigma_bkg: float


def region_statistics(image, mask):
    """Compute the region statistics of ``image`` for a boolean inclusion mask."""
    values = _values(image)
    mask = _check_mask(mask, values.shape)
    inc = values[mask]
    bkg = values[~mask]
    return RegionStatistics(
        float(inc.mean()), float(bkg.mean()), float(inc.std()), float(bkg.std())
    )


def contrast(mu_inc, mu_bkg):
    """Return ``2 |mu_inc - mu_bkg| / (|mu_inc| + |mu_bkg|)``, zero for 0/0."""
    denominator = abs(mu_inc) + abs(mu_bkg)
    if denominator == 0:
        return 0.0
    return 2 * abs(mu_inc - mu_bkg) / denominator


def crf(recon, truth, mask):
    """Contrast-ratio fraction, reconstructed over true contrast."""
    stats_truth = region_statistics(truth, mask)
    true_contrast = contrast(stats_truth.mu_inc, stats_truth.mu_bkg)
    if true_contrast == 0:
        raise ValueError("The ground truth has no contrast.")
    stats_recon = region_statistics(recon, mask)
    return contrast(stats_recon.mu_inc, stats_recon.mu_bkg) / true_contrast


def cnr(image, mask):
    """Contrast-to-noise ratio ``|mu_inc - mu_bkg| / sqrt(sigma_inc^2 + sigma_bkg^2)``."""
    stats = region_statistics(image, mask)
    numerator = abs(stats.mu_inc - stats.mu_bkg)
    denominator = np.sqrt(stats.sigma_inc ** 2 + stats.sigma_bkg ** 2)
    if denominator == 0:
        if numerator == 0:
            logger.warning("CNR of two identical constant regions set to zero.")
            return 0.0
        logger.warning("CNR of two constant regions is infinite.")
        return np.inf
    return float(numerator / denominator)


def _check_pair(recon, truth):
    recon = _values(recon)
    truth = _values(truth)
    if recon.shape != truth.shape:
        raise DimensionError(
            "Reconstruction shape {} differs from ground truth shape {}.".format(
                recon.shape, truth.shape
            )
        )
    return recon, truth


def rmse(recon, truth):
    """Root-mean-squared error over all cells."""
    recon, truth = _check_pair(recon, truth)
    return float(np.sqrt(np.mean((recon - truth) ** 2)))


def psnr(recon, truth):
    """Peak signal-to-noise ratio ``20 log10(max(recon) / RMSE)``, +inf for zero error."""
    recon, truth = _check_pair(recon, truth)
    error = rmse(recon, truth)
    if error == 0:
        return np.inf
    return float(20 * np.log10(recon.max() / error))


@dataclass(frozen=True)
class MetricsReport:
    """All metrics of one reconstruction. RMSE is in the units of the images."""

    crf: float
    cnr: float
    rmse: float
    psnr: float
    statistics: RegionStatistics
    truth_statistics: RegionStatistics

    FIELDS = (
        "crf",
        "cnr",
        "rmse",
        "psnr",
        "mu_inc",
        "mu_bkg",
        "sigma_inc",
        "sigma_bkg",
        "psnr_is_infinite",
    )

    def as_dict(self):
        """Flat dictionary with the fields in ``FIELDS``."""
        return {
            "crf": self.crf,
            "cnr": self.cnr,
            "rmse": self.rmse,
            "psnr": self.psnr,
            "mu_inc": self.statistics.mu_inc,
            "mu_bkg": self.statistics.mu_bkg,
            "sigma_inc": self.statistics.sigma_inc,
            "sigma_bkg": self.statistics.sigma_bkg,
            "psnr_is_infinite": int(np.isinf(self.psnr)),
        }

    def to_text(self):
        """Return ``key=value`` lines."""
        return "".join(
            "{}={}\n".format(key, _format(value)) for key, value in self.as_dict().items()
        )

    def to_csv_row(self):
        """Return the values of ``FIELDS`` as one comma-separated line."""
        values = self.as_dict()
        return ",".join(_format(values[key]) for key in self.FIELDS) + "\n"


def _format(value):
    if isinstance(value, (int, np.integer)):
        return "{:d}".format(value)
    return "{:.12e}".format(value)


def evaluate(recon, truth, mask):
    """Compute all metrics of a reconstruction against its ground truth."""
    return MetricsReport(
        crf=crf(recon, truth, mask),
        cnr=cnr(recon, mask),
        rmse=rmse(recon, truth),
        psnr=psnr(recon, truth),
        statistics=region_statistics(recon, mask),
        truth_statistics=region_statistics(truth, mask),
    )


def threshold_mask(image, threshold):
    """Boolean image of the cells strictly above ``threshold``."""
    return _values(image) > threshold


def connected_components(mask):
    """Number of 8-connected components of a boolean image."""
    return ndimage.label(np.asarray(mask, dtype=bool), structure=np.ones((3, 3)))[1]
