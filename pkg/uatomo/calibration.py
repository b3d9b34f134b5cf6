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
"""Normalization of reflector echo amplitudes with a water calibration."""


import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import DimensionError, ray_angles, ray_lengths
from .physics import ReflectionPair, reflection_coefficient


__all__ = [
    "AmplitudeMatrix",
    "NormalizedData",
    "normalize",
    "denormalize",
    "reshape_to_matrix",
    "from_matrix",
]


logger = logging.getLogger(__name__)


def _readonly(values):
    values = np.array(values, dtype=float)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class AmplitudeMatrix:
    """Echo amplitudes of the reflector for all pairs, indexed ``[t, r]``.

    Parameters
    ----------
    values
        Array of shape ``(n, n)`` with strictly positive, finite amplitudes.
    medium
        Label of the medium between array and reflector, e.g. ``"water"``.
    reflector_depth
        Reflector depth of the acquisition, in meters.

    """

    values: np.ndarray
    medium: str
    reflector_depth: float

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionError(
                "Amplitude matrix must be square, got shape {}.".format(values.shape)
            )
        if not np.isfinite(values).all():
            raise ValueError("Amplitude matrix contains non-finite values.")
        if not (values > 0).all():
            raise ValueError("Amplitude matrix contains nonpositive values.")
        object.__setattr__(self, "values", values)

    @property
    def n_elements(self):  # noqa: D401
        """Number of transducer elements."""
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class NormalizedData:
    """Log-ratio data vector ``b`` with one entry per pair, row-major in (t, r).

    For an attenuating medium the entries are negative: ``-b`` is the path
    integral of the attenuation, absolute or relative to water depending on
    ``absolute``.
    """

    values: np.ndarray
    geom: object
    absolute: bool = True
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = _readonly(np.ravel(self.values))
        if values.size != self.geom.nray:
            raise DimensionError(
                "Expected {} entries, got {}.".format(self.geom.nray, values.size)
            )
        if not np.isfinite(values).all():
            raise ValueError("Normalized data contains non-finite values.")
        object.__setattr__(self, "values", values)


def _check_matrix(amplitudes, geom, name):
    if amplitudes.n_elements != geom.n_elements:
        raise DimensionError(
            "{} matrix has {} elements, geometry has {}.".format(
                name, amplitudes.n_elements, geom.n_elements
            )
        )
    if not np.isclose(amplitudes.reflector_depth, geom.reflector_depth, rtol=1e-9):
        raise ValueError(
            "{} reflector depth {:.6e} m differs from the geometry ({:.6e} m).".format(
                name, amplitudes.reflector_depth, geom.reflector_depth
            )
        )


def _log_coefficient_ratio(tissue, water, reflector, geom):
    """Return ``ln |R_water| - ln |R_tissue|`` for all pairs."""
    if tissue is None:
        logger.warning(
            "Tissue speed of sound unknown, using water's: "
            "no reflection-coefficient correction."
        )
        tissue = water
    theta = ray_angles(geom).ravel()
    r_water = reflection_coefficient(ReflectionPair(water, reflector), theta)
    r_tissue = reflection_coefficient(ReflectionPair(tissue, reflector), theta)
    return np.log(abs(r_water)) - np.log(abs(r_tissue))


def normalize(meas, calib, tissue, water, reflector, geom, absolute=True):
    """Compute the normalized log-ratio data vector.

    Parameters
    ----------
    meas
        ``AmplitudeMatrix`` measured through the tissue.
    calib
        ``AmplitudeMatrix`` measured in water at the same reflector depth.
    tissue
        ``MediumSpec`` of the tissue, only its speed of sound and density are
        used. None falls back to water with a warning.
    water
        ``MediumSpec`` of the calibration water, including its attenuation.
    reflector
        ``MediumSpec`` of the reflector plate.
    geom
        The ``AcquisitionGeometry``.
    absolute
        When True, the water path attenuation that cancels in the ratio is
        subtracted again, so that ``-b`` is the absolute path integral.

    Returns
    -------
    data
        ``NormalizedData`` with
        ``b = ln(A_meas |R_water| / (A_calib |R_tissue|))``, minus
        ``alpha_water * length`` in absolute mode.

    """
    _check_matrix(meas, geom, "Measurement")
    _check_matrix(calib, geom, "Calibration")
    log_amplitudes = np.log(meas.values.ravel()) - np.log(calib.values.ravel())
    values = log_amplitudes + _log_coefficient_ratio(tissue, water, reflector, geom)
    if absolute:
        values = values - water.attenuation * ray_lengths(geom).ravel()
    return NormalizedData(values, geom, absolute)


def denormalize(data, calib, tissue, water, reflector):
    """Return the tissue ``AmplitudeMatrix`` that normalizes to ``data``.

    This is the inverse of ``normalize`` for a given calibration matrix.
    """
    geom = data.geom
    _check_matrix(calib, geom, "Calibration")
    values = data.values - _log_coefficient_ratio(tissue, water, reflector, geom)
    if data.absolute:
        values = values + water.attenuation * ray_lengths(geom).ravel()
    amplitudes = calib.values * np.exp(values).reshape(calib.values.shape)
    label = "tissue" if tissue is None else (tissue.label or "tissue")
    return AmplitudeMatrix(amplitudes, label, geom.reflector_depth)


def reshape_to_matrix(data):
    """Return ``b`` as an ``(n, n)`` array indexed ``[t, r]`` for display."""
    nel = data.geom.n_elements
    return data.values.reshape(nel, nel)


def from_matrix(matrix, geom, absolute=True):
    """Inverse of ``reshape_to_matrix``."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (geom.n_elements, geom.n_elements):
        raise DimensionError("Expected a square matrix with one row per element.")
    return NormalizedData(matrix.ravel(), geom, absolute)
