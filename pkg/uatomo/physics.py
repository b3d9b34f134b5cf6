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
"""Amplitude decay, reflection at the plate and attenuation units.

Attenuation is frequency independent here: one scalar per medium, valid at
the 5 MHz center frequency of the acquisitions.
"""


from dataclasses import dataclass

import numpy as np


__all__ = [
    "CriticalAngleError",
    "MediumSpec",
    "ReflectionPair",
    "WATER",
    "PLEXIGLAS",
    "GELATIN",
    "GELATIN_CELLULOSE",
    "BOVINE_MUSCLE",
    "DB_PER_NP",
    "np_per_m_to_db_per_cm",
    "db_per_cm_to_np_per_m",
    "critical_angle",
    "reflection_coefficient",
    "forward_amplitude",
]


# 1 Np = 20 / ln(10) dB
DB_PER_NP = 20 / np.log(10)


class CriticalAngleError(ValueError):
    """Raised when the incidence angle is beyond the critical angle of the plate."""


@dataclass(frozen=True)
class MediumSpec:
    """Acoustic properties of a homogeneous medium.

    Parameters
    ----------
    speed_of_sound
        Longitudinal speed of sound in m/s.
    density
        Mass density in kg/m^3.
    attenuation
        Amplitude attenuation coefficient in Np/m.
    label
        Human-readable name.

    """

    speed_of_sound: float
    density: float
    attenuation: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not self.speed_of_sound > 0:
            raise ValueError("The speed of sound must be strictly positive.")
        if not self.density > 0:
            raise ValueError("The density must be strictly positive.")
        if not self.attenuation >= 0:
            raise ValueError("The attenuation must be nonnegative.")

    @property
    def impedance(self):  # noqa: D401
        """Characteristic acoustic impedance in kg/(m^2 s)."""
        return self.speed_of_sound * self.density


@dataclass(frozen=True)
class ReflectionPair:
    """A propagation medium in contact with the reflector plate."""

    medium: MediumSpec
    reflector: MediumSpec

    @property
    def n(self):  # noqa: D401
        """Speed-of-sound ratio reflector / medium."""
        return self.reflector.speed_of_sound / self.medium.speed_of_sound

    @property
    def m(self):  # noqa: D401
        """Density ratio reflector / medium."""
        return self.reflector.density / self.medium.density

    @property
    def critical_angle(self):  # noqa: D401
        """Largest valid incidence angle, pi/2 when there is no critical angle."""
        if self.n >= 1:
            return np.pi / 2
        return np.arcsin(self.n)


def np_per_m_to_db_per_cm(alpha):
    """Convert attenuation from Np/m to dB/cm."""
    return np.asarray(alpha) * (DB_PER_NP / 100)


def db_per_cm_to_np_per_m(alpha):
    """Convert attenuation from dB/cm to Np/m."""
    return np.asarray(alpha) / (DB_PER_NP / 100)


def critical_angle(pair):
    """Largest incidence angle for which the reflection coefficient is defined."""
    return pair.critical_angle


# Water at 20 degrees Celsius and 5 MHz: 0.05 Np/cm.
WATER = MediumSpec(1482.5, 1000.0, 5.0, "water")
PLEXIGLAS = MediumSpec(2700.0, 1180.0, 0.0, "plexiglas")
# Tissue-like media take water's speed of sound and density.
GELATIN = MediumSpec(1482.5, 1000.0, float(db_per_cm_to_np_per_m(0.15)), "gelatin")
GELATIN_CELLULOSE = MediumSpec(
    1482.5, 1000.0, float(db_per_cm_to_np_per_m(0.84)), "gelatin-cellulose"
)
BOVINE_MUSCLE = MediumSpec(
    1482.5, 1000.0, float(db_per_cm_to_np_per_m(3.21)), "bovine-muscle"
)


def reflection_coefficient(pair, theta):
    """Compute the incidence-angle dependent reflection coefficient of the plate.

    Parameters
    ----------
    pair
        A ``ReflectionPair``.
    theta
        Incidence angle(s) in radians, scalar or array.

    Returns
    -------
    coefficient
        ``(m cos(theta) - n sqrt(1 - sin^2(theta)/n^2)) /
        (m cos(theta) + n sqrt(1 - sin^2(theta)/n^2))``, same shape as ``theta``.
        Only its magnitude is physically meaningful downstream.

    """
    n = pair.n
    m = pair.m
    theta = np.asarray(theta, dtype=float)
    radicand = 1 - np.sin(theta) ** 2 / n ** 2
    if (radicand < 0).any():
        raise CriticalAngleError(
            "Incidence angle beyond the critical angle {:.6f} rad.".format(
                pair.critical_angle
            )
        )
    root = n * np.sqrt(radicand)
    cosine = m * np.cos(theta)
    result = (cosine - root) / (cosine + root)
    if result.ndim == 0:
        return float(result)
    return result


def forward_amplitude(ray, path_integral, coefficient, a0=1.0, sensitivity=1.0):
    """Compute the echo amplitude of one ray.

    Parameters
    ----------
    ray
        The ``RaySpec`` of the transmit/receive pair, or None for a vectorized
        call over many rays. The path integral already contains the geometry.
    path_integral
        Integral of the attenuation along the ray, in Np. Must be nonnegative.
    coefficient
        Reflection coefficient at the incidence angle of the ray; only its
        magnitude is used.
    a0
        Transmit amplitude in the direction of the ray.
    sensitivity
        Receive sensitivity.

    Returns
    -------
    amplitude
        ``a0 * |R| * S * exp(-path_integral)``.

    """
    path_integral = np.asarray(path_integral, dtype=float)
    if (path_integral < 0).any():
        if ray is None:
            raise ValueError("Negative path integral.")
        raise ValueError(
            "Negative path integral for pair ({}, {}).".format(
                ray.tx_index, ray.rx_index
            )
        )
    return a0 * abs(coefficient) * sensitivity * np.exp(-path_integral)
