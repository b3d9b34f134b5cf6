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
"""Attenuation phantoms and synthetic multistatic amplitude matrices.

The forward model is the straight-ray Beer-Lambert decay of the echo
amplitude with unit transmit amplitude and unit receive sensitivity. Noise is
zero-mean Gaussian, added to the normalized log-ratio data and folded back
into the tissue amplitudes.
"""


import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .calibration import AmplitudeMatrix, normalize
from .geometry import DimensionError, ray_angles, ray_lengths
from .physics import (
    PLEXIGLAS,
    WATER,
    ReflectionPair,
    db_per_cm_to_np_per_m,
    forward_amplitude,
    reflection_coefficient,
)
from .raypath import build_system_matrix
from .recon import AttenuationImage


__all__ = [
    "Media",
    "Inclusion",
    "PhantomSpec",
    "NoiseSpec",
    "PHANTOM_PRESETS",
    "preset_phantom",
    "rasterize",
    "ray_normals",
    "inclusion_mask",
    "simulate_measurement",
    "simulate_phantom",
]


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Media:
    """Water, reflector and (optionally) tissue constants of an experiment.

    A tissue of None means that its speed of sound is unknown; water's is used.
    """

    water: object = WATER
    reflector: object = PLEXIGLAS
    tissue: object = None

    @property
    def tissue_or_water(self):  # noqa: D401
        """Tissue medium, falling back to water."""
        return self.water if self.tissue is None else self.tissue


SHAPES = ("ellipse", "rectangle")


@dataclass(frozen=True)
class Inclusion:
    """An ellipse or rectangle with uniform attenuation.

    Parameters
    ----------
    shape
        ``"ellipse"`` or ``"rectangle"``.
    center
        ``(x, y)`` of the center in meters.
    half_widths
        Semi-axes of the ellipse, or half extents of the rectangle, in meters.
    attenuation
        Attenuation in dB/cm.

    """

    shape: str
    center: tuple
    half_widths: tuple
    attenuation: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(
                "Unknown inclusion shape {!r}, use one of {}.".format(self.shape, SHAPES)
            )
        if len(self.center) != 2 or len(self.half_widths) != 2:
            raise ValueError("Inclusion center and half widths need two components.")
        if min(self.half_widths) <= 0:
            raise ValueError("Inclusion half widths must be strictly positive.")
        if not self.attenuation >= 0:
            raise ValueError("Inclusion attenuation must be nonnegative.")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "half_widths", tuple(float(v) for v in self.half_widths))

    def contains(self, x, y):
        """Boolean mask of the points ``(x, y)`` inside the shape."""
        u = (x - self.center[0]) / self.half_widths[0]
        v = (y - self.center[1]) / self.half_widths[1]
        if self.shape == "ellipse":
            return u ** 2 + v ** 2 <= 1
        return (abs(u) <= 1) & (abs(v) <= 1)

    def to_dict(self):
        """Plain dictionary with unit-annotated keys."""
        return {
            "shape": self.shape,
            "center_m": list(self.center),
            "half_widths_m": list(self.half_widths),
            "attenuation_db_cm": self.attenuation,
        }


@dataclass(frozen=True)
class PhantomSpec:
    """Background attenuation plus inclusions, later shapes on top.

    Attenuation values are in dB/cm.
    """

    background_attenuation: float
    inclusions: tuple = ()

    def __post_init__(self):
        if not self.background_attenuation >= 0:
            raise ValueError("Background attenuation must be nonnegative.")
        object.__setattr__(self, "inclusions", tuple(self.inclusions))

    @classmethod
    def from_dict(cls, data):
        """Create a phantom from a dictionary as stored in a phantom file."""
        try:
            inclusions = [
                Inclusion(
                    shape=item["shape"],
                    center=item["center_m"],
                    half_widths=item["half_widths_m"],
                    attenuation=item["attenuation_db_cm"],
                )
                for item in data.get("inclusions") or []
            ]
            return cls(data["background_db_cm"], inclusions)
        except KeyError as exc:
            raise ValueError("Phantom field missing: {}".format(exc)) from exc

    def to_dict(self):
        """Inverse of ``from_dict``."""
        return {
            "background_db_cm": self.background_attenuation,
            "inclusions": [inclusion.to_dict() for inclusion in self.inclusions],
        }

    def check_domain(self, grid):
        """Raise ValueError when an inclusion extends beyond the grid domain."""
        tol = 1e-12
        for i, inclusion in enumerate(self.inclusions):
            (x, y), (hx, hy) = inclusion.center, inclusion.half_widths
            if (
                x - hx < -tol
                or x + hx > grid.width + tol
                or y - hy < -tol
                or y + hy > grid.depth + tol
            ):
                raise ValueError(
                    "Inclusion {} extends outside the {:.4e} x {:.4e} m domain.".format(
                        i, grid.width, grid.depth
                    )
                )


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise as a fraction of ``max|b|`` and the seed of its stream."""

    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError("The noise level must be nonnegative.")


def _preset_single(width, depth):
    return PhantomSpec(
        0.5, [Inclusion("ellipse", (width / 2, depth / 2), (5e-3, 5e-3), 1.5)]
    )


def _preset_lateral(width, depth):
    return PhantomSpec(
        0.5,
        [
            Inclusion("ellipse", (0.3 * width, depth / 2), (4e-3, 4e-3), 1.5),
            Inclusion("ellipse", (0.7 * width, depth / 2), (4e-3, 4e-3), 1.5),
        ],
    )


def _preset_axial(width, depth):
    return PhantomSpec(
        0.5,
        [
            Inclusion("ellipse", (width / 2, 0.3 * depth), (4e-3, 4e-3), 1.5),
            Inclusion("ellipse", (width / 2, 0.7 * depth), (4e-3, 4e-3), 1.5),
        ],
    )


def _preset_complex(width, depth):
    return PhantomSpec(
        0.5,
        [
            Inclusion("ellipse", (0.25 * width, 0.3 * depth), (4e-3, 4e-3), 1.5),
            Inclusion("ellipse", (0.75 * width, 0.3 * depth), (5e-3, 3e-3), 1.0),
            Inclusion("rectangle", (0.25 * width, 0.72 * depth), (4e-3, 3e-3), 2.0),
            Inclusion("ellipse", (0.75 * width, 0.72 * depth), (3.5e-3, 3.5e-3), 0.1),
        ],
    )


def _preset_gelatin_muscle(width, depth):
    # Muscle inclusion in gelatin with cellulose scatterers.
    return PhantomSpec(
        0.84, [Inclusion("ellipse", (width / 2, depth / 2), (6e-3, 6e-3), 3.21)]
    )


PHANTOM_PRESETS = {
    "homogeneous": lambda width, depth: PhantomSpec(0.5),
    "single": _preset_single,
    "lateral": _preset_lateral,
    "axial": _preset_axial,
    "complex": _preset_complex,
    "gelatin-muscle": _preset_gelatin_muscle,
}


def preset_phantom(name, geom):
    """Return a named phantom laid out relative to the domain of ``geom``."""
    try:
        factory = PHANTOM_PRESETS[name]
    except KeyError as exc:
        raise ValueError(
            "Unknown phantom preset {!r}, use one of {}.".format(
                name, sorted(PHANTOM_PRESETS)
            )
        ) from exc
    return factory(geom.aperture, geom.reflector_depth)


def _cell_centers(grid):
    return np.meshgrid(grid.lateral_centers, grid.axial_centers)


def rasterize(phantom, grid):
    """Sample the phantom at the cell centers of ``grid``.

    Returns
    -------
    image
        ``AttenuationImage`` in Np/m. Each cell takes the attenuation of the
        last listed inclusion covering its center, otherwise the background.

    """
    phantom.check_domain(grid)
    x, y = _cell_centers(grid)
    values = np.full(grid.shape, phantom.background_attenuation, dtype=float)
    for inclusion in phantom.inclusions:
        values[inclusion.contains(x, y)] = inclusion.attenuation
    return AttenuationImage(grid, db_per_cm_to_np_per_m(values))


def inclusion_mask(phantom, grid):
    """Boolean image of the cells whose center lies inside any inclusion."""
    phantom.check_domain(grid)
    x, y = _cell_centers(grid)
    mask = np.zeros(grid.shape, dtype=bool)
    for inclusion in phantom.inclusions:
        mask |= inclusion.contains(x, y)
    return mask


def ray_normals(seed, nray):
    """Standard normal draws, one per ray, from a Philox stream.

    Every ray consumes exactly one 64-bit output of the counter-based
    generator, so draw ``k`` only depends on ``(seed, k)``: a prefix of the
    rays or a split over workers reproduces the same values.
    """
    raw = np.random.Philox(key=seed).random_raw(nray)
    # 52 random bits, mapped to the open interval (0, 1).
    uniform = ((raw >> np.uint64(12)).astype(float) + 0.5) / 2.0 ** 52
    return ndtri(uniform)


def simulate_measurement(image, L, geom, media, noise):
    """Simulate tissue and water calibration amplitude matrices.

    Parameters
    ----------
    image
        ``AttenuationImage`` on the grid of ``L``, in Np/m.
    L
        ``RayPathMatrix`` used for the tissue path integrals.
    geom
        The ``AcquisitionGeometry``.
    media
        A ``Media`` instance.
    noise
        A ``NoiseSpec``.

    Returns
    -------
    tissue
        ``AmplitudeMatrix`` through the attenuation image.
    water
        ``AmplitudeMatrix`` of the water calibration.
    metadata
        Dictionary with the noise level, seed and reference scale ``max|b|``.

    """
    if image.grid.shape != L.grid.shape or L.shape[0] != geom.nray:
        raise DimensionError("Image, ray-path matrix and geometry do not match.")
    theta = ray_angles(geom).ravel()
    r_water = reflection_coefficient(ReflectionPair(media.water, media.reflector), theta)
    r_tissue = reflection_coefficient(
        ReflectionPair(media.tissue_or_water, media.reflector), theta
    )
    water_integrals = media.water.attenuation * ray_lengths(geom).ravel()
    water = forward_amplitude(None, water_integrals, r_water)
    tissue = forward_amplitude(None, L.apply(image.values), r_tissue)
    shape = (geom.n_elements, geom.n_elements)
    water = AmplitudeMatrix(water.reshape(shape), media.water.label, geom.reflector_depth)
    metadata = {"noise_level": noise.level, "noise_seed": noise.seed}
    if noise.level > 0:
        data = normalize(
            AmplitudeMatrix(tissue.reshape(shape), "tissue", geom.reflector_depth),
            water,
            media.tissue_or_water,
            media.water,
            media.reflector,
            geom,
            absolute=True,
        )
        scale = abs(data.values).max()
        epsilon = ray_normals(noise.seed, geom.nray) * (noise.level * scale)
        tissue = tissue * np.exp(epsilon)
        metadata["noise_scale"] = scale
        metadata["noise_reference"] = "max|b|"
        logger.info(
            "Added %.2f%% noise, standard deviation %.6e Np", 100 * noise.level,
            noise.level * scale,
        )
    label = "tissue" if media.tissue is None else (media.tissue.label or "tissue")
    tissue = AmplitudeMatrix(tissue.reshape(shape), label, geom.reflector_depth)
    return tissue, water, metadata


def simulate_phantom(phantom, geom, grid, media, noise, refine=1):
    """Rasterize a phantom and simulate its measurement.

    Parameters
    ----------
    phantom, geom, grid, media, noise
        See ``rasterize`` and ``simulate_measurement``.
    refine
        Simulate on a grid ``refine`` times finer than the reconstruction grid,
        so that the forward model differs from the one used to reconstruct.

    Returns
    -------
    tissue, water, metadata
        See ``simulate_measurement``; ``metadata["refine"]`` records ``refine``.
    truth
        Ground truth ``AttenuationImage`` on ``grid``.
    mask
        Inclusion mask on ``grid``.

    """
    truth = rasterize(phantom, grid)
    sim_grid = grid.refine(refine)
    sim_image = truth if refine == 1 else rasterize(phantom, sim_grid)
    L = build_system_matrix(geom, sim_grid)
    tissue, water, metadata = simulate_measurement(sim_image, L, geom, media, noise)
    metadata["refine"] = refine
    return tissue, water, metadata, truth, inclusion_mask(phantom, grid)
