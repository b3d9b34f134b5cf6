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
"""Acquisition geometry, specular ray paths and the imaging grid.

All lengths are in meters. The transducer elements sit on the line ``y = 0``
at ``x_i = i * pitch`` and the reflector plate is the line ``y = d``. The
axial coordinate ``y`` grows with depth.
"""


from dataclasses import dataclass

import numpy as np


__all__ = [
    "DimensionError",
    "AcquisitionGeometry",
    "RaySpec",
    "ImagingGrid",
    "ray_for_pair",
    "all_rays",
    "ray_angles",
    "ray_lengths",
]


class DimensionError(ValueError):
    """Raised when array shapes do not match the geometry or the grid."""


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Linear array facing a flat reflector plate.

    Parameters
    ----------
    n_elements
        Number of transducer elements. A single element is accepted as a
        degenerate aperture (one normal-incidence ray).
    pitch
        Distance between neighboring element centers.
    reflector_depth
        Distance ``d`` between the array and the reflector surface.

    """

    n_elements: int
    pitch: float
    reflector_depth: float

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ValueError("n_elements must be a positive integer.")
        if not self.pitch > 0:
            raise ValueError("pitch must be strictly positive.")
        if not self.reflector_depth > 0:
            raise ValueError("reflector_depth must be strictly positive.")

    @property
    def aperture(self):  # noqa: D401
        """Lateral distance between the first and the last element."""
        return (self.n_elements - 1) * self.pitch

    @property
    def positions(self):  # noqa: D401
        """Lateral element positions."""
        return np.arange(self.n_elements) * self.pitch

    @property
    def nray(self):  # noqa: D401
        """Number of transmit/receive pairs."""
        return self.n_elements ** 2

    @property
    def max_incidence_angle(self):  # noqa: D401
        """Incidence angle of the outermost pair."""
        return np.arctan(self.aperture / (2 * self.reflector_depth))


@dataclass(frozen=True)
class RaySpec:
    """Specular V-shaped path from transmitter ``tx_index`` to receiver ``rx_index``."""

    tx_index: int
    rx_index: int
    incidence_angle: float
    vertex: tuple
    total_length: float
    tx_position: float
    rx_position: float

    @property
    def segments(self):  # noqa: D401
        """The down-going and up-going legs as pairs of (x, y) end points."""
        vertex = np.array(self.vertex)
        return (
            (np.array([self.tx_position, 0.0]), vertex),
            (vertex, np.array([self.rx_position, 0.0])),
        )


def _check_index(geom, index, name):
    if not 0 <= index < geom.n_elements:
        raise IndexError(
            "{} index {} out of range for {} elements.".format(
                name, index, geom.n_elements
            )
        )


def ray_for_pair(geom, t, r):
    """Return the specular ray between elements ``t`` and ``r``.

    Parameters
    ----------
    geom
        An ``AcquisitionGeometry`` instance.
    t
        Transmit element index.
    r
        Receive element index.

    Returns
    -------
    ray
        A ``RaySpec``. Swapping ``t`` and ``r`` gives the same angle, vertex and
        length.

    """
    _check_index(geom, t, "Transmit")
    _check_index(geom, r, "Receive")
    x_t = t * geom.pitch
    x_r = r * geom.pitch
    depth = geom.reflector_depth
    offset = abs(x_t - x_r)
    return RaySpec(
        tx_index=int(t),
        rx_index=int(r),
        incidence_angle=float(np.arctan(offset / (2 * depth))),
        vertex=((x_t + x_r) / 2, depth),
        total_length=float(np.hypot(offset, 2 * depth)),
        tx_position=x_t,
        rx_position=x_r,
    )


def all_rays(geom):
    """Return all ``n_elements**2`` rays, row-major in (t, r)."""
    return [
        ray_for_pair(geom, t, r)
        for t in range(geom.n_elements)
        for r in range(geom.n_elements)
    ]


def ray_angles(geom):
    """Incidence angles of all pairs as an ``(n, n)`` array indexed ``[t, r]``."""
    pos = geom.positions
    return np.arctan(abs(pos[:, None] - pos) / (2 * geom.reflector_depth))


def ray_lengths(geom):
    """Total path lengths of all pairs as an ``(n, n)`` array indexed ``[t, r]``."""
    pos = geom.positions
    return np.hypot(abs(pos[:, None] - pos), 2 * geom.reflector_depth)


@dataclass(frozen=True)
class ImagingGrid:
    """Regular ``n_axial x n_lateral`` reconstruction grid with origin at (0, 0).

    Images on this grid are arrays of shape ``(n_axial, n_lateral)``; the flat
    cell index is ``iaxial * n_lateral + ilateral``.
    """

    n_axial: int
    n_lateral: int
    cell_width: float
    cell_height: float

    def __post_init__(self):
        if self.n_axial < 1 or self.n_lateral < 1:
            raise ValueError("The grid needs at least one cell in each direction.")
        if self.cell_width < 0 or not self.cell_height > 0:
            raise ValueError("Cell sizes must be positive.")

    @classmethod
    def from_geometry(cls, geom, n_axial, n_lateral):
        """Make a grid spanning exactly ``[0, aperture] x [0, reflector_depth]``."""
        return cls(
            n_axial=int(n_axial),
            n_lateral=int(n_lateral),
            cell_width=geom.aperture / n_lateral,
            cell_height=geom.reflector_depth / n_axial,
        )

    @property
    def shape(self):  # noqa: D401
        """Image shape ``(n_axial, n_lateral)``."""
        return (self.n_axial, self.n_lateral)

    @property
    def size(self):  # noqa: D401
        """Number of cells."""
        return self.n_axial * self.n_lateral

    @property
    def width(self):  # noqa: D401
        """Lateral extent."""
        return self.n_lateral * self.cell_width

    @property
    def depth(self):  # noqa: D401
        """Axial extent."""
        return self.n_axial * self.cell_height

    @property
    def lateral_centers(self):  # noqa: D401
        """Lateral coordinates of the cell centers."""
        return (np.arange(self.n_lateral) + 0.5) * self.cell_width

    @property
    def axial_centers(self):  # noqa: D401
        """Axial coordinates of the cell centers."""
        return (np.arange(self.n_axial) + 0.5) * self.cell_height

    def refine(self, factor):
        """Return a grid with ``factor`` times more cells in each direction."""
        if int(factor) != factor or factor < 1:
            raise ValueError("The refinement factor must be a positive integer.")
        return ImagingGrid(
            n_axial=self.n_axial * factor,
            n_lateral=self.n_lateral * factor,
            cell_width=self.cell_width / factor,
            cell_height=self.cell_height / factor,
        )

    def matches(self, geom, rtol=1e-9):
        """Return True when the grid spans exactly the path domain of ``geom``."""
        return bool(
            np.isclose(self.width, geom.aperture, rtol=rtol, atol=1e-15)
            and np.isclose(self.depth, geom.reflector_depth, rtol=rtol, atol=0.0)
        )

    def check_image(self, values):
        """Return ``values`` as a float image of this grid, or raise DimensionError."""
        values = np.asarray(values, dtype=float)
        if values.size != self.size:
            raise DimensionError(
                "Expected {} cells, got {}.".format(self.size, values.size)
            )
        return values.reshape(self.shape)
