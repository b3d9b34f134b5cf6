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
"""Sparse ray-path matrix with exact per-cell intersection lengths.

Each straight leg of a V-shaped ray is traversed with Siddon's parametric
method: the parameters at which the leg crosses lateral and axial grid lines
are merged, consecutive parameters delimit the pieces inside one cell, and
the cell of each piece is located from its midpoint. Midpoint lookup makes
cells half-open, ``[low, high)``, so a piece lying on a grid line is
counted once.
"""


import logging

import numpy as np
from scipy.sparse import csr_matrix

from .geometry import DimensionError, ray_for_pair


__all__ = [
    "GridMismatchError",
    "RayPathMatrix",
    "trace_segment",
    "build_system_matrix",
    "apply",
    "apply_transpose",
]


logger = logging.getLogger(__name__)


class GridMismatchError(ValueError):
    """Raised when the imaging grid does not span the ray domain of the geometry."""


def _crossings(start, delta, spacing, ncell):
    """Parameters in (0, 1) at which a leg crosses the grid lines of one axis."""
    if delta == 0 or spacing == 0:
        return np.zeros(0)
    alphas = (np.arange(ncell + 1) * spacing - start) / delta
    return alphas[(alphas > 0) & (alphas < 1)]


def _cell_index(coord, spacing, ncell):
    if spacing == 0:
        return np.zeros(coord.shape, dtype=int)
    return np.clip(np.floor(coord / spacing).astype(int), 0, ncell - 1)


def trace_segment(start, end, grid):
    """Compute the cells crossed by a straight segment and the lengths inside them.

    Parameters
    ----------
    start, end
        End points ``(x, y)`` of the segment, inside the grid domain.
    grid
        An ``ImagingGrid`` instance.

    Returns
    -------
    cells
        Flat cell indices in the order in which they are visited.
    lengths
        Intersection lengths, summing to the segment length.

    """
    start = np.asarray(start, dtype=float)
    delta = np.asarray(end, dtype=float) - start
    length = np.hypot(delta[0], delta[1])
    if length == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    alphas = np.unique(
        np.concatenate(
            [
                [0.0, 1.0],
                _crossings(start[0], delta[0], grid.cell_width, grid.n_lateral),
                _crossings(start[1], delta[1], grid.cell_height, grid.n_axial),
            ]
        )
    )
    lengths = length * np.diff(alphas)
    middle = 0.5 * (alphas[:-1] + alphas[1:])
    ilateral = _cell_index(
        start[0] + middle * delta[0], grid.cell_width, grid.n_lateral
    )
    iaxial = _cell_index(start[1] + middle * delta[1], grid.cell_height, grid.n_axial)
    keep = lengths > 0
    return (iaxial * grid.n_lateral + ilateral)[keep], lengths[keep]


def _trace_ray(ray, grid):
    """Return sorted unique cells and summed lengths for both legs of a ray."""
    parts = [trace_segment(start, end, grid) for start, end in ray.segments]
    cells = np.concatenate([part[0] for part in parts])
    lengths = np.concatenate([part[1] for part in parts])
    # The two legs share cells near the vertex; a normal-incidence ray shares all.
    unique_cells, inverse = np.unique(cells, return_inverse=True)
    return unique_cells, np.bincount(inverse, weights=lengths)


class RayPathMatrix:
    """Sparse ``M x (N1 * N2)`` matrix of path lengths, in meters.

    Rows are ordered row-major in (t, r); columns follow the flat cell index of
    the ``ImagingGrid``. The underlying ``scipy.sparse.csr_matrix`` has sorted
    column indices and no duplicates.
    """

    def __init__(self, matrix, geom, grid):
        if matrix.shape != (geom.nray, grid.size):
            raise DimensionError(
                "Matrix shape {} does not match {} rays and {} cells.".format(
                    matrix.shape, geom.nray, grid.size
                )
            )
        self.matrix = matrix
        self.geom = geom
        self.grid = grid

    @property
    def shape(self):  # noqa: D401
        """Shape ``(M, N1 * N2)``."""
        return self.matrix.shape

    @property
    def nnz(self):  # noqa: D401
        """Number of stored entries."""
        return self.matrix.nnz

    def row_sums(self):
        """Total path length of every ray through the grid."""
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def triplets(self):
        """Return ``(rows, cols, values)`` in canonical order."""
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def apply(self, image):
        """Path integrals ``L @ alpha`` for every ray."""
        values = np.asarray(image, dtype=float)
        if values.size != self.shape[1]:
            raise DimensionError(
                "Image has {} cells, matrix expects {}.".format(
                    values.size, self.shape[1]
                )
            )
        return self.matrix.dot(values.ravel())

    def apply_transpose(self, vector):
        """Back-projection ``L.T @ v``, returned as an image of the grid."""
        values = np.asarray(vector, dtype=float)
        if values.shape != (self.shape[0],):
            raise DimensionError(
                "Vector has shape {}, matrix expects ({},).".format(
                    values.shape, self.shape[0]
                )
            )
        return self.matrix.T.dot(values).reshape(self.grid.shape)

    def save_triplets(self, filename):
        """Write the matrix as ``row,col,value`` lines."""
        rows, cols, values = self.triplets()
        with open(filename, "w") as f:
            for row, col, value in zip(rows, cols, values):
                f.write("{:d},{:d},{:.12e}\n".format(row, col, value))


def build_system_matrix(geom, grid):
    """Build the ray-path matrix for all transmit/receive pairs.

    Parameters
    ----------
    geom
        An ``AcquisitionGeometry`` instance.
    grid
        An ``ImagingGrid`` spanning exactly ``[0, aperture] x [0, d]``.

    Returns
    -------
    L
        A ``RayPathMatrix``. Pairs (t, r) and (r, t) follow the same path and
        get bit-identical rows.

    """
    if not grid.matches(geom):
        raise GridMismatchError(
            "Grid spans {:.6e} x {:.6e} m, geometry needs {:.6e} x {:.6e} m.".format(
                grid.width, grid.depth, geom.aperture, geom.reflector_depth
            )
        )
    nel = geom.n_elements
    logger.info(
        "Tracing %d rays on a %d x %d grid", geom.nray, grid.n_axial, grid.n_lateral
    )
    traced = {}
    for t in range(nel):
        for r in range(t, nel):
            traced[t, r] = _trace_ray(ray_for_pair(geom, t, r), grid)
    rows = [traced[min(t, r), max(t, r)] for t in range(nel) for r in range(nel)]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(cells) for cells, _ in rows])
    indices = np.concatenate([cells for cells, _ in rows])
    data = np.concatenate([lengths for _, lengths in rows])
    matrix = csr_matrix((data, indices, indptr), shape=(geom.nray, grid.size))
    logger.info("Ray-path matrix has %d nonzeros", matrix.nnz)
    return RayPathMatrix(matrix, geom, grid)


def apply(L, image):
    """Path integrals of ``image`` along all rays of ``L``."""
    return L.apply(image)


def apply_transpose(L, vector):
    """Back-project a vector with one value per ray onto the grid of ``L``."""
    return L.apply_transpose(vector)
