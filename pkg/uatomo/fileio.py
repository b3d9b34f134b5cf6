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
"""Reading and writing amplitude matrices, images, masks and normalized data.

Text files start with ``#``-prefixed ``key=value`` header lines followed by
comma-separated values. Amplitude matrices have one ``t,r,value`` record per
pair; images, masks and normalized data are written as rows. A file name
ending in ``.f64`` selects the binary variant: flat little-endian float64
values in row-major order, with the header in a sidecar file ``<name>.hdr``.
Images are stored in dB/cm.
"""


import os

import numpy as np

from .calibration import AmplitudeMatrix, NormalizedData
from .geometry import DimensionError, ImagingGrid
from .recon import AttenuationImage


__all__ = [
    "write_amplitude_matrix",
    "read_amplitude_matrix",
    "write_image",
    "read_image",
    "write_mask",
    "read_mask",
    "write_normalized_data",
    "read_normalized_data",
    "write_pgm",
]


BINARY_SUFFIX = ".f64"


def _is_binary(filename):
    return str(filename).endswith(BINARY_SUFFIX)


def _format_header(kind, header):
    lines = ["# uatomo {}\n".format(kind)]
    for key, value in header.items():
        if isinstance(value, float):
            value = "{:.12e}".format(value)
        lines.append("# {}={}\n".format(key, value))
    return "".join(lines)


def _parse_header(filename):
    """Return the kind and the ``key=value`` pairs of a header."""
    kind = None
    header = {}
    with open(filename) as f:
        for line in f:
            if not line.startswith("#"):
                break
            line = line[1:].strip()
            if "=" in line:
                key, value = line.split("=", 1)
                header[key.strip()] = value.strip()
            elif line.startswith("uatomo "):
                kind = line[len("uatomo ") :]
    return kind, header


def _write(filename, kind, header, array, fmt):
    array = np.asarray(array)
    if _is_binary(filename):
        header = dict(header, shape="x".join(str(n) for n in array.shape))
        with open(str(filename) + ".hdr", "w") as f:
            f.write(_format_header(kind, header))
        np.ascontiguousarray(array, dtype="<f8").tofile(filename)
    else:
        with open(filename, "w") as f:
            f.write(_format_header(kind, header))
            np.savetxt(f, array, fmt=fmt, delimiter=",")


def _read(filename, kind):
    """Return the header and the 2D body of a file written by ``_write``."""
    if not os.path.isfile(filename):
        raise FileNotFoundError("No such file: {}".format(filename))
    if _is_binary(filename):
        found, header = _parse_header(str(filename) + ".hdr")
        shape = _get(
            header, "shape", lambda v: tuple(int(n) for n in v.split("x")), filename
        )
        array = np.fromfile(filename, dtype="<f8").reshape(shape)
    else:
        found, header = _parse_header(filename)
        array = np.loadtxt(filename, delimiter=",", comments="#", ndmin=2)
    if found != kind:
        raise ValueError("{} is not a {} file.".format(filename, kind))
    return header, array


def _get(header, key, convert, filename):
    try:
        return convert(header[key])
    except (KeyError, ValueError) as exc:
        raise ValueError("Bad or missing header field {} in {}.".format(key, filename)) from exc


def write_amplitude_matrix(filename, amplitudes, metadata=None):
    """Write an ``AmplitudeMatrix``, with optional extra header fields."""
    nel = amplitudes.n_elements
    header = {
        "n_elements": nel,
        "medium": amplitudes.medium,
        "reflector_depth_m": float(amplitudes.reflector_depth),
        "units": "arbitrary",
        "layout": "t,r,value",
    }
    header.update(metadata or {})
    t, r = np.divmod(np.arange(nel * nel), nel)
    records = np.column_stack([t, r, amplitudes.values.ravel()])
    _write(filename, "amplitude-matrix", header, records, ("%d", "%d", "%.17e"))


def read_amplitude_matrix(filename):
    """Read an ``AmplitudeMatrix``."""
    header, records = _read(filename, "amplitude-matrix")
    nel = _get(header, "n_elements", int, filename)
    if records.shape != (nel * nel, 3):
        raise DimensionError(
            "{} holds {} records, expected {}.".format(filename, len(records), nel * nel)
        )
    t, r = np.divmod(np.arange(nel * nel), nel)
    if (records[:, 0] != t).any() or (records[:, 1] != r).any():
        raise ValueError("Records in {} are not ordered row-major in (t, r).".format(filename))
    return AmplitudeMatrix(
        records[:, 2].reshape(nel, nel),
        header.get("medium", ""),
        _get(header, "reflector_depth_m", float, filename),
    )


def _grid_header(grid):
    return {
        "n_axial": grid.n_axial,
        "n_lateral": grid.n_lateral,
        "cell_width_m": float(grid.cell_width),
        "cell_height_m": float(grid.cell_height),
    }


def _grid_from_header(header, filename):
    return ImagingGrid(
        n_axial=_get(header, "n_axial", int, filename),
        n_lateral=_get(header, "n_lateral", int, filename),
        cell_width=_get(header, "cell_width_m", float, filename),
        cell_height=_get(header, "cell_height_m", float, filename),
    )


def write_image(filename, image):
    """Write an ``AttenuationImage`` in dB/cm, one grid row per line."""
    header = dict(_grid_header(image.grid), units="dB/cm")
    _write(filename, "image", header, image.db_per_cm, "%.17e")


def read_image(filename):
    """Read an ``AttenuationImage`` written by ``write_image``."""
    header, values = _read(filename, "image")
    grid = _grid_from_header(header, filename)
    return AttenuationImage.from_db_per_cm(grid, grid.check_image(values))


def write_mask(filename, mask, grid):
    """Write a boolean inclusion mask as 0/1 values."""
    mask = grid.check_image(mask) != 0
    header = dict(_grid_header(grid), units="mask")
    _write(filename, "mask", header, mask.astype(int), "%d")


def read_mask(filename):
    """Read a mask, returns the boolean array and its ``ImagingGrid``."""
    header, values = _read(filename, "mask")
    grid = _grid_from_header(header, filename)
    return grid.check_image(values) != 0, grid


def write_normalized_data(filename, data):
    """Write ``b`` as an ``(n, n)`` matrix indexed ``[t, r]``, in Np."""
    nel = data.geom.n_elements
    header = {
        "n_elements": nel,
        "pitch_m": float(data.geom.pitch),
        "reflector_depth_m": float(data.geom.reflector_depth),
        "units": "Np",
        "absolute": int(data.absolute),
    }
    header.update(data.metadata)
    _write(filename, "normalized-data", header, data.values.reshape(nel, nel), "%.17e")


def read_normalized_data(filename, geom):
    """Read normalized data written by ``write_normalized_data``."""
    header, values = _read(filename, "normalized-data")
    absolute = bool(_get(header, "absolute", int, filename))
    if values.shape != (geom.n_elements, geom.n_elements):
        raise DimensionError("{} does not match the geometry.".format(filename))
    return NormalizedData(values.ravel(), geom, absolute)


def write_pgm(filename, values, window):
    """Write a 16-bit binary portable graymap.

    Parameters
    ----------
    filename
        Output file.
    values
        2D array, e.g. an image in dB/cm.
    window
        ``(low, high)``, mapped linearly onto 0 ... 65535 and clipped.

    """
    low, high = window
    if not high > low:
        raise ValueError("The display window must have high > low.")
    values = np.asarray(values, dtype=float)
    scaled = np.clip((values - low) / (high - low), 0.0, 1.0)
    gray = np.round(scaled * 65535).astype(">u2")
    with open(filename, "wb") as f:
        f.write("P5\n{} {}\n65535\n".format(values.shape[1], values.shape[0]).encode())
        f.write(gray.tobytes())
