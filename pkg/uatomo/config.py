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
"""Experiment configuration from layered YAML files.

The layers are, from low to high precedence: the built-in defaults below, a
YAML file and overrides from the command line. Field names carry their units.
"""


import copy
from dataclasses import dataclass
import os

import yaml

from .geometry import AcquisitionGeometry, ImagingGrid
from .physics import PLEXIGLAS, WATER, MediumSpec
from .recon import DEFAULT_WEIGHTS, ReconConfig
from .simulator import PHANTOM_PRESETS, Media, NoiseSpec, PhantomSpec, preset_phantom


__all__ = ["CONFIG_ENV", "DEFAULTS", "ExperimentConfig", "load_config", "load_phantom"]


CONFIG_ENV = "UATOMO_CONFIG"


DEFAULTS = {
    "geometry": {
        "n_elements": 128,
        "pitch_m": 3.0e-4,
        "reflector_depth_m": 0.030,
    },
    "media": {
        "water": {
            "speed_of_sound_m_s": WATER.speed_of_sound,
            "density_kg_m3": WATER.density,
            "attenuation_np_cm": 0.05,
        },
        "reflector": {
            "speed_of_sound_m_s": PLEXIGLAS.speed_of_sound,
            "density_kg_m3": PLEXIGLAS.density,
        },
        # A null speed of sound means unknown, water's is used.
        "tissue": {
            "speed_of_sound_m_s": None,
            "density_kg_m3": 1000.0,
            "label": "tissue",
        },
    },
    "grid": {"n_axial": 64, "n_lateral": 64},
    "recon": {
        "lambda": 0.6,
        "weights": list(DEFAULT_WEIGHTS),
        "epsilon_factor": 1e-6,
        "max_iterations": 2000,
        "gtol": 1e-8,
        "length_scale_m": 0.01,
        "continuation_stages": 4,
        "absolute": True,
    },
    "noise": {"level": 0.0, "seed": 0},
    "simulation": {
        "phantom": "single",
        "refine": 1,
    },
    "output": {
        "binary": False,
        "pgm": False,
        "pgm_window_db_cm": [0.0, 3.0],
        "export_matrix": False,
    },
    "paths": {
        "output_dir": ".",
        "truth": "truth.txt",
        "mask": "mask.txt",
        "tissue": "tissue.txt",
        "water": "water.txt",
        "data": "data.txt",
        "recon": "recon.txt",
        "report": "convergence.txt",
        "metrics": "metrics.txt",
        "metrics_csv": "metrics.csv",
        "matrix": "matrix.txt",
    },
}


def _merge(base, layer, where="config"):
    """Recursively merge ``layer`` into a copy of ``base``, rejecting unknown keys."""
    result = copy.deepcopy(base)
    for key, value in layer.items():
        if key not in base:
            raise ValueError("Unknown {} key: {}".format(where, key))
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError("{}.{} must be a mapping.".format(where, key))
            result[key] = _merge(base[key], value, "{}.{}".format(where, key))
        else:
            result[key] = value
    return result


def _read_yaml(filename):
    with open(filename) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ValueError("Invalid YAML in {}: {}".format(filename, exc)) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError("{} must contain a mapping.".format(filename))
    return data


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated nested settings with accessors for the domain objects."""

    data: dict
    source: str = None

    def section(self, name):
        """Return a copy of one block."""
        return copy.deepcopy(self.data[name])

    def geometry(self):
        """The ``AcquisitionGeometry``."""
        block = self.data["geometry"]
        return AcquisitionGeometry(
            n_elements=int(block["n_elements"]),
            pitch=float(block["pitch_m"]),
            reflector_depth=float(block["reflector_depth_m"]),
        )

    def grid(self, geom=None):
        """The ``ImagingGrid`` spanning the domain of the geometry."""
        geom = geom or self.geometry()
        block = self.data["grid"]
        return ImagingGrid.from_geometry(geom, block["n_axial"], block["n_lateral"])

    def media(self):
        """The ``Media`` with water, reflector and tissue constants."""
        block = self.data["media"]
        water = block["water"]
        reflector = block["reflector"]
        tissue = block["tissue"]
        return Media(
            water=MediumSpec(
                float(water["speed_of_sound_m_s"]),
                float(water["density_kg_m3"]),
                100 * float(water["attenuation_np_cm"]),
                "water",
            ),
            reflector=MediumSpec(
                float(reflector["speed_of_sound_m_s"]),
                float(reflector["density_kg_m3"]),
                0.0,
                "reflector",
            ),
            tissue=None
            if tissue["speed_of_sound_m_s"] is None
            else MediumSpec(
                float(tissue["speed_of_sound_m_s"]),
                float(tissue["density_kg_m3"]),
                0.0,
                str(tissue["label"]),
            ),
        )

    def recon(self):
        """The ``ReconConfig``."""
        block = self.data["recon"]
        return ReconConfig(
            lam=float(block["lambda"]),
            weights=tuple(block["weights"]),
            epsilon_factor=float(block["epsilon_factor"]),
            max_iterations=int(block["max_iterations"]),
            gtol=float(block["gtol"]),
            length_scale=float(block["length_scale_m"]),
            continuation_stages=int(block["continuation_stages"]),
        )

    @property
    def absolute(self):
        """Whether the water attenuation is restored in the normalized data."""
        return bool(self.data["recon"]["absolute"])

    def noise(self):
        """The ``NoiseSpec``."""
        block = self.data["noise"]
        return NoiseSpec(level=float(block["level"]), seed=int(block["seed"]))

    def phantom(self, geom=None):
        """The phantom: a preset name or the name of a phantom YAML file."""
        name = self.data["simulation"]["phantom"]
        if isinstance(name, dict):
            return PhantomSpec.from_dict(name)
        if name in PHANTOM_PRESETS:
            return preset_phantom(name, geom or self.geometry())
        return load_phantom(name)

    def path(self, name):
        """Location of one of the files in the ``paths`` block."""
        paths = self.data["paths"]
        return os.path.join(paths["output_dir"], paths[name])


def load_config(filename=None, overrides=None):
    """Load the layered configuration.

    Parameters
    ----------
    filename
        YAML file, or None for the defaults only.
    overrides
        Nested dictionary with the highest precedence, e.g. from the command line.

    Returns
    -------
    config
        An ``ExperimentConfig``. Invalid values raise ValueError.

    """
    data = DEFAULTS
    if filename is not None:
        data = _merge(data, _read_yaml(filename))
    data = _merge(data, overrides or {})
    config = ExperimentConfig(data, filename)
    # Build every domain object once, so that errors surface at load time.
    geom = config.geometry()
    config.grid(geom)
    config.media()
    config.recon()
    config.noise()
    window = data["output"]["pgm_window_db_cm"]
    if len(window) != 2 or not window[1] > window[0]:
        raise ValueError("output.pgm_window_db_cm must be [low, high] with high > low.")
    return config


def load_phantom(filename):
    """Load a ``PhantomSpec`` from YAML.

    The file holds ``background_db_cm`` and a list ``inclusions`` whose items
    have ``shape``, ``center_m``, ``half_widths_m`` and ``attenuation_db_cm``.
    """
    return PhantomSpec.from_dict(_read_yaml(filename))

