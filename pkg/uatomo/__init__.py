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
"""Ultrasound attenuation tomography with a passive reflector."""

# Import the submodules, such that the package namespace gives access to them.
import uatomo.geometry
import uatomo.raypath
import uatomo.physics
import uatomo.calibration
import uatomo.recon
import uatomo.simulator
import uatomo.metrics

from .version import __version__
