# SPDX-License-Identifier: GPL-3.0-or-later
# DepthLab – diffusion-based refinement of monocular depth estimates
# Copyright © 2025 The DepthLab Authors
#
# This file is part of DepthLab.
# DepthLab is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# DepthLab is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this file.  If not, see <https://www.gnu.org/licenses/>.

"""
Raster types and file formats for depth and image data.

This module provides the DepthMap and ImageMap containers, per-image depth normalization to [-1, 1], and
bit-exact PFM/PGM readers and writers shared by every other DepthLab module.
"""

from . import pfm, rasters
from .pfm import read_pfm, read_pgm, write_pfm, write_pgm
from .rasters import DepthMap, DepthUnits, ImageMap, NormalizationRecord, denormalize_depth, normalize_depth

__all__ = [
    "pfm",
    "rasters",
    "DepthMap",
    "DepthUnits",
    "ImageMap",
    "NormalizationRecord",
    "normalize_depth",
    "denormalize_depth",
    "read_pfm",
    "write_pfm",
    "read_pgm",
    "write_pgm",
]
