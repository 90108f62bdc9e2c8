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
Local patch masking for the refiner's training objective.

This module compares the aligned conditioning with the label patch by patch, builds the pixel-space mask and pools
it down to the codec-resolution mask used by the loss.
"""

from . import patch_mask
from .patch_mask import (
    LatentMask,
    MaskConfig,
    PatchMask,
    build_latent_mask,
    build_pixel_mask,
    downscale_mask,
    patch_distance,
    save_mask_pgm,
)

__all__ = [
    "patch_mask",
    "LatentMask",
    "MaskConfig",
    "PatchMask",
    "build_latent_mask",
    "build_pixel_mask",
    "downscale_mask",
    "patch_distance",
    "save_mask_pgm",
]
