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
Least-squares scale and shift alignment between depth maps.

This module provides the closed-form affine fit used for global pre-alignment of the coarse conditioning, and
reused by the scale-and-shift-invariant loss, ensembling and evaluation.
"""

from . import affine
from .affine import AffineFit, apply_affine, fit_affine, fit_affine_arrays, prealign_conditioning

__all__ = ["affine", "AffineFit", "apply_affine", "fit_affine", "fit_affine_arrays", "prealign_conditioning"]
