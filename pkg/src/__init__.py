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
DepthLab: depth-conditioned diffusion refinement of coarse monocular depth.

A desk-scale toolkit that refines the output of any coarse depth model with a conditional diffusion model trained
on procedurally generated scenes, together with the affine-invariant evaluation protocol used to score it.
"""

__version__ = "1.0.0"
__author__ = "The DepthLab Authors"
