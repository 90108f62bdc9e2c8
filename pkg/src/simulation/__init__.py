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
Procedural scene generation for synthetic training and test splits.

This module renders deterministic (image, depth) pairs by ray-casting simple analytic primitives, and writes them
to disk as PFM splits with a manifest.
"""

from . import scenes, splits
from .scenes import Primitive, SceneSample, SceneSpec, generate_sample, render_scene
from .splits import Manifest, generate_split, load_manifest

__all__ = [
    "scenes",
    "splits",
    "Primitive",
    "SceneSample",
    "SceneSpec",
    "generate_sample",
    "render_scene",
    "Manifest",
    "generate_split",
    "load_manifest",
]
