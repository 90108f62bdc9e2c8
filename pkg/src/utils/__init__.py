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
Shared utilities for DepthLab: the run configuration, deterministic seeding, HDF5 checkpoints and the exception
hierarchy.
"""

from . import checkpoints, config, exceptions, seeding
from .config import RunConfig, load_config
from .exceptions import DepthLabError

__all__ = ["checkpoints", "config", "exceptions", "seeding", "RunConfig", "load_config", "DepthLabError"]
