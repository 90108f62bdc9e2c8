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
Coarse depth models supplying the refiner's conditioning.

This module provides the degradation oracle, the tiny trainable regressor, the scale-and-shift-invariant loss and
the shared interface through which either model is plugged into training and inference.
"""

from . import degrade, models, regressor
from .degrade import DegradeParams
from .models import (
    CoarseKind,
    CoarseModel,
    degrade_oracle,
    degrade_oracle_from_config,
    load_coarse_model,
    predict_coarse,
    resolve_coarse_model,
    save_coarse_model,
    ssi_loss,
    train_tiny_regressor,
)

__all__ = [
    "degrade",
    "models",
    "regressor",
    "DegradeParams",
    "CoarseKind",
    "CoarseModel",
    "degrade_oracle",
    "degrade_oracle_from_config",
    "load_coarse_model",
    "predict_coarse",
    "resolve_coarse_model",
    "save_coarse_model",
    "ssi_loss",
    "train_tiny_regressor",
]
