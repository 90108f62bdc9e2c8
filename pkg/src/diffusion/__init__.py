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
Depth-conditioned diffusion refiner.

This module provides the noise schedule and v-prediction algebra, the space-to-depth latent codec, the conditional
denoiser and its checkpoint, the masked training objective, the training loop and deterministic DDIM inference.
"""

from . import codec, denoiser, objective, sampling, schedule, training
from .codec import LatentTag, LatentTensor, decode, encode
from .denoiser import VARIANTS, Denoiser, DenoiserConfig, RefinerCheckpoint, denoiser_forward, variant_flags
from .objective import masked_v_loss
from .sampling import ddim_sample, ddim_timesteps, refine_depth
from .schedule import NoiseSchedule, add_noise, make_schedule, v_target
from .training import train_refiner

__all__ = [
    "codec",
    "denoiser",
    "objective",
    "sampling",
    "schedule",
    "training",
    "LatentTag",
    "LatentTensor",
    "decode",
    "encode",
    "VARIANTS",
    "Denoiser",
    "DenoiserConfig",
    "RefinerCheckpoint",
    "denoiser_forward",
    "variant_flags",
    "masked_v_loss",
    "ddim_sample",
    "ddim_timesteps",
    "refine_depth",
    "NoiseSchedule",
    "add_noise",
    "make_schedule",
    "v_target",
    "train_refiner",
]
