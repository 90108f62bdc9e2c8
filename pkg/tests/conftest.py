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
#
# ------------------------------------------------------------------------------------------------------------------------
#
# Shared fixtures: small rasters, a tiny rendered split and a fast run configuration.
#

import numpy as np
import pytest

from depth_io.rasters import DepthMap, ImageMap
from diffusion.denoiser import DenoiserConfig, RefinerCheckpoint, init_denoiser
from diffusion.schedule import make_schedule
from diffusion.training import mask_config_from
from simulation.scenes import SceneSpec
from simulation.splits import generate_split
from utils.checkpoints import state_to_numpy
from utils.config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ramp_depth():
    """16x16 metric ramp from 1 to 2.5 along the rows, all pixels valid."""
    values = np.linspace(1.0, 2.5, 16 * 16).reshape(16, 16)
    return DepthMap.dense(values)


@pytest.fixture
def gray_image():
    return ImageMap(values=np.full((16, 16, 3), 0.5))


@pytest.fixture
def fast_config():
    """A configuration small enough for unit tests: 16x16 rasters, a 50-step schedule and a narrow denoiser."""
    return RunConfig(
        size=16,
        n_primitives=3,
        patch_size=8,
        threshold=0.1,
        timesteps=50,
        iterations=3,
        batch_size=2,
        base_channels=8,
        ddim_steps=4,
        ensemble_size=2,
        downscale_factor=4,
        coarse_steps=3,
        coarse_batch_size=2,
        log_every=1,
        record_timing=False,
    )


@pytest.fixture
def tiny_split(tmp_path, fast_config):
    spec = SceneSpec(seed=7, height=fast_config.size, width=fast_config.size, n_primitives=fast_config.n_primitives)
    return generate_split(spec, 3, str(tmp_path / "split"))


@pytest.fixture
def untrained_refiner(fast_config):
    """A refiner with freshly initialized weights, enough to exercise inference end to end."""
    denoiser_config = DenoiserConfig(base_channels=fast_config.base_channels)
    module = init_denoiser(denoiser_config, fast_config.seed)
    return RefinerCheckpoint(
        parameters=state_to_numpy(module),
        denoiser=denoiser_config,
        schedule=make_schedule(fast_config.schedule, fast_config.timesteps),
        mask=mask_config_from(fast_config),
        codec_factor=fast_config.codec_factor,
        variant=fast_config.variant,
        run_config=fast_config.to_dict(),
    )
