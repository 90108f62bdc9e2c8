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

from dataclasses import replace

import numpy as np
import pytest

from coarse_models.models import degrade_oracle, train_tiny_regressor
from depth_io.rasters import DepthMap, DepthUnits, ImageMap
from diffusion.codec import LatentTag, LatentTensor
from diffusion.sampling import conditioning_latents, ddim_sample, ddim_timesteps, refine_depth
from diffusion.schedule import make_schedule
from utils.exceptions import ConfigError, MissingGroundTruth, ShapeError


class VelocityOracle:
    """Emits the exact velocity that points every state at a known clean latent."""

    def __init__(self, z0, schedule):
        self.z0 = z0
        self.schedule = schedule
        self.calls = 0

    def predict_v(self, z, t):
        self.calls += 1
        a = self.schedule.alpha_bar(int(t[0]))
        zt = z[0, -self.z0.shape[0] :]
        eps = (zt - np.sqrt(a) * self.z0) / np.sqrt(1.0 - a)
        return (np.sqrt(a) * eps - np.sqrt(1.0 - a) * self.z0)[None]


@pytest.fixture
def scene(tiny_split):
    image, depth = tiny_split.load_sample(0)
    return image, depth


def test_timesteps():
    assert ddim_timesteps(1000, 1).tolist() == [1000]
    steps = ddim_timesteps(1000, 50)
    assert len(steps) == 50
    assert steps[0] == 1000 and steps[-1] == 1
    assert np.all(np.diff(steps) < 0)
    assert ddim_timesteps(20, 20).tolist() == list(range(20, 0, -1))
    for bad in (0, 1001):
        with pytest.raises(ConfigError):
            ddim_timesteps(1000, bad)


@pytest.mark.parametrize("steps", [1, 10, 50])
def test_oracle_denoiser_recovers_the_clean_latent(steps):
    rng = np.random.default_rng(steps)
    z0 = rng.uniform(-1.0, 1.0, (1, 8, 8))
    oracle = VelocityOracle(z0, make_schedule())
    z_x = rng.uniform(-1.0, 1.0, (3, 8, 8))
    out = ddim_sample(oracle, z_x, np.zeros((1, 8, 8)), steps, seed=5)
    assert oracle.calls == steps
    assert out.tag is LatentTag.DEPTH_STATE
    assert np.sqrt(np.mean((out.values - z0) ** 2)) < 1e-5


def test_sampling_is_seeded(untrained_refiner, rng):
    z_x = LatentTensor(values=rng.uniform(-1, 1, (3, 8, 8)), tag=LatentTag.IMAGE_COND)
    z_c = LatentTensor(values=rng.uniform(-1, 1, (1, 8, 8)), tag=LatentTag.DEPTH_COND)
    a = ddim_sample(untrained_refiner, z_x, z_c, 3, seed=1)
    b = ddim_sample(untrained_refiner, z_x, z_c, 3, seed=1)
    c = ddim_sample(untrained_refiner, z_x, z_c, 3, seed=2)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)


def test_explicit_starting_state(untrained_refiner):
    z_x, z_c = np.zeros((3, 8, 8)), np.zeros((1, 8, 8))
    start = np.ones((1, 8, 8))
    a = ddim_sample(untrained_refiner, z_x, z_c, 2, seed=1, z_init=start)
    b = ddim_sample(untrained_refiner, z_x, z_c, 2, seed=99, z_init=start)
    np.testing.assert_array_equal(a.values, b.values)


def test_latent_size_mismatch(untrained_refiner):
    with pytest.raises(ShapeError):
        ddim_sample(untrained_refiner, np.zeros((3, 8, 8)), np.zeros((1, 4, 4)), 2, seed=0)


class TestRefineDepth:
    def test_refined_map_is_normalized(self, untrained_refiner, scene, fast_config):
        image, depth = scene
        oracle = degrade_oracle(seed=fast_config.seed)
        refined = refine_depth(untrained_refiner, oracle, image, gt=depth, steps=2, seed=0)
        assert refined.shape == depth.shape
        assert refined.units is DepthUnits.NORMALIZED
        assert np.abs(refined.values).max() <= 1.0
        again = refine_depth(untrained_refiner, oracle, image, gt=depth, steps=2, seed=0)
        assert refined.values.tobytes() == again.values.tobytes()

    def test_validity_follows_the_coarse_map(self, untrained_refiner, scene):
        image, depth = scene
        validity = np.ones(depth.shape, dtype=bool)
        validity[:2] = False
        coarse = DepthMap(values=depth.values, validity=validity)
        refined = refine_depth(untrained_refiner, None, image, coarse=coarse, steps=1)
        assert np.array_equal(refined.validity, validity)
        assert np.all(refined.values[:2] == 0.0)

    def test_plugged_regressor_needs_no_ground_truth(self, untrained_refiner, tiny_split, fast_config, scene):
        regressor = train_tiny_regressor(tiny_split, fast_config)
        refined = refine_depth(untrained_refiner, regressor, scene[0], steps=1)
        assert refined.shape == scene[1].shape

    def test_oracle_needs_ground_truth(self, untrained_refiner, scene):
        with pytest.raises(MissingGroundTruth):
            refine_depth(untrained_refiner, degrade_oracle(), scene[0], steps=1)

    def test_needs_a_coarse_source(self, untrained_refiner, scene):
        with pytest.raises(ConfigError):
            refine_depth(untrained_refiner, None, scene[0], steps=1)

    def test_size_must_match_the_patch_grid(self, untrained_refiner):
        image = ImageMap(values=np.zeros((12, 12, 3)))
        with pytest.raises(ShapeError):
            refine_depth(untrained_refiner, None, image, coarse=DepthMap.dense(np.ones((12, 12))), steps=1)


class TestConditioningLatents:
    def test_full_variant(self, untrained_refiner, scene):
        image, depth = scene
        z_x, z_c = conditioning_latents(untrained_refiner, image, depth)
        assert z_x.shape == (3, 16, 16) and z_c.shape == (1, 16, 16)
        assert z_c.values.min() == -1.0 and z_c.values.max() == 1.0

    def test_ablated_inputs_are_zeroed(self, untrained_refiner, scene):
        image, depth = scene
        no_cond = replace(untrained_refiner, variant="no-cond")
        assert not conditioning_latents(no_cond, image, depth)[1].values.any()
        no_image = replace(untrained_refiner, variant="no-image")
        z_x, z_c = conditioning_latents(no_image, image, depth)
        assert not z_x.values.any()
        assert z_c.values.any()
