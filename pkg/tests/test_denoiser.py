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

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest
import torch

from diffusion.codec import LatentTag, LatentTensor
from diffusion.denoiser import (
    VARIANTS,
    DenoiserConfig,
    RefinerCheckpoint,
    denoiser_forward,
    get_time_embedding,
    init_denoiser,
    variant_flags,
)
from utils.checkpoints import save_checkpoint
from utils.exceptions import ConfigError, FormatError, MissingCheckpoint, ShapeError


def test_channel_layout_follows_the_codec():
    config = DenoiserConfig.for_codec(2, base_channels=8)
    assert (config.image_channels, config.depth_channels) == (12, 4)
    assert config.in_channels == 20


def test_output_shape():
    module = init_denoiser(DenoiserConfig(base_channels=8), seed=0)
    out = module(torch.zeros(2, 5, 8, 12), torch.tensor([1, 50]))
    assert tuple(out.shape) == (2, 1, 8, 12)


def test_input_shape_checks():
    module = init_denoiser(DenoiserConfig(base_channels=8), seed=0)
    with pytest.raises(ShapeError):
        module(torch.zeros(1, 4, 8, 8), torch.tensor([1]))
    with pytest.raises(ShapeError):
        module(torch.zeros(1, 5, 6, 8), torch.tensor([1]))


def test_initialization_depends_only_on_the_seed():
    config = DenoiserConfig(base_channels=8)
    a, b, c = init_denoiser(config, 3), init_denoiser(config, 3), init_denoiser(config, 4)
    for (name, pa), (_, pb), (_, pc) in zip(a.state_dict().items(), b.state_dict().items(), c.state_dict().items()):
        assert torch.equal(pa, pb), name
    assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


def test_time_embedding():
    emb = get_time_embedding(torch.tensor([0, 10]), 8)
    assert tuple(emb.shape) == (2, 8)
    assert emb[0, :4].abs().max() == 0.0
    assert torch.allclose(emb[0, 4:], torch.ones(4))


@pytest.mark.parametrize("config", [{"base_channels": 12}, {"temb_dim": 3}])
def test_invalid_denoiser_config(config):
    with pytest.raises(ConfigError):
        DenoiserConfig(**config)


def test_variants():
    assert set(VARIANTS) == {"no-cond", "no-align", "no-mask", "full", "no-image"}
    assert variant_flags("full") == {"condition": True, "align": True, "mask": True, "image": True}
    assert variant_flags("no-cond")["condition"] is False
    with pytest.raises(ConfigError):
        variant_flags("half")


def test_checkpoint_round_trip(tmp_path, untrained_refiner, rng):
    path = str(tmp_path / "refiner.h5")
    untrained_refiner.save(path)
    loaded = RefinerCheckpoint.load(path)
    assert loaded.variant == untrained_refiner.variant
    assert loaded.denoiser == untrained_refiner.denoiser
    assert loaded.mask == untrained_refiner.mask
    assert loaded.schedule.T == untrained_refiner.schedule.T
    assert loaded.run_config == untrained_refiner.run_config
    z = rng.standard_normal((1, 5, 8, 8)).astype(np.float32)
    t = np.array([7])
    np.testing.assert_array_equal(loaded.predict_v(z, t), untrained_refiner.predict_v(z, t))


def test_loading_a_foreign_checkpoint(tmp_path):
    path = str(tmp_path / "coarse.h5")
    save_checkpoint(path, "tiny_regressor", {}, {})
    with pytest.raises(FormatError):
        RefinerCheckpoint.load(path)
    incomplete = str(tmp_path / "incomplete.h5")
    save_checkpoint(incomplete, "refiner", {}, {"variant": "full"})
    with pytest.raises(FormatError):
        RefinerCheckpoint.load(incomplete)
    with pytest.raises(MissingCheckpoint):
        RefinerCheckpoint.load(str(tmp_path / "missing.h5"))


def test_forward_on_latents_and_batches(untrained_refiner, rng):
    z = rng.standard_normal((5, 8, 8)).astype(np.float32)
    single = denoiser_forward(untrained_refiner, LatentTensor(values=z, tag=LatentTag.DEPTH_STATE), 10)
    assert isinstance(single, LatentTensor)
    assert single.shape == (1, 8, 8)
    batch = denoiser_forward(untrained_refiner, np.stack([z, z]), 10)
    assert batch.shape == (2, 1, 8, 8)
    np.testing.assert_allclose(batch[0], single.values, atol=1e-6)


def test_module_is_built_once_across_threads(untrained_refiner):
    fresh = replace(untrained_refiner, _module=None)
    with ThreadPoolExecutor(max_workers=8) as executor:
        modules = list(executor.map(lambda _: fresh.module(), range(16)))
    assert all(module is modules[0] for module in modules)
