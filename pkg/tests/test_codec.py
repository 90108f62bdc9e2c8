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

import numpy as np
import pytest
import torch

from diffusion.codec import LatentTag, LatentTensor, decode, depth_to_raster, encode, encode_latent
from utils.exceptions import RangeError, ShapeError


@pytest.mark.parametrize("f", [1, 2, 4, 8])
def test_decode_inverts_encode_bit_exactly(f, rng):
    x = rng.standard_normal((3, 16, 24)).astype(np.float32)
    z = encode(x, f)
    assert z.shape == (3 * f * f, 16 // f, 24 // f)
    assert decode(z, f).tobytes() == x.tobytes()


def test_channel_order_within_a_window():
    x = np.arange(4, dtype=np.float32).reshape(1, 2, 2)
    assert encode(x, 2)[:, 0, 0].tolist() == [0.0, 1.0, 2.0, 3.0]


def test_batched_torch_tensors():
    x = torch.arange(2 * 1 * 4 * 4, dtype=torch.float32).reshape(2, 1, 4, 4)
    z = encode(x, 2)
    assert tuple(z.shape) == (2, 4, 2, 2)
    assert torch.equal(decode(z, 2), x)


def test_non_divisible_raster():
    with pytest.raises(ShapeError):
        encode(np.zeros((1, 6, 8)), 4)


def test_decode_needs_matching_channels():
    with pytest.raises(ShapeError):
        decode(np.zeros((3, 2, 2)), 2)


def test_tagged_latent():
    z = encode_latent(depth_to_raster(np.ones((4, 4))), 2, LatentTag.DEPTH_COND)
    assert z.shape == (4, 2, 2)
    assert z.channels == 4
    assert z.tag is LatentTag.DEPTH_COND


def test_latent_validation():
    with pytest.raises(ShapeError):
        LatentTensor(values=np.zeros((2, 2)), tag="depth_state")
    with pytest.raises(RangeError):
        LatentTensor(values=np.full((1, 2, 2), np.inf), tag="depth_state")
