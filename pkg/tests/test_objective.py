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

from diffusion.objective import masked_v_loss
from masking.patch_mask import LatentMask
from utils.exceptions import EmptyMask, ShapeError


def test_all_ones_mask_is_the_plain_mean(rng):
    v_hat, v = rng.standard_normal((2, 4, 4)), rng.standard_normal((2, 4, 4))
    loss = masked_v_loss(v_hat, v, LatentMask.ones(4, 4))
    assert loss == pytest.approx(np.mean((v_hat - v) ** 2), abs=1e-10)


def test_masked_cells_are_ignored(rng):
    v = rng.standard_normal((3, 2, 2))
    v_hat = v.copy()
    v_hat[:, 0, 1] += 100.0
    v_hat[:, 1, 0] += 1.0
    mask = np.array([[True, False], [True, True]])
    # three kept cells times three channels; only the (1, 0) cell carries an error of 1
    assert masked_v_loss(v_hat, v, mask) == pytest.approx(3.0 / 9.0)


def test_batched_masks_are_pooled(rng):
    v_hat, v = rng.standard_normal((2, 1, 2, 2)), rng.standard_normal((2, 1, 2, 2))
    masks = np.array([[[1, 1], [1, 1]], [[1, 0], [0, 0]]], dtype=bool)
    expected = ((v_hat - v) ** 2)[:, 0][masks].mean()
    assert masked_v_loss(v_hat, v, masks) == pytest.approx(expected)


def test_torch_and_numpy_agree(rng):
    v_hat, v = rng.standard_normal((2, 2, 4, 4)), rng.standard_normal((2, 2, 4, 4))
    masks = rng.random((2, 4, 4)) > 0.4
    expected = masked_v_loss(v_hat, v, masks)
    got = masked_v_loss(torch.from_numpy(v_hat), torch.from_numpy(v), torch.from_numpy(masks))
    assert float(got) == pytest.approx(expected, rel=1e-12)


def test_empty_mask():
    with pytest.raises(EmptyMask):
        masked_v_loss(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), np.zeros((2, 2), dtype=bool))
    with pytest.raises(EmptyMask):
        masked_v_loss(torch.zeros(1, 1, 2, 2), torch.zeros(1, 1, 2, 2), np.zeros((1, 2, 2), dtype=bool))


def test_shape_errors():
    with pytest.raises(ShapeError):
        masked_v_loss(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)), LatentMask.ones(2, 2))
    with pytest.raises(ShapeError):
        masked_v_loss(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), LatentMask.ones(3, 3))


def micro_velocity(params, x):
    """Four-parameter velocity model: p0 * x + p1 * tanh(p2 * x) + p3."""
    return params[0] * x + params[1] * torch.tanh(params[2] * x) + params[3]


def test_gradients_match_central_differences():
    gen = torch.Generator().manual_seed(0)
    x = torch.randn(2, 1, 4, 4, generator=gen, dtype=torch.float64)
    v = torch.randn(2, 1, 4, 4, generator=gen, dtype=torch.float64)
    mask = torch.rand(2, 4, 4, generator=gen, dtype=torch.float64) > 0.3
    params = torch.tensor([0.7, -0.4, 1.3, 0.2], dtype=torch.float64, requires_grad=True)

    loss = masked_v_loss(micro_velocity(params, x), v, mask)
    loss.backward()
    analytic = params.grad.detach().numpy()

    step = 1e-4
    numeric = np.zeros(4)
    with torch.no_grad():
        for k in range(4):
            shift = torch.zeros(4, dtype=torch.float64)
            shift[k] = step
            up = masked_v_loss(micro_velocity(params + shift, x), v, mask)
            down = masked_v_loss(micro_velocity(params - shift, x), v, mask)
            numeric[k] = float(up - down) / (2 * step)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-3)
