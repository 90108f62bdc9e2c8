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

from depth_io.pfm import read_pgm
from depth_io.rasters import DepthMap
from masking.patch_mask import (
    LatentMask,
    MaskConfig,
    build_latent_mask,
    build_pixel_mask,
    downscale_mask,
    patch_distance,
    save_mask_pgm,
)
from utils.exceptions import ConfigError, ShapeError


def random_pair(rng, size=16):
    a = DepthMap.dense(rng.uniform(-1.0, 1.0, (size, size)))
    b = DepthMap.dense(a.values + rng.normal(0.0, rng.uniform(0.01, 0.3), (size, size)))
    return a, b


def test_mask_properties_on_random_pairs():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        a, b = random_pair(rng)
        w = int(rng.choice([2, 4, 8]))
        eta_lo, eta_hi = sorted(rng.uniform(0.01, 0.5, 2))
        lo = build_pixel_mask(a, b, MaskConfig(patch_size=w, threshold=eta_lo))
        hi = build_pixel_mask(a, b, MaskConfig(patch_size=w, threshold=eta_hi))
        assert np.all(lo.values <= hi.values)
        assert np.array_equal(lo.values, build_pixel_mask(b, a, MaskConfig(patch_size=w, threshold=eta_lo)).values)
        assert build_pixel_mask(a, a, MaskConfig(patch_size=w, threshold=eta_lo)).values.all()
        latent = build_latent_mask(a, b, MaskConfig(patch_size=w, threshold=eta_lo, codec_factor=w))
        assert np.array_equal(latent.values, lo.per_patch)


def test_distance_at_the_cutoff_is_kept():
    a = DepthMap.dense(np.zeros((4, 4)))
    values = np.zeros((4, 4))
    values[0, 0] = 1.0
    values[2, 2] = 1.0 + 2.0**-10
    b = DepthMap.dense(values)
    cfg = MaskConfig(patch_size=2, threshold=0.5)
    assert cfg.cutoff == 1.0
    np.testing.assert_array_equal(patch_distance(a, b, 2), [[1.0, 0.0], [0.0, 1.0 + 2.0**-10]])
    assert build_pixel_mask(a, b, cfg).per_patch.tolist() == [[True, True], [True, False]]


def test_single_patch():
    rng = np.random.default_rng(1)
    a, b = random_pair(rng, size=8)
    mask = build_pixel_mask(a, b, MaskConfig(patch_size=8, threshold=0.05))
    assert mask.per_patch.shape == (1, 1)
    assert np.all(mask.values == mask.values[0, 0])


def test_pixel_mask_is_patch_constant():
    rng = np.random.default_rng(2)
    a, b = random_pair(rng)
    mask = build_pixel_mask(a, b, MaskConfig(patch_size=4, threshold=0.1))
    blocks = mask.values.reshape(4, 4, 4, 4)
    assert np.all(blocks == blocks[:, :1, :, :1])


def test_invalid_pixels_do_not_count():
    a = DepthMap.dense(np.zeros((2, 2)))
    validity = np.array([[False, True], [True, True]])
    b = DepthMap(values=np.array([[50.0, 0.0], [0.0, 0.0]]), validity=validity)
    assert patch_distance(a, b, 2)[0, 0] == 0.0


def test_downscale_pooling():
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = True
    mask[2:, 2:] = True
    assert downscale_mask(mask, 2, "max").values.tolist() == [[True, False], [False, True]]
    assert downscale_mask(mask, 2, "min").values.tolist() == [[False, False], [False, True]]
    assert downscale_mask(mask, 1).values.tolist() == mask.tolist()


def test_latent_mask_counts():
    ones = LatentMask.ones(3, 5)
    assert ones.count == 15
    assert ones.coverage == 1.0


@pytest.mark.parametrize(
    "kwargs", [{"patch_size": 0}, {"threshold": 0.0}, {"codec_factor": 0}, {"pool": "mean"}]
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        MaskConfig(**kwargs)


def test_shape_errors():
    a = DepthMap.dense(np.zeros((6, 6)))
    with pytest.raises(ShapeError):
        build_pixel_mask(a, a, MaskConfig(patch_size=4))
    with pytest.raises(ShapeError):
        build_latent_mask(a, a, MaskConfig(patch_size=2, codec_factor=4))
    with pytest.raises(ShapeError):
        patch_distance(a, DepthMap.dense(np.zeros((6, 4))), 2)


def test_mask_as_pgm(tmp_path):
    mask = LatentMask(values=np.array([[True, False]]))
    path = str(tmp_path / "mask.pgm")
    save_mask_pgm(mask, path)
    data, _ = read_pgm(path)
    assert data.tolist() == [[255, 0]]
