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

from depth_io.rasters import DepthMap, DepthUnits, ImageMap, NormalizationRecord, denormalize_depth, normalize_depth
from utils.exceptions import DegenerateDepth, EmptyDepth, RangeError, ShapeError, UnitMismatch


def sorted_percentile(values, pct):
    """Linear interpolation between order statistics, computed from an explicit sort."""
    ordered = sorted(values)
    position = pct / 100.0 * (len(ordered) - 1)
    below = int(np.floor(position))
    above = min(below + 1, len(ordered) - 1)
    return ordered[below] + (position - below) * (ordered[above] - ordered[below])


class TestDepthMap:
    def test_dense_map_is_all_valid(self, ramp_depth):
        assert ramp_depth.shape == (16, 16)
        assert ramp_depth.n_valid == 256
        assert ramp_depth.units is DepthUnits.METRIC

    def test_values_are_read_only(self, ramp_depth):
        with pytest.raises(ValueError):
            ramp_depth.values[0, 0] = 3.0

    def test_validity_must_match_values(self):
        with pytest.raises(ShapeError):
            DepthMap(values=np.ones((4, 4)), validity=np.ones((4, 3), dtype=bool))

    def test_rejects_non_2d_values(self):
        with pytest.raises(ShapeError):
            DepthMap.dense(np.ones((2, 2, 2)))

    def test_non_finite_values_allowed_only_on_invalid_pixels(self):
        values = np.ones((2, 2))
        values[0, 0] = np.nan
        validity = np.ones((2, 2), dtype=bool)
        with pytest.raises(RangeError):
            DepthMap(values=values, validity=validity)
        validity[0, 0] = False
        assert DepthMap(values=values, validity=validity).n_valid == 3

    def test_normalized_maps_stay_in_range(self):
        with pytest.raises(RangeError):
            DepthMap.dense(np.array([[0.0, 1.5]]), units=DepthUnits.NORMALIZED)

    def test_with_values_zeroes_invalid_pixels(self):
        validity = np.array([[True, False]])
        d = DepthMap(values=np.array([[1.0, 2.0]]), validity=validity)
        out = d.with_values(np.array([[5.0, 7.0]]))
        assert out.values.tolist() == [[5.0, 0.0]]
        assert out.validity.tolist() == [[True, False]]


class TestImageMap:
    def test_grayscale_gets_a_channel_axis(self):
        x = ImageMap(values=np.zeros((4, 6)))
        assert x.values.shape == (4, 6, 1)
        assert x.shape == (4, 6)

    def test_rejects_out_of_range_values(self):
        with pytest.raises(RangeError):
            ImageMap(values=np.full((2, 2, 3), 1.5))

    def test_rejects_two_channels(self):
        with pytest.raises(ShapeError):
            ImageMap(values=np.zeros((2, 2, 2)))

    def test_to_signed_is_channel_first(self):
        x = ImageMap(values=np.stack([np.zeros((2, 3)), np.full((2, 3), 0.5), np.ones((2, 3))], axis=-1))
        signed = x.to_signed()
        assert signed.shape == (3, 2, 3)
        assert signed[:, 0, 0].tolist() == [-1.0, 0.0, 1.0]

    def test_luminance_of_gray_is_gray(self, gray_image):
        np.testing.assert_allclose(gray_image.luminance(), 0.5, atol=1e-6)


class TestNormalization:
    def test_percentile_endpoints_match_sort_oracle(self):
        ramp = np.arange(11, dtype=np.float64)
        d = DepthMap.dense(ramp[None, :])
        out, record = normalize_depth(d, 2.0, 98.0)
        lo, hi = sorted_percentile(ramp, 2.0), sorted_percentile(ramp, 98.0)
        assert record.lo == pytest.approx(lo, abs=1e-12)
        assert record.hi == pytest.approx(hi, abs=1e-12)
        expected = np.clip(2.0 * (ramp - lo) / (hi - lo) - 1.0, -1.0, 1.0)
        np.testing.assert_allclose(out.values[0], expected, atol=1e-6)
        assert out.units is DepthUnits.NORMALIZED
        assert out.values.min() == -1.0 and out.values.max() == 1.0

    def test_full_range_round_trip(self, ramp_depth):
        out, record = normalize_depth(ramp_depth, 0.0, 100.0)
        assert not record.percentile_based
        restored = denormalize_depth(out, record)
        np.testing.assert_allclose(restored.values, ramp_depth.values, atol=1e-6)
        assert restored.units is DepthUnits.METRIC

    def test_invalid_pixels_are_ignored_and_zeroed(self):
        values = np.array([[1.0, 2.0, 3.0, 1000.0]])
        validity = np.array([[True, True, True, False]])
        out, record = normalize_depth(DepthMap(values=values, validity=validity), 0.0, 100.0)
        assert (record.lo, record.hi) == (1.0, 3.0)
        assert out.values.tolist() == [[-1.0, 0.0, 1.0, 0.0]]

    def test_constant_depth_is_degenerate(self):
        with pytest.raises(DegenerateDepth):
            normalize_depth(DepthMap.dense(np.full((4, 4), 2.0)))

    def test_empty_depth(self):
        d = DepthMap(values=np.ones((2, 2)), validity=np.zeros((2, 2), dtype=bool))
        with pytest.raises(EmptyDepth):
            normalize_depth(d)

    def test_bad_percentiles(self, ramp_depth):
        with pytest.raises(RangeError):
            normalize_depth(ramp_depth, 60.0, 40.0)

    def test_denormalize_requires_normalized_input(self, ramp_depth):
        with pytest.raises(UnitMismatch):
            denormalize_depth(ramp_depth, NormalizationRecord(lo=0.0, hi=1.0))

    def test_record_requires_a_range(self):
        with pytest.raises(DegenerateDepth):
            NormalizationRecord(lo=1.0, hi=1.0)
