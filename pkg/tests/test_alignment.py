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
from scipy.ndimage import gaussian_filter

from alignment.affine import AffineFit, apply_affine, fit_affine, fit_affine_arrays, prealign_conditioning
from depth_io.rasters import DepthMap, DepthUnits
from utils.exceptions import DegenerateSource, InsufficientOverlap, ShapeError


def sse(x, y, s, b):
    r = s * x + b - y
    return float(np.dot(r, r))


def grid_search(x, y, span=20.0, points=41, rounds=14):
    """Brute-force coarse-to-fine grid search of the least-squares (s, b)."""
    s0, b0 = 0.0, 0.0
    for _ in range(rounds):
        s_grid = s0 + np.linspace(-span, span, points)
        b_grid = b0 + np.linspace(-span, span, points)
        residual = s_grid[:, None, None] * x[None, None, :] + b_grid[None, :, None] - y[None, None, :]
        cost = (residual * residual).sum(axis=-1)
        i, j = np.unravel_index(np.argmin(cost), cost.shape)
        s0, b0 = s_grid[i], b_grid[j]
        span *= 3.0 / (points - 1) * 2.0
    return s0, b0


def test_matches_grid_search_oracle_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal((16, 16))
        y = rng.uniform(-3, 3) * x + rng.uniform(-3, 3) + 0.1 * rng.standard_normal((16, 16))
        fit = fit_affine(DepthMap.dense(x), DepthMap.dense(y))
        xs, ys = x.astype(np.float32).astype(np.float64).ravel(), y.astype(np.float32).astype(np.float64).ravel()
        s_ref, b_ref = grid_search(xs, ys)
        assert fit.s == pytest.approx(s_ref, abs=1e-4)
        assert fit.b == pytest.approx(b_ref, abs=1e-4)

        residual = fit.s * xs + fit.b - ys
        assert abs(residual.sum()) <= 1e-6 * np.abs(ys).sum()
        assert abs(np.dot(xs, residual)) <= 1e-6 * np.abs(xs * ys).sum()


def test_exact_affine_is_recovered(rng):
    x = rng.standard_normal(50)
    fit = fit_affine_arrays(x, 2.5 * x - 0.75)
    assert fit.s == pytest.approx(2.5, abs=1e-10)
    assert fit.b == pytest.approx(-0.75, abs=1e-10)
    assert fit.residual_rms == pytest.approx(0.0, abs=1e-10)
    assert fit.n_valid == 50


def test_perturbations_do_not_decrease_the_error(rng):
    for _ in range(20):
        x, y = rng.standard_normal(64), rng.standard_normal(64)
        fit = fit_affine_arrays(x, y)
        best = sse(x, y, fit.s, fit.b)
        for ds in (-1e-3, 0.0, 1e-3):
            for db in (-1e-3, 0.0, 1e-3):
                assert sse(x, y, fit.s + ds, fit.b + db) >= best - 1e-12


def test_affine_absorption(rng):
    x, y = rng.standard_normal(40), rng.standard_normal(40)
    a, c = 0.5, 0.25
    base = fit_affine_arrays(x, y)
    moved = fit_affine_arrays(a * x + c, y)
    assert moved.s == pytest.approx(base.s / a, rel=1e-8)
    assert moved.b == pytest.approx(base.b - base.s * c / a, rel=1e-8, abs=1e-12)


def test_inverse_of_an_applied_map():
    d = DepthMap.dense(np.linspace(1.0, 2.0, 16).reshape(4, 4))
    moved = apply_affine(d, fit_affine_arrays(np.array([0.0, 1.0]), np.array([1.0, 3.0])))
    back = fit_affine(moved, d)
    assert back.s == pytest.approx(0.5, rel=1e-5)
    assert back.b == pytest.approx(-0.5, rel=1e-5)


def test_normalized_input_may_leave_the_unit_range():
    d = DepthMap.dense(np.array([[0.0, 0.5]]), units=DepthUnits.NORMALIZED)
    moved = apply_affine(d, AffineFit(2.0, 1.0, 0.0, 2))
    np.testing.assert_allclose(moved.values, [[1.0, 2.0]])
    assert moved.units is DepthUnits.METRIC
    assert apply_affine(d, AffineFit(0.5, 0.0, 0.0, 2), units=DepthUnits.NORMALIZED).units is DepthUnits.NORMALIZED


def test_only_jointly_valid_pixels_count(rng):
    x = rng.standard_normal((4, 4))
    y = 3.0 * x + 1.0
    y_noisy = y.copy()
    y_noisy[0, 0] = 1e6
    validity = np.ones((4, 4), dtype=bool)
    validity[0, 0] = False
    fit = fit_affine(DepthMap.dense(x), DepthMap(values=y_noisy, validity=validity))
    assert fit.s == pytest.approx(3.0, rel=1e-5)
    assert fit.n_valid == 15


def test_errors():
    with pytest.raises(DegenerateSource):
        fit_affine_arrays(np.ones(5), np.arange(5.0))
    with pytest.raises(InsufficientOverlap):
        fit_affine_arrays(np.array([1.0]), np.array([2.0]))
    with pytest.raises(ShapeError):
        fit_affine(DepthMap.dense(np.ones((2, 2))), DepthMap.dense(np.ones((2, 3))))


class TestPrealign:
    def test_affine_copy_maps_back_to_label(self):
        label = DepthMap.dense(np.linspace(-1.0, 1.0, 64).reshape(8, 8), units=DepthUnits.NORMALIZED)
        coarse = DepthMap.dense(2.0 * label.values + 1.0)
        out = prealign_conditioning(coarse, label)
        np.testing.assert_allclose(out.values, label.values, atol=1e-6)
        assert out.units is DepthUnits.NORMALIZED

    def test_blurred_label_keeps_the_mean(self, rng):
        label = DepthMap.dense(rng.uniform(1.0, 5.0, (16, 16)))
        coarse = DepthMap.dense(0.3 * gaussian_filter(label.values.astype(np.float64), 2.0) + 7.0)
        out = prealign_conditioning(coarse, label)
        assert out.valid_values().mean() == pytest.approx(label.valid_values().mean(), abs=1e-5)
        assert out.units is DepthUnits.METRIC

    def test_normalized_output_is_clamped(self, rng):
        label = DepthMap.dense(rng.uniform(-1.0, 1.0, (8, 8)), units=DepthUnits.NORMALIZED)
        coarse = DepthMap.dense(rng.standard_normal((8, 8)))
        out = prealign_conditioning(coarse, label)
        assert np.abs(out.values).max() <= 1.0

    def test_idempotent(self, rng):
        label = DepthMap.dense(rng.uniform(1.0, 5.0, (16, 16)))
        coarse = DepthMap.dense(gaussian_filter(label.values.astype(np.float64), 1.5) * 2.0 - 1.0)
        once = prealign_conditioning(coarse, label)
        twice = fit_affine(once, label)
        assert twice.s == pytest.approx(1.0, abs=1e-5)
        assert twice.b == pytest.approx(0.0, abs=1e-5)
