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
# Least-squares scale/shift alignment between depth maps, used for global pre-alignment of the coarse conditioning,
# the scale-and-shift-invariant loss, ensembling and evaluation.
#

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from depth_io.rasters import DepthMap, DepthUnits
from utils.exceptions import DegenerateSource, InsufficientOverlap, ShapeError


@dataclass(frozen=True)
class AffineFit:
    """
    Scale ``s`` and shift ``b`` minimizing :math:`\\sum (s \\cdot source + b - target)^2` over jointly valid pixels.
    """

    s: float
    b: float
    residual_rms: float
    n_valid: int

    def apply(self, values: np.ndarray) -> np.ndarray:
        """``s * values + b`` in float64."""
        return self.s * np.asarray(values, dtype=np.float64) + self.b


def fit_affine_arrays(source: np.ndarray, target: np.ndarray) -> AffineFit:
    """
    Closed-form least-squares fit of ``target ~ s * source + b`` on flat arrays.

    .. math::

        s = \\frac{\\operatorname{cov}(x, y)}{\\operatorname{var}(x)}, \\qquad b = \\bar{y} - s \\bar{x}

    :param source: Source values, any shape (flattened).
    :param target: Target values, same size.
    :return: The fit and its aligned RMS residual.
    :raises InsufficientOverlap: With fewer than two values.
    :raises DegenerateSource: If all source values are equal.
    """
    x = np.asarray(source, dtype=np.float64).ravel()
    y = np.asarray(target, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"Source and target sizes differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise InsufficientOverlap(f"Alignment needs at least 2 jointly valid pixels, got {x.size}")
    if np.all(x == x[0]):
        raise DegenerateSource("Alignment source has zero variance")

    x_mean = x.mean()
    y_mean = y.mean()
    xc = x - x_mean
    s = float(np.dot(xc, y - y_mean) / np.dot(xc, xc))
    b = float(y_mean - s * x_mean)
    residual = s * x + b - y
    return AffineFit(s=s, b=b, residual_rms=float(np.sqrt(np.mean(residual * residual))), n_valid=int(x.size))


def joint_valid_values(source: DepthMap, target: DepthMap) -> Tuple[np.ndarray, np.ndarray]:
    """Float64 values of both maps at their jointly valid pixels."""
    if source.shape != target.shape:
        raise ShapeError(f"Shapes differ: {source.shape} vs {target.shape}")
    joint = source.validity & target.validity
    return source.values[joint].astype(np.float64), target.values[joint].astype(np.float64)


def fit_affine(source: DepthMap, target: DepthMap) -> AffineFit:
    """
    Fit ``target ~ s * source + b`` over the jointly valid pixels of two depth maps.

    :param source: Map to be aligned (e.g. a coarse prediction).
    :param target: Reference map (e.g. the label).
    :return: The least-squares ``(s, b)`` and the aligned RMS residual.
    :raises ShapeError: If the shapes differ.
    :raises InsufficientOverlap: With fewer than two jointly valid pixels.
    :raises DegenerateSource: If the source is constant on those pixels.
    """
    x, y = joint_valid_values(source, target)
    return fit_affine_arrays(x, y)


def apply_affine(d: DepthMap, fit: AffineFit, units: Optional[DepthUnits] = None) -> DepthMap:
    """
    Elementwise ``s * d + b`` on valid pixels; validity is preserved.

    :param d: Input map.
    :param fit: Scale and shift.
    :param units: Unit tag of the result. Defaults to that of ``d``, except that a normalized input gives a metric
        result, since the mapped values may leave ``[-1, 1]``.
    """
    if units is None and d.units is DepthUnits.NORMALIZED:
        units = DepthUnits.METRIC
    return d.with_values(fit.apply(d.values), units=units)


def prealign_conditioning(coarse: DepthMap, label: DepthMap) -> DepthMap:
    """
    Global pre-alignment: fit the coarse prediction onto the label and apply the fit.

    The result carries the label's units. For normalized labels it is clamped to ``[-1, 1]`` so that it stays a
    valid codec input.

    :param coarse: Coarse depth conditioning.
    :param label: Depth label.
    :return: The aligned conditioning.
    :raises DegenerateSource: If the coarse prediction is constant.
    :raises InsufficientOverlap: With fewer than two jointly valid pixels.
    """
    aligned = fit_affine(coarse, label).apply(coarse.values)
    if label.units is DepthUnits.NORMALIZED:
        aligned = np.clip(aligned, -1.0, 1.0)
    return coarse.with_values(aligned, units=label.units)
