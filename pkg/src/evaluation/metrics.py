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
# Affine-invariant depth metrics: the prediction is least-squares aligned onto the ground truth before the relative
# error and the threshold accuracy are computed.
#
#     AbsRel = mean(|a - d| / d)
#     delta1 = mean(max(a / d, d / a) < 1.25)
#

from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np

from alignment.affine import AffineFit, fit_affine_arrays, joint_valid_values
from depth_io.rasters import DepthMap
from utils.exceptions import EmptyDepth, RangeError

# Aligned values are floored here before any ratio is taken
ALIGNED_FLOOR = 1e-6
DELTA1_THRESHOLD = 1.25

IDENTITY_FIT = AffineFit(s=1.0, b=0.0, residual_rms=0.0, n_valid=0)


@dataclass(frozen=True)
class MetricReport:
    """Metrics of one prediction against its ground truth, and the alignment used."""

    absrel: float
    delta1: float
    n_pixels: int
    fit: AffineFit

    def to_dict(self) -> Dict[str, Any]:
        return {"absrel": self.absrel, "delta1": self.delta1, "n_pixels": self.n_pixels, **asdict(self.fit)}


def compute_metrics(pred: DepthMap, gt: DepthMap, align: bool = True) -> MetricReport:
    """
    AbsRel and δ1 of ``pred`` against ``gt`` over their jointly valid pixels.

    .. math::

        \\mathrm{AbsRel} = \\frac{1}{N} \\sum_k \\frac{|\\hat{d}_k - d_k|}{d_k}

    .. math::

        \\delta_1 = \\frac{1}{N} \\#\\{k : \\max(\\hat{d}_k / d_k, d_k / \\hat{d}_k) < 1.25\\}

    where :math:`\\hat{d} = \\max(s \\cdot pred + b, 10^{-6})` and ``(s, b)`` is the least-squares fit of ``pred``
    onto ``gt``. Both metrics are invariant to positive affine changes of ``pred``.

    :param pred: Prediction in any units.
    :param gt: Ground truth, strictly positive on valid pixels.
    :param align: Fit ``pred`` onto ``gt`` first; without it, ``pred`` is compared as is.
    :return: The metrics and the fit.
    :raises EmptyDepth: If there is no jointly valid pixel.
    :raises RangeError: If the ground truth is not strictly positive.
    :raises DegenerateSource: If ``pred`` is constant on the valid pixels.
    """
    x, d = joint_valid_values(pred, gt)
    if x.size == 0:
        raise EmptyDepth("No jointly valid pixel to evaluate")
    if np.any(d <= 0):
        raise RangeError("Ground truth must be strictly positive on valid pixels")

    if align:
        fit = fit_affine_arrays(x, d)
        aligned = fit.apply(x)
    else:
        fit = IDENTITY_FIT
        aligned = x
    aligned = np.maximum(aligned, ALIGNED_FLOOR)

    absrel = float(np.mean(np.abs(aligned - d) / d))
    ratio = np.maximum(aligned / d, d / aligned)
    delta1 = float(np.mean(ratio < DELTA1_THRESHOLD))
    return MetricReport(absrel=absrel, delta1=delta1, n_pixels=int(x.size), fit=fit)
