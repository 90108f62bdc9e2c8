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
# Test-time ensembling: several refinements of one input from different starting noise, aligned onto the first
# member and reduced by the pixelwise median.
#

import warnings
from typing import Any, List, Optional, Sequence

import numpy as np

from alignment.affine import fit_affine
from coarse_models.models import CoarseModel, predict_coarse
from depth_io.rasters import DepthMap, DepthUnits, ImageMap
from diffusion.sampling import refine_depth
from utils.exceptions import ConfigError, DegenerateSource, ShapeError
from utils.seeding import derive_seed


def member_seed(seed: int, k: int) -> int:
    """Seed of ensemble member ``k``; member 0 uses ``seed`` itself."""
    return seed if k == 0 else derive_seed(seed, k)


def aggregate_ensemble(members: Sequence[DepthMap]) -> DepthMap:
    """
    Align members ``2..n`` onto member 1 by least squares and take the pixelwise median.

    A member that cannot be fitted (constant, e.g. a saturated refinement) enters the median unaligned and a
    warning is issued.

    :param members: Refined maps of identical shape.
    :return: The median map with the validity and units of member 1.
    :raises ConfigError: If ``members`` is empty.
    """
    if not members:
        raise ConfigError("An ensemble needs at least one member")
    reference = members[0]
    if len(members) == 1:
        return reference
    stack = [reference.values.astype(np.float64)]
    for member in members[1:]:
        if member.shape != reference.shape:
            raise ShapeError(f"Ensemble member shape {member.shape} differs from {reference.shape}")
        try:
            stack.append(fit_affine(member, reference).apply(member.values))
        except DegenerateSource:
            warnings.warn("Constant ensemble member; using it without alignment", stacklevel=2)
            stack.append(member.values.astype(np.float64))
    median = np.median(np.stack(stack), axis=0)
    if reference.units is DepthUnits.NORMALIZED:
        median = np.clip(median, -1.0, 1.0)
    return reference.with_values(median)


def ensemble_refine(
    checkpoint: Any,
    coarse_model: Optional[CoarseModel],
    x: ImageMap,
    n_members: int,
    seed: int,
    gt: Optional[DepthMap] = None,
    steps: Optional[int] = None,
    coarse: Optional[DepthMap] = None,
) -> DepthMap:
    """
    Ensemble of ``n_members`` refinements of ``x``.

    The coarse prediction is computed once and shared by all members; member ``k`` starts from the noise of
    :func:`member_seed`, so ``n_members=1`` equals a single :func:`refine_depth` call with ``seed``.

    :raises ConfigError: If ``n_members < 1``.
    """
    if n_members < 1:
        raise ConfigError(f"n_members must be >= 1, got {n_members}")
    if coarse is None:
        if coarse_model is None:
            raise ConfigError("ensemble_refine needs a coarse model or a precomputed coarse prediction")
        coarse = predict_coarse(coarse_model, x, gt=gt)
    members: List[DepthMap] = [
        refine_depth(checkpoint, coarse_model, x, gt=gt, steps=steps, seed=member_seed(seed, k), coarse=coarse)
        for k in range(n_members)
    ]
    return aggregate_ensemble(members)
