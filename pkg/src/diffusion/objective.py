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
# Masked v-prediction objective: squared velocity error restricted to the kept latent cells, normalized by the number
# of kept elements.
#

from typing import Any, Union

import numpy as np
import torch

from masking.patch_mask import LatentMask
from utils.exceptions import EmptyMask, ShapeError


def masked_v_loss(v_hat: Any, v_true: Any, m: Union[LatentMask, np.ndarray, torch.Tensor]) -> Any:
    """
    Masked velocity loss.

    .. math::

        \\mathcal{L} = \\frac{1}{\\gamma} \\lVert \\hat{v} \\odot m - v \\odot m \\rVert_2^2,
        \\qquad \\gamma = \\#\\{m = 1\\} \\times C

    The mask is broadcast across the ``C`` channels. With a leading batch axis the masks of all samples are pooled,
    so every kept element has the same weight.

    :param v_hat: Predicted velocity, ``(C, h, w)`` or ``(B, C, h, w)`` (numpy or torch).
    :param v_true: Target velocity, same shape.
    :param m: Latent mask, ``(h, w)`` or ``(B, h, w)``.
    :return: Scalar loss (a float for numpy inputs, a 0-d tensor for torch inputs).
    :raises ShapeError: If shapes are incompatible.
    :raises EmptyMask: If no element is kept.
    """
    if tuple(v_hat.shape) != tuple(v_true.shape):
        raise ShapeError(f"Shapes differ: {tuple(v_hat.shape)} vs {tuple(v_true.shape)}")
    mask = m.values if isinstance(m, LatentMask) else m
    if len(v_hat.shape) < 3 or tuple(mask.shape[-2:]) != tuple(v_hat.shape[-2:]):
        raise ShapeError(f"Mask {tuple(mask.shape)} does not match latent {tuple(v_hat.shape)}")
    if isinstance(v_hat, torch.Tensor):
        mask_t = torch.as_tensor(np.asarray(mask) if not isinstance(mask, torch.Tensor) else mask)
        mask_t = mask_t.to(dtype=v_hat.dtype, device=v_hat.device).unsqueeze(-3)
        if mask_t.dim() > v_hat.dim():
            raise ShapeError(f"Mask {tuple(mask.shape)} does not match latent {tuple(v_hat.shape)}")
        mask_t = mask_t.expand(v_hat.shape)
        gamma = mask_t.sum()
        if gamma.item() == 0:
            raise EmptyMask("Latent mask has no kept element")
        residual = (v_hat - v_true) * mask_t
        return (residual * residual).sum() / gamma

    mask_a = np.asarray(mask, dtype=np.float64)[..., None, :, :]
    if mask_a.ndim > np.ndim(v_hat):
        raise ShapeError(f"Mask {tuple(mask.shape)} does not match latent {tuple(v_hat.shape)}")
    mask_a = np.broadcast_to(mask_a, np.shape(v_hat))
    gamma = float(mask_a.sum())
    if gamma == 0:
        raise EmptyMask("Latent mask has no kept element")
    residual = (np.asarray(v_hat, dtype=np.float64) - np.asarray(v_true, dtype=np.float64)) * mask_a
    return float((residual * residual).sum() / gamma)
