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
# Lossless space-to-depth codec between pixel rasters and latents. Each f x f pixel block becomes f^2 channels;
# f = 1 is pixel space. Works on numpy arrays and torch tensors with any leading batch dimensions.
#

from dataclasses import dataclass
from enum import Enum
from typing import Any, Tuple

import numpy as np
from einops import rearrange

from utils.exceptions import RangeError, ShapeError

_ENCODE = "... c (h p1) (w p2) -> ... (c p1 p2) h w"
_DECODE = "... (c p1 p2) h w -> ... c (h p1) (w p2)"


class LatentTag(str, Enum):
    """Role of a latent in the refiner input."""

    IMAGE_COND = "image_cond"
    DEPTH_COND = "depth_cond"
    DEPTH_STATE = "depth_state"


@dataclass(frozen=True)
class LatentTensor:
    """A ``channels x (H / f) x (W / f)`` float32 latent and its role."""

    values: np.ndarray
    tag: LatentTag

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 3:
            raise ShapeError(f"Latent must have shape (C, h, w), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise RangeError("Latent values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tag", LatentTag(self.tag))

    @property
    def channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)


def _check_divisible(x: Any, f: int) -> None:
    if f < 1:
        raise ShapeError(f"Codec factor must be >= 1, got {f}")
    if len(x.shape) < 3:
        raise ShapeError(f"Codec input must have shape (..., C, H, W), got {tuple(x.shape)}")
    height, width = x.shape[-2], x.shape[-1]
    if height % f or width % f:
        raise ShapeError(f"Raster {height}x{width} is not divisible by codec factor {f}")


def encode(x: Any, f: int) -> Any:
    """
    Space-to-depth: ``(..., C, H, W) -> (..., C * f * f, H / f, W / f)``.

    :param x: numpy array or torch tensor.
    :param f: Codec factor.
    :raises ShapeError: If ``H`` or ``W`` is not divisible by ``f``.
    """
    _check_divisible(x, f)
    if f == 1:
        return x
    return rearrange(x, _ENCODE, p1=f, p2=f)


def decode(z: Any, f: int) -> Any:
    """
    Exact inverse of :func:`encode`.

    :raises ShapeError: If the channel count is not a multiple of ``f * f``.
    """
    if f < 1:
        raise ShapeError(f"Codec factor must be >= 1, got {f}")
    if f == 1:
        return z
    if len(z.shape) < 3 or z.shape[-3] % (f * f):
        raise ShapeError(f"Latent {tuple(z.shape)} has no channel axis divisible by {f * f}")
    return rearrange(z, _DECODE, p1=f, p2=f)


def encode_latent(x: np.ndarray, f: int, tag: LatentTag) -> LatentTensor:
    """Encode a single ``(C, H, W)`` raster into a tagged latent."""
    return LatentTensor(values=encode(np.asarray(x, dtype=np.float32), f), tag=tag)


def depth_to_raster(values: np.ndarray) -> np.ndarray:
    """``(H, W)`` depth values as a ``(1, H, W)`` float32 raster."""
    return np.ascontiguousarray(np.asarray(values, dtype=np.float32)[None, :, :])
