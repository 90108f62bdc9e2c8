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
# Local patch masking. The aligned conditioning and the label are compared patch by patch; patches whose Euclidean
# distance exceeds w * eta are excluded from the training loss. The pixel mask is pooled down to codec resolution.
#

from dataclasses import dataclass
from typing import Union

import numpy as np

from depth_io.pfm import write_pgm
from depth_io.rasters import DepthMap
from utils.exceptions import ConfigError, ShapeError

POOL_MODES = ("max", "min")


@dataclass(frozen=True)
class MaskConfig:
    """
    Patch size ``w`` (pixels), per-pixel average tolerance ``eta`` (normalized depth units) and codec factor ``f``.
    """

    patch_size: int = 8
    threshold: float = 0.1
    codec_factor: int = 1
    pool: str = "max"

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if self.codec_factor < 1:
            raise ConfigError(f"codec_factor must be >= 1, got {self.codec_factor}")
        if self.pool not in POOL_MODES:
            raise ConfigError(f"pool must be one of {POOL_MODES}, got {self.pool!r}")

    @property
    def cutoff(self) -> float:
        """Distance threshold ``w * eta``."""
        return self.patch_size * self.threshold

    def check_shape(self, height: int, width: int) -> None:
        """
        :raises ShapeError: If the raster is not divisible by the patch size and the codec factor.
        """
        for name, factor in (("patch_size", self.patch_size), ("codec_factor", self.codec_factor)):
            if height % factor or width % factor:
                raise ShapeError(f"Raster {height}x{width} is not divisible by {name}={factor}")


@dataclass(frozen=True)
class PatchMask:
    """Binary pixel-resolution mask, constant inside each ``patch_size`` x ``patch_size`` patch."""

    values: np.ndarray
    patch_size: int

    @property
    def per_patch(self) -> np.ndarray:
        """One entry per patch."""
        return self.values[:: self.patch_size, :: self.patch_size]

    @property
    def coverage(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class LatentMask:
    """Binary mask at codec resolution, ``(height / f, width / f)``."""

    values: np.ndarray

    @classmethod
    def ones(cls, height: int, width: int) -> "LatentMask":
        return cls(values=np.ones((height, width), dtype=bool))

    @property
    def count(self) -> int:
        return int(self.values.sum())

    @property
    def coverage(self) -> float:
        return float(self.values.mean())


def _blocks(values: np.ndarray, w: int) -> np.ndarray:
    height, width = values.shape
    if height % w or width % w:
        raise ShapeError(f"Raster {height}x{width} is not divisible by {w}")
    return values.reshape(height // w, w, width // w, w)


def patch_distance(a: DepthMap, b: DepthMap, w: int) -> np.ndarray:
    """
    Euclidean (Frobenius) distance between corresponding ``w`` x ``w`` patches of two depth maps.

    .. math::

        \\mathrm{Dist}_n = \\lVert a_n - b_n \\rVert_2

    Pixels not valid in both maps contribute nothing.

    :param a: First map.
    :param b: Second map, same shape.
    :param w: Patch size.
    :return: ``(height / w, width / w)`` float64 array.
    :raises ShapeError: On mismatched or non-divisible shapes.
    """
    if a.shape != b.shape:
        raise ShapeError(f"Shapes differ: {a.shape} vs {b.shape}")
    if w < 1:
        raise ShapeError(f"Patch size must be >= 1, got {w}")
    diff = a.values.astype(np.float64) - b.values.astype(np.float64)
    diff = np.where(a.validity & b.validity, diff, 0.0)
    return np.sqrt((_blocks(diff, w) ** 2).sum(axis=(1, 3)))


def build_pixel_mask(a: DepthMap, b: DepthMap, cfg: MaskConfig) -> PatchMask:
    """
    Keep a patch (value 1) iff its distance is at most ``w * eta`` (inclusive), broadcast to its pixels.

    :param a: Aligned conditioning.
    :param b: Label.
    :param cfg: Patch size and threshold.
    :raises ShapeError: On mismatched or non-divisible shapes.
    """
    keep = patch_distance(a, b, cfg.patch_size) <= cfg.cutoff
    w = cfg.patch_size
    values = np.repeat(np.repeat(keep, w, axis=0), w, axis=1)
    return PatchMask(values=values, patch_size=w)


def downscale_mask(mask: Union[PatchMask, np.ndarray], f: int, pool: str = "max") -> LatentMask:
    """
    Pool a pixel mask over non-overlapping ``f`` x ``f`` windows (window = stride = ``f``).

    :param mask: Pixel-resolution mask.
    :param f: Codec factor.
    :param pool: ``"max"`` keeps a window if any pixel is kept; ``"min"`` only if all are.
    :raises ShapeError: If the mask is not divisible by ``f``.
    """
    values = mask.values if isinstance(mask, PatchMask) else np.asarray(mask)
    if pool not in POOL_MODES:
        raise ConfigError(f"pool must be one of {POOL_MODES}, got {pool!r}")
    if f < 1:
        raise ShapeError(f"Codec factor must be >= 1, got {f}")
    blocks = _blocks(values.astype(bool), f)
    pooled = blocks.any(axis=(1, 3)) if pool == "max" else blocks.all(axis=(1, 3))
    return LatentMask(values=pooled)


def build_latent_mask(a: DepthMap, b: DepthMap, cfg: MaskConfig) -> LatentMask:
    """Pixel mask followed by pooling to codec resolution."""
    cfg.check_shape(*a.shape)
    return downscale_mask(build_pixel_mask(a, b, cfg), cfg.codec_factor, cfg.pool)


def save_mask_pgm(mask: Union[PatchMask, LatentMask], path: str) -> None:
    """Write a mask for inspection as an 8-bit PGM (0 = masked out, 255 = kept)."""
    write_pgm(path, np.where(mask.values, 255, 0).astype(np.uint8))
