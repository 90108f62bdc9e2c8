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
# Degradation oracle: emulates the coarse, affine-ambiguous output of a pretrained depth model by degrading the
# ground truth. Stages, each skipped when its parameter is neutral:
#
#     box downscale by factor -> Gaussian blur (low resolution) -> bilinear upscale -> a * d + b -> uniform quantization
#

import hashlib
from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from depth_io.rasters import DepthMap, DepthUnits
from utils.exceptions import ConfigError, ShapeError
from utils.seeding import UniformStream, derive_seed

# Ranges of the random affine map, in normalized depth units
SCALE_RANGE = (0.5, 2.0)
SHIFT_RANGE = (-0.25, 0.25)


@dataclass(frozen=True)
class DegradeParams:
    """
    Parameters of the degradation oracle.

    With ``random_affine`` set, ``(affine_scale, affine_shift)`` are ignored and a per-input pair is drawn from
    ``SCALE_RANGE`` x ``SHIFT_RANGE``.
    """

    blur_sigma: float = 1.5
    downscale_factor: int = 4
    affine_scale: float = 1.0
    affine_shift: float = 0.0
    quantize_levels: int = 16
    random_affine: bool = True

    def __post_init__(self) -> None:
        if self.blur_sigma < 0:
            raise ConfigError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if self.downscale_factor < 1:
            raise ConfigError(f"downscale_factor must be >= 1, got {self.downscale_factor}")
        if not self.affine_scale > 0:
            raise ConfigError(f"affine_scale must be > 0, got {self.affine_scale}")
        if self.quantize_levels < 0 or self.quantize_levels == 1:
            raise ConfigError(f"quantize_levels must be 0 (off) or >= 2, got {self.quantize_levels}")

    @classmethod
    def neutral(cls) -> "DegradeParams":
        """Parameters under which the oracle is the identity."""
        return cls(blur_sigma=0.0, downscale_factor=1, quantize_levels=0, random_affine=False)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def input_digest(d: DepthMap) -> str:
    """md5 of the raster content, used to key the per-input random affine map."""
    h = hashlib.md5()
    h.update(d.values.tobytes())
    h.update(d.validity.tobytes())
    return h.hexdigest()


def draw_affine(seed: int, d: DepthMap) -> Tuple[float, float]:
    """Random ``(a, b)`` for input ``d``; a pure function of ``(seed, d)``."""
    stream = UniformStream(derive_seed(seed, "affine", input_digest(d)))
    return stream.next(*SCALE_RANGE), stream.next(*SHIFT_RANGE)


def box_downscale(values: np.ndarray, factor: int) -> np.ndarray:
    height, width = values.shape
    if height % factor or width % factor:
        raise ShapeError(f"Raster {height}x{width} is not divisible by downscale factor {factor}")
    return values.reshape(height // factor, factor, width // factor, factor).mean(axis=(1, 3))


def quantize(values: np.ndarray, validity: np.ndarray, levels: int) -> np.ndarray:
    """Snap valid values to ``levels`` evenly spaced values between their minimum and maximum."""
    lo, hi = float(values[validity].min()), float(values[validity].max())
    if hi <= lo:
        return values
    steps = np.round((values - lo) / (hi - lo) * (levels - 1))
    return steps / (levels - 1) * (hi - lo) + lo


def degrade(d: DepthMap, params: DegradeParams, seed: int = 0) -> DepthMap:
    """
    Apply the degradation pipeline to a depth map.

    Invalid pixels are filled with the mean valid value before filtering and stay invalid in the output.

    :param d: Ground-truth depth (normalized during training and evaluation).
    :param params: Degradation parameters.
    :param seed: Seed of the random affine map.
    :return: Degraded map with the same shape and validity. Normalized inputs come back tagged ``metric``, since the
        result is affine-ambiguous.
    :raises ShapeError: If the raster is not divisible by the downscale factor.
    """
    values = d.values.astype(np.float64)
    if d.n_valid and d.n_valid < values.size:
        values = np.where(d.validity, values, values[d.validity].mean())

    if params.downscale_factor > 1:
        low = box_downscale(values, params.downscale_factor)
        if params.blur_sigma > 0:
            low = gaussian_filter(low, sigma=params.blur_sigma, mode="nearest")
        values = zoom(low, params.downscale_factor, order=1, mode="nearest", grid_mode=True)
    elif params.blur_sigma > 0:
        values = gaussian_filter(values, sigma=params.blur_sigma, mode="nearest")

    a, b = draw_affine(seed, d) if params.random_affine else (params.affine_scale, params.affine_shift)
    if a != 1.0 or b != 0.0:
        values = a * values + b

    if params.quantize_levels > 0 and d.n_valid:
        values = quantize(values, d.validity, params.quantize_levels)

    units = DepthUnits.METRIC if d.units is DepthUnits.NORMALIZED else d.units
    return d.with_values(values, units=units)
