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
# Raster types shared by every DepthLab module, and per-image depth normalization to [-1, 1].
#

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from utils.exceptions import DegenerateDepth, EmptyDepth, RangeError, ShapeError, UnitMismatch


class DepthUnits(str, Enum):
    """Convention of the values stored in a :class:`DepthMap`."""

    METRIC = "metric"
    INVERSE = "inverse"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class DepthMap:
    """
    Dense single-channel depth raster with a validity mask.

    ``values`` is a float32 ``(height, width)`` array, finite wherever ``validity`` is set. Maps tagged
    ``normalized`` keep every valid value in ``[-1, 1]``.
    """

    values: np.ndarray
    validity: np.ndarray
    units: DepthUnits = DepthUnits.METRIC

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        validity = np.ascontiguousarray(self.validity, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"Depth values must be a non-empty 2D array, got shape {values.shape}")
        if validity.shape != values.shape:
            raise ShapeError(f"Validity shape {validity.shape} does not match values shape {values.shape}")
        if not np.all(np.isfinite(values[validity])):
            raise RangeError("Depth values must be finite on valid pixels")
        units = DepthUnits(self.units)
        if units is DepthUnits.NORMALIZED and validity.any() and np.abs(values[validity]).max() > 1.0:
            raise RangeError("Normalized depth values must lie in [-1, 1]")
        values.setflags(write=False)
        validity.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "validity", validity)
        object.__setattr__(self, "units", units)

    @classmethod
    def dense(cls, values: np.ndarray, units: DepthUnits = DepthUnits.METRIC) -> "DepthMap":
        """Depth map with every pixel valid."""
        values = np.asarray(values)
        return cls(values=values, validity=np.ones(values.shape, dtype=bool), units=units)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def n_valid(self) -> int:
        return int(self.validity.sum())

    def valid_values(self) -> np.ndarray:
        """Valid values as a flat float64 array."""
        return self.values[self.validity].astype(np.float64)

    def with_values(self, values: np.ndarray, units: Optional[DepthUnits] = None) -> "DepthMap":
        """Same validity, new values; invalid pixels are zeroed."""
        values = np.where(self.validity, values, 0.0)
        return DepthMap(values=values, validity=self.validity, units=self.units if units is None else units)


@dataclass(frozen=True)
class ImageMap:
    """
    Image raster with values in ``[0, 1]``, stored channel-last as float32 ``(height, width, channels)``.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[2] not in (1, 3) or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"Image must have shape (H, W, 1) or (H, W, 3), got {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise RangeError("Image values must be finite and within [0, 1]")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def channels(self) -> int:
        return int(self.values.shape[2])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def to_signed(self) -> np.ndarray:
        """Channel-first float32 array mapped to ``[-1, 1]`` (``2x - 1``), as fed to the codec."""
        return np.ascontiguousarray(np.transpose(self.values, (2, 0, 1)) * 2.0 - 1.0, dtype=np.float32)

    def luminance(self) -> np.ndarray:
        """Single-channel ``(height, width)`` luminance."""
        if self.channels == 1:
            return self.values[:, :, 0]
        return self.values @ np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class NormalizationRecord:
    """
    Affine endpoints of a normalization: ``lo`` maps to -1 and ``hi`` to +1.
    """

    lo: float
    hi: float
    percentile_based: bool = True

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise DegenerateDepth(f"Normalization needs hi > lo, got lo={self.lo}, hi={self.hi}")


def normalize_depth(d: DepthMap, lo_pct: float = 2.0, hi_pct: float = 98.0) -> Tuple[DepthMap, NormalizationRecord]:
    """
    Map the valid values of ``d`` affinely to ``[-1, 1]`` using per-image percentiles.

    .. math::

        d' = \\operatorname{clip}\\left(2 \\frac{d - p_{lo}}{p_{hi} - p_{lo}} - 1, -1, 1\\right)

    Percentiles use linear interpolation between order statistics. Invalid pixels are set to 0.

    :param d: Depth map in any units.
    :param lo_pct: Percentile mapped to -1.
    :param hi_pct: Percentile mapped to +1.
    :return: Normalized map and the record needed to undo the mapping.
    :raises EmptyDepth: If ``d`` has no valid pixel.
    :raises DegenerateDepth: If the valid values do not span a range.
    """
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise RangeError(f"Need 0 <= lo_pct < hi_pct <= 100, got {lo_pct}, {hi_pct}")
    valid = d.valid_values()
    if valid.size == 0:
        raise EmptyDepth("Cannot normalize a depth map without valid pixels")
    if np.all(valid == valid[0]):
        raise DegenerateDepth("All valid depth values are equal")

    lo, hi = np.percentile(valid, [lo_pct, hi_pct])
    record = NormalizationRecord(lo=float(lo), hi=float(hi), percentile_based=(lo_pct, hi_pct) != (0.0, 100.0))

    scaled = 2.0 * (d.values.astype(np.float64) - record.lo) / (record.hi - record.lo) - 1.0
    scaled = np.clip(scaled, -1.0, 1.0)
    return d.with_values(scaled, units=DepthUnits.NORMALIZED), record


def denormalize_depth(
    d: DepthMap, rec: NormalizationRecord, units: DepthUnits = DepthUnits.METRIC
) -> DepthMap:
    """
    Invert :func:`normalize_depth` (exact for pixels that were not clamped).

    :param d: Normalized depth map.
    :param rec: Record returned by the normalization.
    :param units: Unit tag of the restored map.
    :raises UnitMismatch: If ``d`` is not normalized.
    """
    if d.units is not DepthUnits.NORMALIZED:
        raise UnitMismatch(f"Expected a normalized depth map, got {d.units.value}")
    restored = (d.values.astype(np.float64) + 1.0) * 0.5 * (rec.hi - rec.lo) + rec.lo
    return d.with_values(restored, units=units)
