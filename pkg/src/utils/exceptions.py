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
# Error kinds raised across DepthLab. Every class also derives from the built-in exception that callers would catch
# for the same problem, so ``except ValueError`` keeps working around the numerical code.
#


class DepthLabError(Exception):
    """Base class of every error raised by DepthLab."""


class ConfigError(DepthLabError, ValueError):
    """Invalid hyperparameter, flag or configuration value."""


class ShapeError(DepthLabError, ValueError):
    """Raster shapes do not match, or are not divisible by a patch/codec factor."""


class RangeError(DepthLabError, ValueError):
    """A scalar argument (e.g. a diffusion timestep) is outside its valid range."""


class EmptyDepth(DepthLabError, ValueError):
    """A depth map has no valid pixel."""


class DegenerateDepth(DepthLabError, ValueError):
    """All valid depth values are equal, so no affine normalization or alignment exists."""


class DegenerateSource(DegenerateDepth):
    """The source of a least-squares alignment has zero variance."""


class InsufficientOverlap(DepthLabError, ValueError):
    """Fewer than two jointly valid pixels are available for alignment."""


class UnitMismatch(DepthLabError, ValueError):
    """A depth map carries a unit tag that the operation does not accept."""


class FormatError(DepthLabError, ValueError):
    """A file does not follow the expected binary or text format."""


class ArtifactIOError(DepthLabError, OSError):
    """Reading or writing an artifact failed at the filesystem level."""


class MissingGroundTruth(DepthLabError, ValueError):
    """The degradation oracle was asked to predict without a ground-truth depth map."""


class EmptyMask(DepthLabError, ValueError):
    """A latent mask has no valid element, so the masked objective is undefined."""


class MissingCheckpoint(DepthLabError, FileNotFoundError):
    """A checkpoint file required by an experiment does not exist."""
