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
# Deterministic DDIM inference and the refinement pipeline.
#
# At each visited timestep t (next visited timestep t', with abar = 1 after the last one):
#
#     v     = model(z_x, z_cond, z_t, t)
#     z_0   = sqrt(abar_t) z_t - sqrt(1 - abar_t) v
#     eps   = sqrt(1 - abar_t) z_t + sqrt(abar_t) v
#     z_t'  = sqrt(abar_t') z_0 + sqrt(1 - abar_t') eps
#

from typing import Any, Optional, Protocol, Tuple

import numpy as np

from coarse_models.models import CoarseModel, predict_coarse
from depth_io.rasters import DepthMap, DepthUnits, ImageMap, normalize_depth
from utils.exceptions import ConfigError, ShapeError
from utils.seeding import derive_seed

from .codec import LatentTag, LatentTensor, decode, depth_to_raster, encode
from .schedule import NoiseSchedule, eps_from_v, x0_from_v


class VelocityModel(Protocol):
    """Anything with a noise schedule that predicts velocities from concatenated latents."""

    schedule: NoiseSchedule

    def predict_v(self, z: np.ndarray, t: np.ndarray) -> np.ndarray: ...


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """
    Evenly spaced timesteps from ``T`` down to 1: ``round(linspace(T, 1, steps))``, deduplicated, descending.

    :raises ConfigError: Unless ``1 <= steps <= T``.
    """
    if not 1 <= steps <= T:
        raise ConfigError(f"DDIM steps must lie in [1, {T}], got {steps}")
    return np.unique(np.round(np.linspace(T, 1, steps)).astype(np.int64))[::-1]


def _values(z: Any) -> np.ndarray:
    return z.values if isinstance(z, LatentTensor) else np.asarray(z, dtype=np.float32)


def ddim_sample(
    checkpoint: VelocityModel, z_x: Any, z_cond: Any, steps: int, seed: int, z_init: Optional[np.ndarray] = None
) -> LatentTensor:
    """
    Deterministic DDIM reverse process from Gaussian noise to a clean depth latent.

    :param checkpoint: Refiner (or any :class:`VelocityModel`).
    :param z_x: Image latent ``(C_x, h, w)``.
    :param z_cond: Depth-conditioning latent ``(C_d, h, w)``; the state has the same shape.
    :param steps: Number of denoising steps, ``1 <= steps <= T``.
    :param seed: Seed of the starting noise.
    :param z_init: Starting state overriding the seeded noise.
    :return: Final clean-latent estimate.
    :raises ConfigError: On an invalid step count.
    """
    sched = checkpoint.schedule
    timesteps = ddim_timesteps(sched.T, steps)
    x = _values(z_x).astype(np.float64)
    cond = _values(z_cond).astype(np.float64)
    if x.shape[-2:] != cond.shape[-2:]:
        raise ShapeError(f"Latent sizes differ: {x.shape} vs {cond.shape}")
    if z_init is None:
        z = np.random.default_rng(derive_seed(seed, "ddim")).standard_normal(cond.shape)
    else:
        z = np.asarray(z_init, dtype=np.float64)

    for i, t in enumerate(timesteps):
        a = sched.alpha_bar(int(t))
        a_next = sched.alpha_bar(int(timesteps[i + 1])) if i + 1 < len(timesteps) else 1.0
        v = np.asarray(checkpoint.predict_v(np.concatenate([x, cond, z])[None], np.array([t])), dtype=np.float64)[0]
        z0 = x0_from_v(z, v, a)
        eps = eps_from_v(z, v, a)
        z = a_next**0.5 * z0 + (1.0 - a_next) ** 0.5 * eps
    return LatentTensor(values=z, tag=LatentTag.DEPTH_STATE)


def conditioning_latents(checkpoint: Any, x: ImageMap, coarse: DepthMap) -> Tuple[LatentTensor, LatentTensor]:
    """
    Image and depth-conditioning latents for inference: the coarse map is normalized on its own, and latents of
    ablated inputs are zeroed.
    """
    run_config = checkpoint.run_config
    lo_pct = float(run_config.get("lo_pct", 2.0))
    hi_pct = float(run_config.get("hi_pct", 98.0))
    f = checkpoint.codec_factor
    flags = checkpoint.flags

    z_x = encode(x.to_signed(), f)
    if not flags["image"]:
        z_x = np.zeros_like(z_x)
    if flags["condition"]:
        cond, _ = normalize_depth(coarse, lo_pct, hi_pct)
        z_cond = encode(depth_to_raster(cond.values), f)
    else:
        z_cond = np.zeros((f * f, x.height // f, x.width // f), dtype=np.float32)
    return LatentTensor(z_x, LatentTag.IMAGE_COND), LatentTensor(z_cond, LatentTag.DEPTH_COND)


def refine_depth(
    checkpoint: Any,
    coarse_model: Optional[CoarseModel],
    x: ImageMap,
    *,
    gt: Optional[DepthMap] = None,
    steps: Optional[int] = None,
    seed: int = 0,
    coarse: Optional[DepthMap] = None,
) -> DepthMap:
    """
    Refine the coarse prediction of any coarse model (including models never seen in training).

    :param checkpoint: Trained refiner.
    :param coarse_model: Coarse model; may be omitted when ``coarse`` is given.
    :param x: Input image; its size must be divisible by the codec factor and the patch size.
    :param gt: Ground truth, forwarded to coarse models that need it.
    :param steps: DDIM steps (defaults to the run configuration's ``ddim_steps``).
    :param seed: Seed of the starting noise.
    :param coarse: Precomputed coarse prediction.
    :return: Refined depth, normalized to ``[-1, 1]``, with the validity of the coarse prediction.
    :raises ShapeError: If the image size is not divisible.
    """
    for name, factor in (("codec factor", checkpoint.codec_factor), ("patch size", checkpoint.mask.patch_size)):
        if x.height % factor or x.width % factor:
            raise ShapeError(f"Image {x.height}x{x.width} is not divisible by the {name} {factor}")
    if coarse is None:
        if coarse_model is None:
            raise ConfigError("refine_depth needs a coarse model or a precomputed coarse prediction")
        coarse = predict_coarse(coarse_model, x, gt=gt)
    if steps is None:
        steps = int(checkpoint.run_config.get("ddim_steps", 50))

    z_x, z_cond = conditioning_latents(checkpoint, x, coarse)
    z0 = ddim_sample(checkpoint, z_x, z_cond, steps, seed)
    refined = decode(z0.values, checkpoint.codec_factor)[0]
    return coarse.with_values(np.clip(refined, -1.0, 1.0), units=DepthUnits.NORMALIZED)
