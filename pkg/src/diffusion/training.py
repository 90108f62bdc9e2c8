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
# Refiner training loop.
#
# Per training pair the conditioning inputs are computed once:
#
#     label        normalized ground truth (2/98 percentiles)
#     coarse       prediction of the coarse model
#     conditioning coarse pre-aligned onto the label (or normalized on its own when alignment is ablated)
#     mask         patches where conditioning and label agree, at latent resolution
#
# Every iteration then draws a batch, a timestep and Gaussian noise from a stream derived from (seed, iteration),
# noises the label latent and takes an Adam step on the masked v-prediction loss.
#

import time
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from alignment.affine import prealign_conditioning
from coarse_models.models import CoarseModel, predict_coarse
from depth_io.rasters import DepthMap, ImageMap, normalize_depth
from masking.patch_mask import LatentMask, MaskConfig, build_latent_mask
from simulation.splits import Manifest
from utils.checkpoints import count_parameters, state_to_numpy
from utils.config import RunConfig, write_config_csv
from utils.exceptions import ConfigError, DegenerateDepth, InsufficientOverlap
from utils.seeding import derive_seed

from .codec import depth_to_raster, encode
from .denoiser import DenoiserConfig, RefinerCheckpoint, init_denoiser, variant_flags
from .objective import masked_v_loss
from .schedule import make_schedule, noise_latent, velocity

LOG_COLUMNS = ["iteration", "loss", "wall_time_s"]


@dataclass
class TrainingPair:
    """Latents of one training sample: image, depth conditioning, clean label and the latent mask."""

    z_image: np.ndarray
    z_cond: np.ndarray
    z0: np.ndarray
    mask: np.ndarray


def mask_config_from(config: RunConfig) -> MaskConfig:
    return MaskConfig(
        patch_size=config.patch_size,
        threshold=config.threshold,
        codec_factor=config.codec_factor,
        pool=config.mask_pool,
    )


def prepare_pair(
    image: ImageMap, depth: DepthMap, coarse_model: CoarseModel, config: RunConfig, flags: Dict[str, bool]
) -> TrainingPair:
    """
    Conditioning latents and mask of one sample under the ablation ``flags``.

    :raises DegenerateDepth: If the label or the coarse prediction is constant.
    :raises InsufficientOverlap: If label and prediction share fewer than two valid pixels.
    """
    f = config.codec_factor
    label, _ = normalize_depth(depth, config.lo_pct, config.hi_pct)
    coarse = predict_coarse(coarse_model, image, gt=label)

    if flags["align"]:
        conditioning = prealign_conditioning(coarse, label)
    else:
        conditioning, _ = normalize_depth(coarse, config.lo_pct, config.hi_pct)

    if flags["mask"]:
        mask = build_latent_mask(conditioning, label, mask_config_from(config))
    else:
        mask = LatentMask.ones(image.height // f, image.width // f)

    z_image = encode(image.to_signed(), f)
    if not flags["image"]:
        z_image = np.zeros_like(z_image)
    z_cond = encode(depth_to_raster(conditioning.values), f)
    if not flags["condition"]:
        z_cond = np.zeros_like(z_cond)
    z0 = encode(depth_to_raster(label.values), f)
    return TrainingPair(z_image=z_image, z_cond=z_cond, z0=z0, mask=mask.values)


def prepare_pairs(
    manifest: Manifest, coarse_model: CoarseModel, config: RunConfig, flags: Dict[str, bool], verbose: bool = False
) -> Tuple[List[TrainingPair], int]:
    """
    Conditioning latents of every usable sample of a split.

    Samples whose label or coarse prediction is degenerate, or whose mask keeps nothing, are skipped with a warning.

    :return: The usable pairs and the number of skipped samples.
    """
    pairs: List[TrainingPair] = []
    skipped = 0
    for index in tqdm(range(len(manifest)), desc="Conditioning", disable=not verbose):
        image, depth = manifest.load_sample(index)
        try:
            pair = prepare_pair(image, depth, coarse_model, config, flags)
        except (DegenerateDepth, InsufficientOverlap) as e:
            warnings.warn(f"Skipping sample {index}: {e}", stacklevel=2)
            skipped += 1
            continue
        if not pair.mask.any():
            warnings.warn(f"Skipping sample {index}: latent mask keeps no cell", stacklevel=2)
            skipped += 1
            continue
        pairs.append(pair)
    return pairs, skipped


def train_refiner(
    train_manifest: Manifest,
    coarse_model: CoarseModel,
    config: RunConfig,
    checkpoint_path: Optional[str] = None,
    log_path: Optional[str] = None,
    verbose: bool = False,
) -> RefinerCheckpoint:
    """
    Train a depth-conditioned denoiser with the masked v-prediction objective.

    Each iteration draws ``batch_size`` pairs, timesteps ``t ~ U{1..T}`` and noise ``eps ~ N(0, I)``, forms

    .. math::

        z_t = \\sqrt{\\bar{\\alpha}_t} z_0 + \\sqrt{1 - \\bar{\\alpha}_t} \\epsilon, \\qquad
        v = \\sqrt{\\bar{\\alpha}_t} \\epsilon - \\sqrt{1 - \\bar{\\alpha}_t} z_0

    and minimizes the masked squared error between :math:`\\hat{v}_\\theta([z^x, z^{\\tilde{d}'}, z_t], t)` and
    :math:`v`. The run is reproducible for a fixed config: the initialization depends on ``seed`` and every batch on
    ``(seed, iteration)``.

    :param train_manifest: Training split, non-empty.
    :param coarse_model: Coarse model providing the conditioning.
    :param config: Run configuration; ``variant`` selects the ablation.
    :param checkpoint_path: If given, the checkpoint is saved there.
    :param log_path: If given, the per-iteration loss log is written there as CSV.
    :param verbose: Print progress.
    :return: The trained refiner.
    :raises ConfigError: On an empty manifest, an unknown variant or when no sample is usable.
    """
    if len(train_manifest) == 0:
        raise ConfigError("Training manifest is empty")
    flags = variant_flags(config.variant)
    sched = make_schedule(config.schedule, config.timesteps, config.beta_start, config.beta_end)
    mask_config = mask_config_from(config)

    if verbose:
        print(f"🧭 Preparing conditioning for {len(train_manifest)} samples (variant {config.variant})")
    pairs, skipped = prepare_pairs(train_manifest, coarse_model, config, flags, verbose=verbose)
    if not pairs:
        raise ConfigError(
            "No usable training samples in the manifest: every sample was degenerate or its latent mask kept no "
            f"cell at threshold={config.threshold}; raise --threshold or use larger scenes"
        )

    z_image = torch.from_numpy(np.stack([p.z_image for p in pairs]))
    z_cond = torch.from_numpy(np.stack([p.z_cond for p in pairs]))
    z0_all = torch.from_numpy(np.stack([p.z0 for p in pairs]))
    masks = torch.from_numpy(np.stack([p.mask for p in pairs]))
    n = len(pairs)

    image_channels = z_image.shape[1] // (config.codec_factor * config.codec_factor)
    denoiser_config = DenoiserConfig.for_codec(config.codec_factor, config.base_channels, image_channels)
    module = init_denoiser(denoiser_config, config.seed)
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    alpha_table = torch.from_numpy(np.asarray(sched.alpha_bars, dtype=np.float32))

    if verbose:
        print(f"🧮 Training refiner ({count_parameters(module)} parameters) on {n} samples, {skipped} skipped")

    rows = []
    start = time.perf_counter()
    module.train()
    for iteration in tqdm(range(config.iterations), desc="Training", disable=not verbose):
        generator = torch.Generator().manual_seed(derive_seed(config.seed, "batch", iteration))
        idx = torch.randint(0, n, (config.batch_size,), generator=generator)
        t = torch.randint(1, sched.T + 1, (config.batch_size,), generator=generator)
        z0 = z0_all[idx]
        eps = torch.randn(z0.shape, generator=generator)
        a = alpha_table[t - 1].view(-1, 1, 1, 1)

        zt = noise_latent(z0, eps, a)
        v_hat = module(torch.cat([z_image[idx], z_cond[idx], zt], dim=1), t)
        loss = masked_v_loss(v_hat, velocity(z0, eps, a), masks[idx])

        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        wall = time.perf_counter() - start if config.record_timing else 0.0
        rows.append({"iteration": iteration, "loss": float(loss.item()), "wall_time_s": wall})
    module.eval()

    if log_path is not None:
        write_config_csv(log_path, pd.DataFrame(rows, columns=LOG_COLUMNS), config)

    run: Dict[str, Any] = {
        "seed": config.seed,
        "iterations": config.iterations,
        "n_samples": n,
        "skipped": skipped,
        "coarse_model": coarse_model.id,
        "mask_coverage": float(masks.float().mean().item()),
        "initial_loss": rows[0]["loss"] if rows else None,
        "final_loss": rows[-1]["loss"] if rows else None,
        "losses": [row["loss"] for row in rows[:: config.log_every]],
    }
    checkpoint = RefinerCheckpoint(
        parameters=state_to_numpy(module),
        denoiser=denoiser_config,
        schedule=sched,
        mask=mask_config,
        codec_factor=config.codec_factor,
        variant=config.variant,
        run_config=config.to_dict(),
        run=run,
        _module=module,
    )
    if checkpoint_path is not None:
        checkpoint.save(checkpoint_path)
    if verbose:
        print(f"✅ Refiner trained: loss {run['initial_loss']} -> {run['final_loss']}")
    return checkpoint

