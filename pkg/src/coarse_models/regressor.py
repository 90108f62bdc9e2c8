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
# Tiny convolutional encoder-decoder regressing affine-invariant depth from an image, trained with the
# scale-and-shift-invariant loss. A genuinely different model family from the degradation oracle, used to test that
# a refiner works with coarse models it never saw during training.
#

import time
import warnings
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from depth_io.rasters import ImageMap, normalize_depth
from simulation.splits import Manifest
from utils.checkpoints import count_parameters
from utils.config import RunConfig, write_config_csv
from utils.exceptions import ConfigError, DegenerateDepth
from utils.seeding import derive_seed

REGRESSOR_BASE_CHANNELS = 12


def _block(ch_in: int, ch_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(ch_in, ch_out, 3, 1, 1),
        nn.GroupNorm(4, ch_out),
        nn.ReLU(),
        nn.Conv2d(ch_out, ch_out, 3, 1, 1),
        nn.GroupNorm(4, ch_out),
        nn.ReLU(),
    )


class TinyRegressor(nn.Module):
    """
    Two-level U-shaped encoder-decoder, about 67k parameters with ``base_channels=12``.

    Input ``(B, 3, H, W)`` images in ``[-1, 1]``; output ``(B, 1, H, W)`` affine-ambiguous depth. ``H`` and ``W``
    must be divisible by 4.
    """

    def __init__(self, in_channels: int = 3, base_channels: int = REGRESSOR_BASE_CHANNELS):
        super().__init__()
        c = base_channels
        self.enc1 = _block(in_channels, c)
        self.enc2 = _block(c, 2 * c)
        self.enc3 = _block(2 * c, 4 * c)
        self.up2 = nn.Conv2d(4 * c, 2 * c, 3, 1, 1)
        self.dec2 = nn.Sequential(nn.Conv2d(4 * c, 2 * c, 3, 1, 1), nn.GroupNorm(4, 2 * c), nn.ReLU())
        self.up1 = nn.Conv2d(2 * c, c, 3, 1, 1)
        self.dec1 = nn.Sequential(nn.Conv2d(2 * c, c, 3, 1, 1), nn.GroupNorm(4, c), nn.ReLU())
        self.head = nn.Conv2d(c, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e1 = self.enc1(x)
        e2 = self.enc2(F.avg_pool2d(e1, 2))
        e3 = self.enc3(F.avg_pool2d(e2, 2))
        d2 = self.up2(F.interpolate(e3, scale_factor=2, mode="nearest"))
        d2 = self.dec2(torch.cat([e2, d2], dim=1))
        d1 = self.up1(F.interpolate(d2, scale_factor=2, mode="nearest"))
        d1 = self.dec1(torch.cat([e1, d1], dim=1))
        return self.head(d1)


def init_tiny_regressor(seed: int, base_channels: int = REGRESSOR_BASE_CHANNELS) -> TinyRegressor:
    """Freshly initialized regressor; the initialization depends only on ``seed``."""
    torch.manual_seed(derive_seed(seed, "coarse-init"))
    return TinyRegressor(base_channels=base_channels)


def module_from_state(parameters: Dict[str, np.ndarray], base_channels: int) -> TinyRegressor:
    module = TinyRegressor(base_channels=base_channels)
    module.load_state_dict({name: torch.from_numpy(np.array(blob)) for name, blob in parameters.items()})
    module.eval()
    return module


def batched_ssi_loss(pred: torch.Tensor, target: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """
    Batched scale-and-shift-invariant MSE: each prediction is aligned onto its target by closed-form least squares
    before the squared error is averaged.

    :param pred: ``(B, 1, H, W)`` predictions.
    :param target: ``(B, 1, H, W)`` labels.
    :return: Mean over the batch of the per-sample aligned MSE.
    """
    p = pred.flatten(1)
    g = target.flatten(1)
    p_c = p - p.mean(dim=1, keepdim=True)
    g_c = g - g.mean(dim=1, keepdim=True)
    s = (p_c * g_c).sum(dim=1, keepdim=True) / ((p_c * p_c).sum(dim=1, keepdim=True) + eps)
    aligned = s * p_c + g.mean(dim=1, keepdim=True)
    return ((aligned - g) ** 2).mean(dim=1).mean()


def image_tensor(x: ImageMap) -> torch.Tensor:
    """``(1, 3, H, W)`` float32 tensor in ``[-1, 1]``; grayscale images are repeated to three channels."""
    signed = x.to_signed()
    if signed.shape[0] == 1:
        signed = np.repeat(signed, 3, axis=0)
    return torch.from_numpy(signed)[None]


def predict_regressor(module: TinyRegressor, x: ImageMap) -> np.ndarray:
    """``(H, W)`` float64 prediction of a regressor for one image."""
    with torch.no_grad():
        out = module(image_tensor(x))
    return out[0, 0].double().numpy()


def _load_training_pairs(manifest: Manifest, config: RunConfig) -> Tuple[torch.Tensor, torch.Tensor, int]:
    images: List[torch.Tensor] = []
    labels: List[torch.Tensor] = []
    skipped = 0
    for index in range(len(manifest)):
        image, depth = manifest.load_sample(index)
        try:
            label, _ = normalize_depth(depth, config.lo_pct, config.hi_pct)
        except DegenerateDepth:
            warnings.warn(f"Skipping sample {index}: constant depth label", stacklevel=2)
            skipped += 1
            continue
        images.append(image_tensor(image)[0])
        labels.append(torch.from_numpy(np.array(label.values))[None])
    if not images:
        raise ConfigError("No usable training samples in the manifest")
    return torch.stack(images), torch.stack(labels), skipped


def train_tiny_regressor_module(
    manifest: Manifest,
    config: RunConfig,
    log_path: Optional[str] = None,
    verbose: bool = False,
) -> Tuple[TinyRegressor, Dict[str, object]]:
    """
    Fit a :class:`TinyRegressor` to the normalized depth labels of a split with Adam on the batched SSI loss.

    Batches are drawn from the stream ``derive_seed(seed, "coarse-batch", step)``, so a run is reproducible for a
    fixed seed.

    :param manifest: Training split.
    :param config: Uses ``seed``, ``coarse_steps``, ``coarse_batch_size``, ``coarse_learning_rate`` and the
        normalization percentiles.
    :param log_path: Optional CSV log of ``step, loss, wall_time_s``.
    :param verbose: Print progress.
    :return: The trained module and the run metadata.
    :raises ConfigError: On an empty manifest or invalid hyperparameters.
    """
    if len(manifest) == 0:
        raise ConfigError("Training manifest is empty")
    if config.coarse_steps < 0 or config.coarse_batch_size < 1 or config.coarse_learning_rate <= 0:
        raise ConfigError("Invalid coarse regressor hyperparameters")

    images, labels, skipped = _load_training_pairs(manifest, config)
    n = images.shape[0]
    module = init_tiny_regressor(config.seed)
    optimizer = torch.optim.Adam(module.parameters(), lr=config.coarse_learning_rate)

    if verbose:
        print(f"🧮 Training tiny regressor ({count_parameters(module)} parameters) on {n} samples")

    rows = []
    start = time.perf_counter()
    module.train()
    for step in tqdm(range(config.coarse_steps), disable=not verbose):
        generator = torch.Generator().manual_seed(derive_seed(config.seed, "coarse-batch", step))
        idx = torch.randint(0, n, (config.coarse_batch_size,), generator=generator)
        loss = batched_ssi_loss(module(images[idx]), labels[idx])
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        wall = time.perf_counter() - start if config.record_timing else 0.0
        rows.append({"step": step, "loss": float(loss.item()), "wall_time_s": wall})
    module.eval()

    if log_path is not None:
        write_config_csv(log_path, pd.DataFrame(rows, columns=["step", "loss", "wall_time_s"]), config)

    run = {
        "seed": config.seed,
        "steps": config.coarse_steps,
        "n_samples": n,
        "skipped": skipped,
        "initial_loss": rows[0]["loss"] if rows else None,
        "final_loss": rows[-1]["loss"] if rows else None,
    }
    if verbose:
        print(f"✅ Tiny regressor trained: loss {run['initial_loss']} -> {run['final_loss']}")
    return module, run
