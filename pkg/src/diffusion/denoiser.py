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
# Conditional denoiser v̂_θ(z, t) and the refiner checkpoint that carries it.
#
# Input z is the channelwise concatenation (image latent, depth-conditioning latent, noisy depth state); the output
# has the channel count of the depth state. The timestep enters through a sinusoidal embedding and an MLP whose
# output is added to every stage.
#

import threading
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from masking.patch_mask import MaskConfig
from utils.checkpoints import load_checkpoint, save_checkpoint
from utils.exceptions import ConfigError, FormatError, ShapeError
from utils.seeding import derive_seed

from .codec import LatentTensor
from .schedule import NoiseSchedule, make_schedule

REFINER_KIND = "refiner"

# Ablation variants: which parts of the pipeline are active
VARIANTS = {
    "no-cond": {"condition": False, "align": False, "mask": False, "image": True},
    "no-align": {"condition": True, "align": False, "mask": False, "image": True},
    "no-mask": {"condition": True, "align": True, "mask": False, "image": True},
    "full": {"condition": True, "align": True, "mask": True, "image": True},
    "no-image": {"condition": True, "align": True, "mask": True, "image": False},
}


def variant_flags(variant: str) -> Dict[str, bool]:
    """
    :raises ConfigError: On an unknown variant.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"Unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    return VARIANTS[variant]


@dataclass(frozen=True)
class DenoiserConfig:
    """Channel layout and width of the denoiser."""

    image_channels: int = 3
    depth_channels: int = 1
    base_channels: int = 24
    temb_dim: int = 64
    groups: int = 8

    def __post_init__(self) -> None:
        if self.base_channels < 1 or self.base_channels % self.groups:
            raise ConfigError(f"base_channels must be a positive multiple of {self.groups}, got {self.base_channels}")
        if self.temb_dim < 2 or self.temb_dim % 2:
            raise ConfigError(f"temb_dim must be a positive even number, got {self.temb_dim}")

    @property
    def in_channels(self) -> int:
        return self.image_channels + 2 * self.depth_channels

    @classmethod
    def for_codec(cls, codec_factor: int, base_channels: int = 24, image_channels: int = 3) -> "DenoiserConfig":
        f2 = codec_factor * codec_factor
        return cls(image_channels=image_channels * f2, depth_channels=f2, base_channels=base_channels)


def get_time_embedding(time_steps: torch.Tensor, temb_dim: int) -> torch.Tensor:
    """
    Sinusoidal embedding of shape ``(B, temb_dim)``.

    .. math::

        e_{2i} = \\sin(t / 10000^{2i/d}), \\qquad e_{2i+1} = \\cos(t / 10000^{2i/d})
    """
    half = temb_dim // 2
    factor = 10000 ** (torch.arange(0, half, dtype=torch.float32) / half)
    t_emb = time_steps.float()[:, None] / factor[None, :]
    return torch.cat([torch.sin(t_emb), torch.cos(t_emb)], dim=-1)


class ConvBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int, temb_dim: int, groups: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, 1, 1)
        self.norm1 = nn.GroupNorm(groups, ch_out)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, 1, 1)
        self.norm2 = nn.GroupNorm(groups, ch_out)
        self.time_proj = nn.Linear(temb_dim, ch_out)

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.norm1(self.conv1(x)))
        h = h + self.time_proj(t_emb)[:, :, None, None]
        return F.silu(self.norm2(self.conv2(h)))


class Denoiser(nn.Module):
    """
    Three-level encoder-decoder with skip connections and GroupNorm. Latent height and width must be divisible by 4.
    """

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        c, d, g = config.base_channels, config.temb_dim, config.groups
        self.time_mlp = nn.Sequential(nn.Linear(d, 4 * d), nn.SiLU(), nn.Linear(4 * d, d))
        self.enc1 = ConvBlock(config.in_channels, c, d, g)
        self.enc2 = ConvBlock(c, 2 * c, d, g)
        self.mid = ConvBlock(2 * c, 4 * c, d, g)
        self.up2 = nn.Conv2d(4 * c, 2 * c, 3, 1, 1)
        self.dec2 = ConvBlock(4 * c, 2 * c, d, g)
        self.up1 = nn.Conv2d(2 * c, c, 3, 1, 1)
        self.dec1 = ConvBlock(2 * c, c, d, g)
        self.out = nn.Conv2d(c, config.depth_channels, 1)

    def forward(self, z: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        if z.dim() != 4 or z.shape[1] != self.config.in_channels:
            raise ShapeError(f"Denoiser expects (B, {self.config.in_channels}, h, w) input, got {tuple(z.shape)}")
        if z.shape[2] % 4 or z.shape[3] % 4:
            raise ShapeError(f"Latent size {z.shape[2]}x{z.shape[3]} is not divisible by 4")
        t_emb = self.time_mlp(get_time_embedding(t, self.config.temb_dim))
        e1 = self.enc1(z, t_emb)
        e2 = self.enc2(F.avg_pool2d(e1, 2), t_emb)
        m = self.mid(F.avg_pool2d(e2, 2), t_emb)
        d2 = self.dec2(torch.cat([e2, self.up2(F.interpolate(m, scale_factor=2, mode="nearest"))], dim=1), t_emb)
        d1 = self.dec1(torch.cat([e1, self.up1(F.interpolate(d2, scale_factor=2, mode="nearest"))], dim=1), t_emb)
        return self.out(d1)


def init_denoiser(config: DenoiserConfig, seed: int) -> Denoiser:
    """Freshly initialized denoiser; the initialization depends only on ``(config, seed)``."""
    torch.manual_seed(derive_seed(seed, "init"))
    return Denoiser(config)


@dataclass
class RefinerCheckpoint:
    """
    Everything needed to run a trained refiner: parameters, architecture, schedule, mask and codec settings, the
    ablation variant, the run configuration and training metadata.
    """

    parameters: Dict[str, np.ndarray]
    denoiser: DenoiserConfig
    schedule: NoiseSchedule
    mask: MaskConfig
    codec_factor: int
    variant: str
    run_config: Dict[str, Any] = field(default_factory=dict)
    run: Dict[str, Any] = field(default_factory=dict)
    _module: Optional[Denoiser] = field(default=None, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    @property
    def flags(self) -> Dict[str, bool]:
        return variant_flags(self.variant)

    def module(self) -> Denoiser:
        """The denoiser, built once from the stored parameters; safe to call from several threads."""
        with self._lock:
            if self._module is None:
                module = Denoiser(self.denoiser)
                state = {name: torch.from_numpy(np.array(blob)) for name, blob in self.parameters.items()}
                module.load_state_dict(state)
                module.eval()
                self._module = module
            return self._module

    def predict_v(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Numpy wrapper of the denoiser: ``(B, C_in, h, w)`` and ``(B,)`` timesteps to ``(B, C_depth, h, w)``."""
        with torch.no_grad():
            v = self.module()(torch.from_numpy(np.ascontiguousarray(z, dtype=np.float32)), torch.as_tensor(t))
        return v.numpy()

    def config_echo(self) -> Dict[str, Any]:
        return {
            "denoiser": asdict(self.denoiser),
            "schedule": self.schedule.describe(),
            "mask": asdict(self.mask),
            "codec_factor": self.codec_factor,
            "variant": self.variant,
            "run_config": self.run_config,
        }

    def save(self, path: str) -> None:
        save_checkpoint(path, kind=REFINER_KIND, parameters=self.parameters, config=self.config_echo(), run=self.run)

    @classmethod
    def load(cls, path: str) -> "RefinerCheckpoint":
        """
        :raises MissingCheckpoint: If the file does not exist.
        :raises FormatError: If the file is not a refiner checkpoint.
        """
        checkpoint = load_checkpoint(path, expected_kind=REFINER_KIND)
        try:
            cfg = checkpoint.config
            sched = cfg["schedule"]
            return cls(
                parameters=checkpoint.parameters,
                denoiser=DenoiserConfig(**cfg["denoiser"]),
                schedule=make_schedule(sched["schedule"], sched["timesteps"], sched["beta_start"], sched["beta_end"]),
                mask=MaskConfig(**cfg["mask"]),
                codec_factor=int(cfg["codec_factor"]),
                variant=str(cfg["variant"]),
                run_config=cfg.get("run_config", {}),
                run=checkpoint.run,
            )
        except (KeyError, TypeError) as e:
            raise FormatError(f"{path}: incomplete refiner configuration ({e})")


def denoiser_forward(checkpoint: RefinerCheckpoint, z: Any, t: Any) -> Any:
    """
    Velocity prediction v̂ for a concatenated latent.

    :param checkpoint: Trained refiner.
    :param z: ``(B, C_in, h, w)`` array, or a single concatenated :class:`LatentTensor`.
    :param t: Timesteps, one per batch element (or a scalar for a single latent).
    :return: Array of shape ``(B, C_depth, h, w)``, or a :class:`LatentTensor` for a single latent.
    :raises ShapeError: On a wrong channel count.
    """
    if isinstance(z, LatentTensor):
        v = checkpoint.predict_v(z.values[None], np.atleast_1d(np.asarray(t, dtype=np.int64)))
        return LatentTensor(values=v[0], tag="depth_state")
    steps = np.asarray(t, dtype=np.int64)
    if steps.ndim == 0:
        steps = np.full(np.shape(z)[0], int(steps), dtype=np.int64)
    return checkpoint.predict_v(np.asarray(z), steps)
