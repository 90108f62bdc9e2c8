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
# Variance schedule of the T-step forward process and the v-prediction algebra.
#
#     z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps
#     v   = sqrt(abar_t) eps - sqrt(1 - abar_t) z_0
#     z_0 = sqrt(abar_t) z_t - sqrt(1 - abar_t) v
#     eps = sqrt(1 - abar_t) z_t + sqrt(abar_t) v
#
# The algebra functions take abar directly (a float, a numpy array or a torch tensor broadcastable against the
# latents), so they serve numpy oracles and torch training alike.
#

from dataclasses import dataclass
from typing import Any, Sequence, Union

import numpy as np

from utils.exceptions import ConfigError, RangeError, ShapeError

from .codec import LatentTag, LatentTensor

SCHEDULE_KINDS = ("scaled_linear", "linear")

Timestep = Union[int, Sequence[int], np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    """
    ``betas[j - 1]`` is the variance added at step ``j``; ``alpha_bars[t - 1]`` is the cumulative product up to ``t``.
    Timesteps are 1-based: ``1 <= t <= T``.
    """

    kind: str
    T: int
    beta_start: float
    beta_end: float
    betas: np.ndarray
    alpha_bars: np.ndarray

    def check_timestep(self, t: Timestep) -> np.ndarray:
        """
        :return: ``t`` as an int64 array.
        :raises RangeError: If any entry is outside ``[1, T]``.
        """
        steps = np.asarray(t, dtype=np.int64)
        if steps.size == 0 or steps.min() < 1 or steps.max() > self.T:
            raise RangeError(f"Timesteps must lie in [1, {self.T}], got {t}")
        return steps

    def alpha_bar(self, t: Timestep) -> Any:
        """ᾱ_t as a float for a scalar ``t``, or a float64 array for an array of timesteps."""
        steps = self.check_timestep(t)
        values = self.alpha_bars[steps - 1]
        return float(values) if steps.ndim == 0 else values

    def describe(self) -> dict:
        return {"schedule": self.kind, "timesteps": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}


def make_schedule(
    kind: str = "scaled_linear", T: int = 1000, beta_start: float = 0.00085, beta_end: float = 0.012
) -> NoiseSchedule:
    """
    Build a noise schedule.

    ``scaled_linear`` interpolates :math:`\\sqrt{\\beta}` linearly and squares; ``linear`` interpolates
    :math:`\\beta` linearly. In both cases

    .. math::

        \\bar{\\alpha}_t = \\prod_{j \\le t} (1 - \\beta_j)

    :param kind: ``"scaled_linear"`` or ``"linear"``.
    :param T: Number of diffusion steps, ``>= 1``.
    :param beta_start: First beta, ``> 0``.
    :param beta_end: Last beta, ``< 1``.
    :raises ConfigError: On invalid arguments.
    """
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"Unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError(f"Need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")

    if kind == "scaled_linear":
        betas = np.linspace(np.sqrt(beta_start), np.sqrt(beta_end), T, dtype=np.float64) ** 2
    else:
        betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    betas.setflags(write=False)
    alpha_bars.setflags(write=False)
    return NoiseSchedule(kind=kind, T=T, beta_start=beta_start, beta_end=beta_end, betas=betas, alpha_bars=alpha_bars)


def noise_latent(z0: Any, eps: Any, alpha_bar: Any) -> Any:
    return alpha_bar**0.5 * z0 + (1.0 - alpha_bar) ** 0.5 * eps


def velocity(z0: Any, eps: Any, alpha_bar: Any) -> Any:
    return alpha_bar**0.5 * eps - (1.0 - alpha_bar) ** 0.5 * z0


def x0_from_v(zt: Any, v: Any, alpha_bar: Any) -> Any:
    return alpha_bar**0.5 * zt - (1.0 - alpha_bar) ** 0.5 * v


def eps_from_v(zt: Any, v: Any, alpha_bar: Any) -> Any:
    return (1.0 - alpha_bar) ** 0.5 * zt + alpha_bar**0.5 * v


def broadcast_alpha_bar(sched: NoiseSchedule, t: Timestep, ndim: int) -> Any:
    """
    ᾱ for scalar ``t``, or a float64 array of shape ``(B, 1, ..., 1)`` with ``ndim`` axes for a batch of timesteps.
    """
    a = sched.alpha_bar(t)
    if isinstance(a, float):
        return a
    return a.reshape((-1,) + (1,) * (ndim - 1))


def _unwrap(z: Any) -> Any:
    return z.values if isinstance(z, LatentTensor) else z


def _check_pair(z0: Any, eps: Any) -> None:
    if tuple(z0.shape) != tuple(eps.shape):
        raise ShapeError(f"Shapes differ: {tuple(z0.shape)} vs {tuple(eps.shape)}")


def add_noise(z0: Any, eps: Any, t: Timestep, sched: NoiseSchedule) -> Any:
    """
    Forward noising :math:`z_t = \\sqrt{\\bar\\alpha_t} z_0 + \\sqrt{1 - \\bar\\alpha_t} \\epsilon`.

    :param z0: Clean latent (:class:`LatentTensor` or array with an optional leading batch axis).
    :param eps: Gaussian noise, same shape.
    :param t: Timestep, or one timestep per batch element.
    :param sched: Noise schedule.
    :return: Noisy latent, same kind as ``z0``.
    :raises ShapeError: If shapes differ.
    :raises RangeError: If ``t`` is outside ``[1, T]``.
    """
    z0_values, eps_values = _unwrap(z0), _unwrap(eps)
    _check_pair(z0_values, eps_values)
    zt = noise_latent(z0_values, eps_values, broadcast_alpha_bar(sched, t, len(z0_values.shape)))
    if isinstance(z0, LatentTensor):
        return LatentTensor(values=zt, tag=LatentTag.DEPTH_STATE)
    return zt


def v_target(z0: Any, eps: Any, t: Timestep, sched: NoiseSchedule) -> Any:
    """
    Ground-truth velocity :math:`v = \\sqrt{\\bar\\alpha_t} \\epsilon - \\sqrt{1 - \\bar\\alpha_t} z_0`.

    Same arguments and errors as :func:`add_noise`.
    """
    z0_values, eps_values = _unwrap(z0), _unwrap(eps)
    _check_pair(z0_values, eps_values)
    v = velocity(z0_values, eps_values, broadcast_alpha_bar(sched, t, len(z0_values.shape)))
    if isinstance(z0, LatentTensor):
        return LatentTensor(values=v, tag=LatentTag.DEPTH_STATE)
    return v
