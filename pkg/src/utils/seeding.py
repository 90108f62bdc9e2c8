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
# Counter-based random numbers built on the SplitMix64 mixer. Every stream is a pure function of (seed, counter),
# so results do not depend on call order, worker scheduling or platform.
#
# SplitMix64 mixer, all arithmetic modulo 2**64:
#
#     z = x + 0x9E3779B97F4A7C15
#     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
#     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
#     return z ^ (z >> 31)
#
# The k-th output of stream ``key`` is ``mix(key + k * 0x9E3779B97F4A7C15)``; uniforms take the top 53 bits.
#

import hashlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

_GAMMA = np.uint64(GOLDEN_GAMMA)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """
    Apply the SplitMix64 finalizer elementwise.

    :param x: Array of ``uint64`` words.
    :return: Mixed ``uint64`` words, same shape.
    """
    z = np.asarray(x, dtype=np.uint64) + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix_int(x: int) -> int:
    return int(splitmix64(np.array([x & MASK64], dtype=np.uint64))[0])


def _label_to_int(label: Union[int, str]) -> int:
    if isinstance(label, str):
        return int.from_bytes(hashlib.md5(label.encode("utf-8")).digest()[:8], "little")
    return int(label) & MASK64


def derive_seed(seed: int, *labels: Union[int, str]) -> int:
    """
    Derive an independent 63-bit seed from a base seed and a sequence of labels.

    Labels may be integers (sample index, iteration, ensemble member) or short strings naming a purpose
    (``"init"``, ``"noise"``). The result fits ``torch.Generator.manual_seed``.

    :param seed: Base seed.
    :param labels: Labels identifying the derived stream.
    :return: Derived seed in ``[0, 2**63)``.
    """
    state = _mix_int(int(seed))
    for label in labels:
        state = _mix_int(state ^ _label_to_int(label))
    return state >> 1


def uniform_stream(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """
    Draw ``count`` uniforms in ``[0, 1)`` from the counter-based stream ``seed``.

    :param seed: Stream key.
    :param count: Number of values.
    :param offset: Index of the first counter.
    :return: ``float64`` array of shape ``(count,)``.
    """
    counters = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    words = splitmix64(np.uint64(seed & MASK64) + counters * _GAMMA)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


class UniformStream:
    """
    Sequential reader over :func:`uniform_stream`, convenient when drawing a variable number of parameters.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.position = 0

    def next(self, low: float = 0.0, high: float = 1.0) -> float:
        u = float(uniform_stream(self.seed, 1, self.position)[0])
        self.position += 1
        return low + (high - low) * u

    def integer(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return min(int(self.next() * n), n - 1)
