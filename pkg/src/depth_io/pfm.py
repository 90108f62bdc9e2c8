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
# Portable Float Map (PFM) rasters with a PGM (P5) validity sidecar.
#
# PFM layout: identifier line ("Pf" grayscale, "PF" color), "<width> <height>" line, scale line whose sign encodes
# the byte order (negative = little-endian), then float32 samples with rows stored bottom-to-top.
# Validity of a depth map lives next to it in "<stem>.valid.pgm" (maxval 255, 0 = invalid, 255 = valid); its comment
# line records the unit tag.
#

import os
from typing import BinaryIO, List, Optional, Tuple, Union

import numpy as np

from utils.exceptions import ArtifactIOError, FormatError

from .rasters import DepthMap, DepthUnits, ImageMap

VALIDITY_SUFFIX = ".valid.pgm"


def validity_path(path: str) -> str:
    """Sidecar path of a depth PFM: ``depth.pfm`` -> ``depth.valid.pgm``."""
    root, ext = os.path.splitext(path)
    return (root if ext.lower() == ".pfm" else path) + VALIDITY_SUFFIX


def _read_line(f: BinaryIO) -> str:
    buff = b""
    while True:
        c = f.read(1)
        if not c:
            raise FormatError("Unexpected end of file in header")
        if c == b"\n":
            try:
                return buff.decode("ascii").strip()
            except UnicodeDecodeError:
                raise FormatError("Non-ASCII bytes in header")
        buff += c
        if len(buff) > 256:
            raise FormatError("Header line too long")


def _parse_dimensions(line: str) -> Tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise FormatError(f"Could not recognize dimensions line [{line}]")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(f"Could not recognize dimensions line [{line}]")
    if width < 1 or height < 1:
        raise FormatError(f"Invalid raster dimensions {width}x{height}")
    return width, height


def read_pfm_array(path: str) -> np.ndarray:
    """
    Read a PFM file into a float32 array of shape ``(height, width)`` or ``(height, width, 3)``, top row first.

    :raises FormatError: On a malformed header or a truncated payload.
    :raises ArtifactIOError: If the file cannot be opened.
    """
    try:
        with open(path, "rb") as f:
            identifier = _read_line(f)
            if identifier == "PF":
                channels = 3
            elif identifier == "Pf":
                channels = 1
            else:
                raise FormatError(f"Unrecognized identifier line [{identifier}]")
            width, height = _parse_dimensions(_read_line(f))
            try:
                scale = float(_read_line(f))
            except ValueError:
                raise FormatError("Could not parse the scale line")
            if scale == 0.0:
                raise FormatError("Scale line must be non-zero")
            payload = f.read()
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {path}: {e}") from e

    expected = width * height * channels * 4
    if len(payload) != expected:
        raise FormatError(f"Expected {expected} payload bytes, found {len(payload)}")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (height, width, channels) if channels == 3 else (height, width)
    return np.ascontiguousarray(np.flipud(data.reshape(shape)))


def write_pfm_array(path: str, data: np.ndarray) -> None:
    """
    Write a float32 array of shape ``(height, width)`` or ``(height, width, 3)`` as little-endian PFM.

    :raises ArtifactIOError: If the file cannot be written.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 2:
        identifier = "Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        identifier = "PF"
    else:
        raise FormatError(f"PFM stores 1 or 3 channels, got shape {data.shape}")
    height, width = data.shape[:2]
    header = f"{identifier}\n{width} {height}\n-1.0\n".encode("ascii")
    payload = np.ascontiguousarray(np.flipud(data), dtype="<f4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e


def write_pgm(path: str, data: np.ndarray, comments: Optional[List[str]] = None) -> None:
    """
    Write an 8-bit grayscale PGM (P5, maxval 255).

    :param data: ``uint8``-convertible ``(height, width)`` array.
    :param comments: Header comment lines (without the leading ``#``).
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise FormatError(f"PGM stores 2D rasters, got shape {data.shape}")
    height, width = data.shape
    lines = ["P5"] + [f"# {c}" for c in (comments or [])] + [f"{width} {height}", "255"]
    try:
        with open(path, "wb") as f:
            f.write(("\n".join(lines) + "\n").encode("ascii"))
            f.write(np.ascontiguousarray(data, dtype=np.uint8).tobytes())
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e


def read_pgm(path: str) -> Tuple[np.ndarray, List[str]]:
    """
    Read an 8-bit P5 PGM.

    :return: ``(uint8 array of shape (height, width), header comment lines)``.
    :raises FormatError: On a malformed header or truncated payload.
    """
    comments: List[str] = []
    try:
        with open(path, "rb") as f:
            tokens: List[str] = []
            while len(tokens) < 4:
                line = _read_line(f)
                if line.startswith("#"):
                    comments.append(line[1:].strip())
                    continue
                tokens.extend(line.split())
            payload = f.read()
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {path}: {e}") from e

    if tokens[0] != "P5" or len(tokens) != 4:
        raise FormatError(f"Not a binary PGM: {path}")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError(f"Malformed PGM header in {path}")
    if maxval != 255:
        raise FormatError(f"Only maxval 255 is supported, got {maxval}")
    if len(payload) != width * height:
        raise FormatError(f"Expected {width * height} PGM bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy(), comments


def write_pfm(path: str, raster: Union[DepthMap, ImageMap]) -> None:
    """
    Write a depth map (plus its validity sidecar) or an image as PFM. Float32 values round-trip bit-exactly.

    :param path: Destination ``.pfm`` path.
    :param raster: Raster to store.
    """
    if isinstance(raster, DepthMap):
        write_pfm_array(path, raster.values)
        mask = np.where(raster.validity, 255, 0).astype(np.uint8)
        write_pgm(validity_path(path), mask, comments=[f"units={raster.units.value}"])
    else:
        values = raster.values if raster.channels == 3 else raster.values[:, :, 0]
        write_pfm_array(path, values)


def read_pfm(path: str, as_image: bool = False) -> Union[DepthMap, ImageMap]:
    """
    Read a PFM written by :func:`write_pfm`.

    Color files always give an :class:`ImageMap`. Grayscale files give a :class:`DepthMap` (all pixels valid and
    metric when no sidecar exists) unless ``as_image`` is set.

    :raises FormatError: On malformed headers or payloads.
    """
    data = read_pfm_array(path)
    if data.ndim == 3 or as_image:
        return ImageMap(values=data)

    sidecar = validity_path(path)
    if not os.path.exists(sidecar):
        return DepthMap.dense(data)
    mask, comments = read_pgm(sidecar)
    if mask.shape != data.shape:
        raise FormatError(f"Validity sidecar shape {mask.shape} does not match raster shape {data.shape}")
    units = DepthUnits.METRIC
    for comment in comments:
        if comment.startswith("units="):
            try:
                units = DepthUnits(comment.split("=", 1)[1])
            except ValueError:
                raise FormatError(f"Unknown unit tag in {sidecar}: {comment}")
    return DepthMap(values=data, validity=mask > 0, units=units)
