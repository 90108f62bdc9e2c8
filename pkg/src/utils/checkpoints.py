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
# HDF5 checkpoint container shared by the coarse regressor and the diffusion refiner.
#
# Layout:
#
#     CHECKPOINT.h5
#     ├── parameters/
#     │   └── <name>            # float32 blob per named parameter (torch state_dict key)
#     └── metadata/  (attributes)
#         ├── magic             # "DEPTHLAB-CKPT"
#         ├── format_version    # "1.0"
#         ├── kind              # "tiny_regressor" | "refiner"
#         ├── config            # JSON echo of the RunConfig and model configuration
#         ├── run               # JSON training-run metadata (seed, iterations, losses, ...)
#         └── <name>_checksum   # md5 of each parameter blob
#

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import h5py
import numpy as np

from .exceptions import ArtifactIOError, FormatError, MissingCheckpoint

CHECKPOINT_MAGIC = "DEPTHLAB-CKPT"
FORMAT_VERSION = "1.0"


@dataclass
class Checkpoint:
    """Decoded content of a checkpoint file."""

    kind: str
    parameters: Dict[str, np.ndarray]
    config: Dict[str, Any]
    run: Dict[str, Any]


def _checksum(blob: np.ndarray) -> str:
    return hashlib.md5(np.ascontiguousarray(blob).tobytes()).hexdigest()


def save_checkpoint(
    filepath: str,
    kind: str,
    parameters: Dict[str, np.ndarray],
    config: Dict[str, Any],
    run: Optional[Dict[str, Any]] = None,
    compression: str = "gzip",
) -> None:
    """
    Save named float32 parameter blobs with their configuration echo and run metadata.

    No timestamps are stored, so identical inputs give identical content.

    :param filepath: Destination ``.h5`` path.
    :param kind: Model family stored in the file.
    :param parameters: Mapping from parameter name to array; arrays are stored as float32.
    :param config: Full configuration that produced the parameters (JSON-serializable).
    :param run: Training-run metadata (JSON-serializable).
    :param compression: HDF5 compression filter for the parameter datasets.
    :raises ArtifactIOError: If the file cannot be written.
    """
    directory = os.path.dirname(filepath)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with h5py.File(filepath, "w") as f:
            param_group = f.create_group("parameters")
            metadata_group = f.create_group("metadata")

            for name in sorted(parameters):
                blob = np.ascontiguousarray(parameters[name], dtype=np.float32)
                param_group.create_dataset(name, data=blob, compression=compression, track_times=False)
                metadata_group.attrs[f"{name}_checksum"] = _checksum(blob)

            metadata_group.attrs["magic"] = CHECKPOINT_MAGIC
            metadata_group.attrs["format_version"] = FORMAT_VERSION
            metadata_group.attrs["kind"] = kind
            metadata_group.attrs["config"] = json.dumps(config, sort_keys=True)
            metadata_group.attrs["run"] = json.dumps(run or {}, sort_keys=True)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write checkpoint {filepath}: {e}") from e


def load_checkpoint(filepath: str, expected_kind: Optional[str] = None) -> Checkpoint:
    """
    Load a checkpoint written by :func:`save_checkpoint` and verify it.

    :param filepath: Path to the ``.h5`` file.
    :param expected_kind: If given, the stored kind must match.
    :return: Decoded checkpoint.
    :raises MissingCheckpoint: If the file does not exist.
    :raises FormatError: On a wrong magic, version, kind or a failed integrity check.
    """
    if not os.path.exists(filepath):
        raise MissingCheckpoint(f"Checkpoint file not found: {filepath}")

    try:
        with h5py.File(filepath, "r") as f:
            if "metadata" not in f or "parameters" not in f:
                raise FormatError(f"{filepath} is not a DepthLab checkpoint")
            attrs = dict(f["metadata"].attrs.items())
            parameters = {name: np.asarray(dataset[()], dtype=np.float32) for name, dataset in f["parameters"].items()}
    except OSError as e:
        raise FormatError(f"Cannot read checkpoint {filepath}: {e}") from e

    if attrs.get("magic") != CHECKPOINT_MAGIC:
        raise FormatError(f"{filepath}: bad magic {attrs.get('magic')!r}")
    if attrs.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{filepath}: unsupported format version {attrs.get('format_version')!r}")
    kind = str(attrs["kind"])
    if expected_kind is not None and kind != expected_kind:
        raise FormatError(f"{filepath}: expected a {expected_kind} checkpoint, found {kind}")

    for name, blob in parameters.items():
        stored = attrs.get(f"{name}_checksum")
        if stored is not None and _checksum(blob) != stored:
            raise FormatError(f"{filepath}: integrity check failed for parameter {name}")

    return Checkpoint(
        kind=kind, parameters=parameters, config=json.loads(attrs["config"]), run=json.loads(attrs["run"])
    )


def list_checkpoints(checkpoint_dir: str, pattern_prefix: str = "") -> List[str]:
    """
    List checkpoint files in a directory, sorted by name.

    :param checkpoint_dir: Directory to scan; a missing directory yields an empty list.
    :param pattern_prefix: Only names starting with this prefix are returned.
    """
    if not os.path.isdir(checkpoint_dir):
        return []
    return sorted(
        os.path.join(checkpoint_dir, name)
        for name in os.listdir(checkpoint_dir)
        if name.endswith(".h5") and name.startswith(pattern_prefix)
    )


def find_checkpoint_by_config(target: Dict[str, Any], checkpoint_dir: str, pattern_prefix: str = "") -> Optional[str]:
    """
    Find the first checkpoint whose stored run configuration matches every key in ``target``.

    :param target: Config keys and values to match.
    :param checkpoint_dir: Directory to search.
    :param pattern_prefix: Only file names starting with this prefix are considered.
    :return: Path of the matching checkpoint, or None.
    """
    for filepath in list_checkpoints(checkpoint_dir, pattern_prefix):
        try:
            stored = load_checkpoint(filepath).config
        except (FormatError, MissingCheckpoint):
            continue  # Skip files that can't be loaded
        run_config = stored.get("run_config", stored)
        if all(run_config.get(key) == value for key, value in target.items()):
            return filepath
    return None


def state_to_numpy(module: Any) -> Dict[str, np.ndarray]:
    """Float32 numpy copy of a torch module's ``state_dict``, ready for :func:`save_checkpoint`."""
    return {name: tensor.detach().cpu().numpy().astype(np.float32) for name, tensor in module.state_dict().items()}


def count_parameters(module: Any) -> int:
    return sum(p.numel() for p in module.parameters())
