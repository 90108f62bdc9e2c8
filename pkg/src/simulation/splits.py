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
# Writes rendered scenes to disk as PFM pairs plus a manifest, and reads splits back for training and evaluation.
#
# Layout of a split directory:
#
#     out_dir/
#     ├── manifest.txt            # "# spec: ..." header, then "image.pfm<TAB>depth.pfm" per sample
#     ├── 00000_image.pfm
#     ├── 00000_depth.pfm
#     ├── 00000_depth.valid.pgm
#     └── ...
#

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Tuple

from tqdm import tqdm

from depth_io.pfm import read_pfm, write_pfm
from depth_io.rasters import DepthMap, ImageMap
from utils.exceptions import ArtifactIOError, ConfigError, FormatError

from .scenes import SceneSample, SceneSpec, generate_sample

MANIFEST_NAME = "manifest.txt"
SPEC_HEADER = "# spec: "


@dataclass
class Manifest:
    """
    A split on disk: the scene spec that generated it and the relative (image, depth) paths of each sample.
    """

    root: str
    spec: SceneSpec
    entries: List[Tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def path(self) -> str:
        return os.path.join(self.root, MANIFEST_NAME)

    def load_sample(self, index: int) -> Tuple[ImageMap, DepthMap]:
        """
        Read the ``index``-th (image, depth) pair.

        :raises FormatError: If a file is malformed or of the wrong kind.
        """
        image_rel, depth_rel = self.entries[index]
        image = read_pfm(os.path.join(self.root, image_rel), as_image=True)
        depth = read_pfm(os.path.join(self.root, depth_rel))
        if not isinstance(image, ImageMap) or not isinstance(depth, DepthMap):
            raise FormatError(f"Sample {index} of {self.path} does not hold an (image, depth) pair")
        return image, depth

    def samples(self) -> Iterator[Tuple[ImageMap, DepthMap]]:
        for index in range(len(self)):
            yield self.load_sample(index)

    def subset(self, count: int) -> "Manifest":
        """The first ``count`` samples of the split."""
        if count < 1:
            raise ConfigError(f"Subset size must be >= 1, got {count}")
        return Manifest(root=self.root, spec=self.spec, entries=self.entries[:count])


def sample_names(index: int) -> Tuple[str, str]:
    """File names of sample ``index``."""
    return f"{index:05d}_image.pfm", f"{index:05d}_depth.pfm"


def _write_sample(sample: SceneSample, out_dir: str) -> Tuple[str, str]:
    image_name, depth_name = sample_names(sample.index)
    write_pfm(os.path.join(out_dir, image_name), sample.image)
    write_pfm(os.path.join(out_dir, depth_name), sample.depth)
    return image_name, depth_name


def _clear_split(out_dir: str) -> None:
    for name in os.listdir(out_dir):
        if name == MANIFEST_NAME or name.endswith((".pfm", ".pgm")):
            os.remove(os.path.join(out_dir, name))


def write_manifest(manifest: Manifest) -> None:
    lines = [SPEC_HEADER + manifest.spec.describe()]
    lines += [f"{image}\t{depth}" for image, depth in manifest.entries]
    try:
        with open(manifest.path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ArtifactIOError(f"Cannot write manifest {manifest.path}: {e}") from e


def generate_split(
    spec: SceneSpec,
    count: int,
    out_dir: str,
    force: bool = False,
    workers: int = 1,
    verbose: bool = False,
) -> Manifest:
    """
    Render samples ``0..count-1`` of ``spec`` into ``out_dir`` and write the manifest.

    Samples may be rendered by several threads; each one depends only on ``(spec, index)``, so the files are the same
    for any worker count.

    :param spec: Scene family.
    :param count: Number of samples, ``>= 1``.
    :param out_dir: Destination directory; created if missing.
    :param force: Overwrite an existing non-empty directory.
    :param workers: Number of rendering threads.
    :param verbose: Print progress.
    :return: The manifest of the written split.
    :raises ConfigError: If ``count < 1``.
    :raises ArtifactIOError: If ``out_dir`` is non-empty without ``force``, or on filesystem failure.
    """
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    try:
        if os.path.isdir(out_dir) and os.listdir(out_dir):
            if not force:
                raise ArtifactIOError(f"Output directory {out_dir} is not empty (use force to overwrite)")
            _clear_split(out_dir)
        os.makedirs(out_dir, exist_ok=True)
    except ArtifactIOError:
        raise
    except OSError as e:
        raise ArtifactIOError(f"Cannot prepare {out_dir}: {e}") from e

    if verbose:
        print(f"🎨 Rendering {count} scenes into {out_dir} ({spec.height}x{spec.width}, seed {spec.seed})")

    def render_and_write(index: int) -> Tuple[str, str]:
        return _write_sample(generate_sample(spec, index), out_dir)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        entries = list(tqdm(executor.map(render_and_write, range(count)), total=count, disable=not verbose))

    manifest = Manifest(root=out_dir, spec=spec, entries=entries)
    write_manifest(manifest)
    if verbose:
        print(f"✅ Wrote {manifest.path}")
    return manifest


def load_manifest(path: str) -> Manifest:
    """
    Read a manifest file, or the manifest inside a split directory.

    :raises ArtifactIOError: If the file cannot be read.
    :raises FormatError: If the header or an entry line is malformed.
    """
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ArtifactIOError(f"Cannot read manifest {path}: {e}") from e

    if not lines or not lines[0].startswith(SPEC_HEADER):
        raise FormatError(f"{path}: missing '{SPEC_HEADER.strip()}' header")
    spec = SceneSpec.parse(lines[0][len(SPEC_HEADER) :])
    entries = []
    for number, line in enumerate(lines[1:], 2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{number}: expected 'image<TAB>depth', got {line!r}")
        entries.append((parts[0], parts[1]))
    return Manifest(root=os.path.dirname(os.path.abspath(path)), spec=spec, entries=entries)
