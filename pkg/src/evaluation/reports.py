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
# Report rendering for a run directory: CSV logs and sweeps as plain-text tables, predictions as PGM strips of
# (input, coarse, refined, gt).
#
#     RUN_DIR/
#     ├── config.txt
#     ├── checkpoints/
#     ├── logs/            # *.csv loss logs
#     ├── preds/           # <stem>_image.pfm, <stem>_coarse.pfm, <stem>_refined.pfm, <stem>_gt.pfm
#     └── reports/         # *.csv results; rendered *.txt tables and *_strip.pgm images
#

import glob
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from depth_io.pfm import read_pfm, write_pgm
from depth_io.rasters import DepthMap, ImageMap
from utils.config import read_config_csv
from utils.exceptions import ArtifactIOError

RUN_SUBDIRS = ("checkpoints", "logs", "preds", "reports")
STRIP_PANELS = ("image", "coarse", "refined", "gt")
STRIP_GAP = 2

# Result columns summarized per axis value
METRIC_COLUMNS = ("absrel", "delta1", "coarse_absrel", "coarse_delta1", "runtime_s")


def run_layout(run_dir: str) -> Dict[str, str]:
    """Paths of the fixed run-directory layout (nothing is created)."""
    layout = {name: os.path.join(run_dir, name) for name in RUN_SUBDIRS}
    layout["config"] = os.path.join(run_dir, "config.txt")
    return layout


def depth_to_gray(d: DepthMap) -> np.ndarray:
    """8-bit rendering of a depth map, min-max scaled over valid pixels (near is bright); invalid pixels are 0."""
    gray = np.zeros(d.shape, dtype=np.uint8)
    valid = d.valid_values().astype(np.float64)
    if valid.size == 0:
        return gray
    lo, hi = valid.min(), valid.max()
    span = hi - lo if hi > lo else 1.0
    scaled = 1.0 - (d.values.astype(np.float64) - lo) / span
    gray[d.validity] = np.round(255.0 * np.clip(scaled[d.validity], 0.0, 1.0)).astype(np.uint8)
    return gray


def image_to_gray(x: ImageMap) -> np.ndarray:
    return np.round(255.0 * x.luminance()).astype(np.uint8)


def save_depth_pgm(d: DepthMap, path: str) -> None:
    write_pgm(path, depth_to_gray(d))


def render_strip(panels: Sequence[Optional[np.ndarray]], gap: int = STRIP_GAP) -> np.ndarray:
    """
    Concatenate 8-bit panels horizontally with white gaps; missing panels are left black.

    :raises ValueError: If no panel is given or heights differ.
    """
    present = [p for p in panels if p is not None]
    if not present:
        raise ValueError("A strip needs at least one panel")
    height, width = present[0].shape
    columns: List[np.ndarray] = []
    for k, panel in enumerate(panels):
        if k:
            columns.append(np.full((height, gap), 255, dtype=np.uint8))
        if panel is None:
            panel = np.zeros((height, width), dtype=np.uint8)
        if panel.shape != (height, width):
            raise ValueError(f"Panel {k} has shape {panel.shape}, expected {(height, width)}")
        columns.append(panel)
    return np.hstack(columns)


def list_result_files(run_dir: str, pattern: str = "*.csv") -> List[str]:
    """CSV files under ``logs/`` and ``reports/`` of a run directory, sorted."""
    files: List[str] = []
    for sub in ("logs", "reports"):
        files.extend(glob.glob(os.path.join(run_dir, sub, pattern)))
    return sorted(files)


def group_predictions(preds_dir: str) -> Dict[str, Dict[str, str]]:
    """
    Group prediction files by stem: ``{stem: {panel: path}}`` for files named ``<stem>_<panel>.pfm``.
    """
    groups: Dict[str, Dict[str, str]] = {}
    for path in sorted(glob.glob(os.path.join(preds_dir, "*.pfm"))):
        name = os.path.basename(path)[: -len(".pfm")]
        stem, _, panel = name.rpartition("_")
        if stem and panel in STRIP_PANELS:
            groups.setdefault(stem, {})[panel] = path
    return groups


def summarize_results(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and standard deviation of every metric column per axis value; frames without ``axis_value`` (loss logs)
    are returned as is.
    """
    if "axis_value" not in frame.columns:
        return frame
    columns = [c for c in METRIC_COLUMNS if c in frame.columns]
    summary = frame.groupby("axis_value", sort=False)[columns].agg(["mean", "std"])
    summary.columns = [f"{name}_{stat}" for name, stat in summary.columns]
    summary.insert(0, "n", frame.groupby("axis_value", sort=False).size())
    return summary.reset_index()


def render_table(csv_path: str) -> str:
    """Plain-text table of a result or log CSV."""
    frame = summarize_results(read_config_csv(csv_path))
    return frame.to_string(index=False, float_format=lambda v: f"{v:.6g}")


def render_strip_for(group: Dict[str, str]) -> np.ndarray:
    panels: List[Optional[np.ndarray]] = []
    for panel in STRIP_PANELS:
        if panel not in group:
            panels.append(None)
        elif panel == "image":
            image = read_pfm(group[panel], as_image=True)
            panels.append(image_to_gray(image))  # type: ignore[arg-type]
        else:
            panels.append(depth_to_gray(read_pfm(group[panel])))  # type: ignore[arg-type]
    return render_strip(panels)


def render_run_report(run_dir: str, verbose: bool = False) -> List[str]:
    """
    Render every CSV of a run as a ``.txt`` table and every prediction group as a ``_strip.pgm`` under ``reports/``.

    :param run_dir: Run directory.
    :param verbose: Print each written file.
    :return: Paths of the written files.
    :raises ArtifactIOError: If the run directory holds nothing to report.
    """
    layout = run_layout(run_dir)
    csv_files = list_result_files(run_dir)
    groups = group_predictions(layout["preds"])
    if not csv_files and not groups:
        raise ArtifactIOError(f"Nothing to report in {run_dir}: no CSV results and no predictions")

    written: List[str] = []
    try:
        os.makedirs(layout["reports"], exist_ok=True)
        for csv_path in csv_files:
            sub = os.path.basename(os.path.dirname(csv_path))
            name = os.path.splitext(os.path.basename(csv_path))[0]
            out = os.path.join(layout["reports"], f"{sub}_{name}.txt" if sub == "logs" else f"{name}.txt")
            with open(out, "w", encoding="utf-8", newline="\n") as f:
                f.write(render_table(csv_path) + "\n")
            written.append(out)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write report in {layout['reports']}: {e}") from e

    for stem, group in groups.items():
        out = os.path.join(layout["reports"], f"{stem}_strip.pgm")
        write_pgm(out, render_strip_for(group), comments=[f"panels={','.join(STRIP_PANELS)}"])
        written.append(out)

    if verbose:
        for path in written:
            print(f"📄 {path}")
    return written
