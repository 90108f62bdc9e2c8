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

"""
Affine-invariant evaluation of refined depth.

This module provides the AbsRel and δ1 metrics, test-time ensembling, the ablation, sweep and error-bar harnesses,
and the rendering of run directories into text tables and image strips.
"""

from . import ensemble, experiments, metrics, reports
from .ensemble import aggregate_ensemble, ensemble_refine
from .experiments import SweepRecord, SweepResult, error_bars, evaluate_split, run_ablation, run_sweep
from .metrics import MetricReport, compute_metrics
from .reports import render_run_report, render_table

__all__ = [
    "ensemble",
    "experiments",
    "metrics",
    "reports",
    "aggregate_ensemble",
    "ensemble_refine",
    "SweepRecord",
    "SweepResult",
    "error_bars",
    "evaluate_split",
    "run_ablation",
    "run_sweep",
    "MetricReport",
    "compute_metrics",
    "render_run_report",
    "render_table",
]
