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
# Evaluation harnesses: split evaluation with the coarse baseline alongside, the ablation table, hyperparameter and
# data sweeps, and error bars over repeated single refinements.
#
# Sweep axes:
#
#     patch_size, threshold        train one refiner per value, then evaluate
#     train_size, train_iters      train one refiner per training-set size / iteration budget, then evaluate
#     variant                      train every listed ablation variant, then run the ablation
#     ensemble, ddim_steps         evaluate one trained refiner per value
#

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from coarse_models.models import CoarseModel, degrade_oracle_from_config, predict_coarse
from depth_io.rasters import normalize_depth
from diffusion.denoiser import VARIANTS, RefinerCheckpoint
from diffusion.training import train_refiner
from simulation.splits import Manifest
from utils.checkpoints import find_checkpoint_by_config
from utils.config import RunConfig, write_config_csv
from utils.exceptions import ConfigError, MissingCheckpoint
from utils.seeding import derive_seed

from .ensemble import ensemble_refine
from .metrics import MetricReport, compute_metrics
from .reports import save_depth_pgm

TRAINING_AXES = ("patch_size", "threshold", "train_size", "train_iters")
EVALUATION_AXES = ("ensemble", "ddim_steps")
SWEEP_AXES = TRAINING_AXES + EVALUATION_AXES + ("variant",)

# Settings that do not change what a refiner learns; a stored refiner is reused whatever their values
RUNTIME_KEYS = ("workers", "record_timing", "log_every", "ddim_steps", "ensemble_size")

RESULT_COLUMNS = ["axis_value", "sample", "repeat", "absrel", "delta1", "runtime_s", "coarse_absrel", "coarse_delta1"]


@dataclass(frozen=True)
class SweepRecord:
    """Metrics of one refinement: one sample, one repeat, at one axis value."""

    axis_value: Any
    sample: int
    repeat: int
    report: MetricReport
    runtime_s: float
    coarse: Optional[MetricReport] = None


@dataclass
class SweepResult:
    """
    Records of a sweep, ablation or error-bar run, in axis order.

    ``values`` lists the axis values; numeric axes are strictly increasing.
    """

    axis: str
    values: List[Any]
    records: List[SweepRecord] = field(default_factory=list)

    def reports_for(self, value: Any) -> List[MetricReport]:
        return [r.report for r in self.records if r.axis_value == value]

    def to_frame(self) -> pd.DataFrame:
        """One row per record, with the coarse baseline metrics when they were computed."""
        rows = [
            {
                "axis_value": r.axis_value,
                "sample": r.sample,
                "repeat": r.repeat,
                "absrel": r.report.absrel,
                "delta1": r.report.delta1,
                "runtime_s": r.runtime_s,
                "coarse_absrel": r.coarse.absrel if r.coarse else np.nan,
                "coarse_delta1": r.coarse.delta1 if r.coarse else np.nan,
            }
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def mean(self, metric: str = "absrel") -> Dict[Any, float]:
        """Mean of ``metric`` per axis value."""
        frame = self.to_frame()
        return {v: float(frame.loc[frame["axis_value"] == v, metric].mean()) for v in self.values}

    def std(self, metric: str = "absrel") -> Dict[Any, float]:
        """Sample standard deviation of ``metric`` per axis value (0 for a single record)."""
        frame = self.to_frame()
        out = {}
        for v in self.values:
            column = frame.loc[frame["axis_value"] == v, metric]
            out[v] = float(column.std(ddof=1)) if len(column) > 1 else 0.0
        return out

    def summary(self) -> pd.DataFrame:
        """Per-value mean and standard deviation of AbsRel and δ1."""
        absrel_mean, absrel_std = self.mean("absrel"), self.std("absrel")
        delta1_mean, delta1_std = self.mean("delta1"), self.std("delta1")
        return pd.DataFrame(
            {
                "axis_value": self.values,
                "absrel_mean": [absrel_mean[v] for v in self.values],
                "absrel_std": [absrel_std[v] for v in self.values],
                "delta1_mean": [delta1_mean[v] for v in self.values],
                "delta1_std": [delta1_std[v] for v in self.values],
            }
        )

    def write_csv(self, path: str, config: RunConfig) -> None:
        write_config_csv(path, self.to_frame(), config)


def sample_seed(seed: int, index: int) -> int:
    return derive_seed(seed, "sample", index)


def evaluate_split(
    checkpoint: RefinerCheckpoint,
    coarse_model: CoarseModel,
    test_manifest: Manifest,
    config: RunConfig,
    *,
    axis_value: Any = None,
    n_members: Optional[int] = None,
    steps: Optional[int] = None,
    repeats: int = 1,
    dump_dir: Optional[str] = None,
    verbose: bool = False,
) -> List[SweepRecord]:
    """
    Refine and score every sample of a split, with the coarse prediction scored alongside.

    The coarse model sees the normalized label, as in training. Each sample uses the seed
    ``derive_seed(config.seed, "sample", index)``; repeat ``r > 0`` derives its own seed from it. Samples are
    processed by ``config.workers`` threads; results do not depend on the worker count.

    :param checkpoint: Trained refiner.
    :param coarse_model: Coarse model plugged in at inference (need not be the training one).
    :param test_manifest: Test split.
    :param config: Run configuration (seed, ensemble size, DDIM steps, workers, timing).
    :param axis_value: Value stored in every record.
    :param n_members: Ensemble size (defaults to ``config.ensemble_size``).
    :param steps: DDIM steps (defaults to ``config.ddim_steps``).
    :param repeats: Independent refinements per sample.
    :param dump_dir: If given, the first sample's refined map is written there as PGM.
    :param verbose: Show a progress bar.
    """
    n_members = config.ensemble_size if n_members is None else n_members
    steps = config.ddim_steps if steps is None else steps

    def evaluate_sample(index: int) -> List[SweepRecord]:
        image, depth = test_manifest.load_sample(index)
        label, _ = normalize_depth(depth, config.lo_pct, config.hi_pct)
        coarse = predict_coarse(coarse_model, image, gt=label)
        coarse_report = compute_metrics(coarse, depth)
        base_seed = sample_seed(config.seed, index)
        records = []
        for r in range(repeats):
            seed = base_seed if r == 0 else derive_seed(base_seed, "repeat", r)
            start = time.perf_counter()
            refined = ensemble_refine(
                checkpoint, coarse_model, image, n_members, seed, gt=label, steps=steps, coarse=coarse
            )
            runtime = time.perf_counter() - start if config.record_timing else 0.0
            if dump_dir is not None and index == 0 and r == 0:
                os.makedirs(dump_dir, exist_ok=True)
                save_depth_pgm(refined, os.path.join(dump_dir, f"refined_{axis_value}.pgm"))
            records.append(SweepRecord(axis_value, index, r, compute_metrics(refined, depth), runtime, coarse_report))
        return records

    n = len(test_manifest)
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as executor:
        results = executor.map(evaluate_sample, range(n))
        per_sample = list(tqdm(results, total=n, desc="Evaluating", disable=not verbose))
    return [record for records in per_sample for record in records]


def _check_values(axis: str, values: Sequence[Any]) -> None:
    if not values:
        raise ConfigError(f"Sweep over {axis} needs at least one value")
    if axis == "variant":
        for v in values:
            if v not in VARIANTS:
                raise ConfigError(f"Unknown variant {v!r}; expected one of {sorted(VARIANTS)}")
        return
    numeric = np.asarray(values, dtype=np.float64)
    if np.any(np.diff(numeric) <= 0):
        raise ConfigError(f"Values of numeric axis {axis} must be strictly increasing, got {list(values)}")


def _axis_config(axis: str, value: Any, config: RunConfig) -> RunConfig:
    """Run configuration for one sweep point; validation rejects e.g. patch sizes that do not divide the raster."""
    if axis == "patch_size":
        return config.replace(patch_size=int(value))
    if axis == "threshold":
        return config.replace(threshold=float(value))
    if axis == "train_iters":
        return config.replace(iterations=int(value))
    if axis == "ddim_steps":
        return config.replace(ddim_steps=int(value))
    if axis == "ensemble":
        return config.replace(ensemble_size=int(value))
    if axis == "variant":
        return config.replace(variant=str(value))
    return config


def run_ablation(
    variants: Union[Sequence[Union[str, RefinerCheckpoint]], Mapping[str, Union[str, RefinerCheckpoint]]],
    test_manifest: Manifest,
    config: RunConfig,
    coarse_model: Optional[CoarseModel] = None,
    out_csv: Optional[str] = None,
    verbose: bool = False,
) -> SweepResult:
    """
    Evaluate trained ablation variants on one test split.

    :param variants: Checkpoint paths or loaded checkpoints, as a list (labelled by their stored variant) or a
        mapping from label to checkpoint.
    :param test_manifest: Test split.
    :param config: Run configuration for inference.
    :param coarse_model: Coarse model at inference (defaults to the degradation oracle of ``config``).
    :param out_csv: If given, the records are written there.
    :param verbose: Print progress.
    :return: One axis value per variant, in the given order.
    :raises MissingCheckpoint: If a checkpoint file does not exist (checked before any evaluation).
    """
    items = list(variants.items()) if isinstance(variants, Mapping) else [(None, v) for v in variants]
    for _, item in items:
        if isinstance(item, str) and not os.path.exists(item):
            raise MissingCheckpoint(f"Checkpoint file not found: {item}")
    coarse_model = coarse_model or degrade_oracle_from_config(config)

    labels: List[str] = []
    records: List[SweepRecord] = []
    for label, item in items:
        checkpoint = RefinerCheckpoint.load(item) if isinstance(item, str) else item
        label = label or checkpoint.variant
        if verbose:
            print(f"🔬 Evaluating variant {label}")
        labels.append(label)
        records.extend(
            evaluate_split(checkpoint, coarse_model, test_manifest, config, axis_value=label, verbose=verbose)
        )
    result = SweepResult(axis="variant", values=labels, records=records)
    if out_csv is not None:
        result.write_csv(out_csv, config)
    return result


def run_sweep(
    axis: str,
    values: Sequence[Any],
    config: RunConfig,
    test_manifest: Manifest,
    train_manifest: Optional[Manifest] = None,
    checkpoint: Optional[RefinerCheckpoint] = None,
    coarse_model: Optional[CoarseModel] = None,
    out_csv: Optional[str] = None,
    checkpoint_dir: Optional[str] = None,
    dump_dir: Optional[str] = None,
    verbose: bool = False,
) -> SweepResult:
    """
    Sweep one hyperparameter: train per value for training axes, evaluate a fixed refiner for inference axes.

    :param axis: One of ``patch_size``, ``threshold``, ``ensemble``, ``ddim_steps``, ``variant``, ``train_size``,
        ``train_iters``.
    :param values: Axis values; numeric axes must be strictly increasing.
    :param config: Base run configuration.
    :param test_manifest: Evaluation split.
    :param train_manifest: Training split (training axes).
    :param checkpoint: Trained refiner (inference axes).
    :param coarse_model: Coarse model for training and evaluation (defaults to the degradation oracle).
    :param out_csv: If given, the records are written there.
    :param checkpoint_dir: If given, refiners trained by the sweep are saved there, and a refiner already stored
        there under the same name and training configuration is loaded instead of retrained.
    :param dump_dir: If given, one refined map per sweep point is written there as PGM.
    :param verbose: Print progress.
    :raises ConfigError: On an unknown axis, empty or unordered values, a value that yields an invalid
        configuration, or a missing training split or checkpoint.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"Unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(values)
    _check_values(axis, values)
    point_configs = [_axis_config(axis, v, config) for v in values]
    if axis == "train_size" and any(int(v) < 1 for v in values):
        raise ConfigError("Training-set sizes must be >= 1")
    if axis in TRAINING_AXES + ("variant",) and train_manifest is None:
        raise ConfigError(f"Sweep over {axis} trains refiners and needs a training split")
    if axis in EVALUATION_AXES and checkpoint is None:
        raise ConfigError(f"Sweep over {axis} needs a trained refiner")
    coarse_model = coarse_model or degrade_oracle_from_config(config)

    def trained(value: Any, point_config: RunConfig) -> RefinerCheckpoint:
        assert train_manifest is not None
        manifest = train_manifest.subset(int(value)) if axis == "train_size" else train_manifest
        name = f"refiner_{axis}_{value}.h5"
        path = os.path.join(checkpoint_dir, name) if checkpoint_dir else None
        if checkpoint_dir:
            target = {k: v for k, v in point_config.to_dict().items() if k not in RUNTIME_KEYS}
            existing = find_checkpoint_by_config(target, checkpoint_dir, pattern_prefix=name)
            if existing is not None:
                if verbose:
                    print(f"♻️  {axis}={value}: reusing {existing}")
                return RefinerCheckpoint.load(existing)
        if verbose:
            print(f"🧪 {axis}={value}: training on {len(manifest)} samples")
        return train_refiner(manifest, coarse_model, point_config, checkpoint_path=path, verbose=verbose)

    if axis == "variant":
        trained_variants = {str(v): trained(v, c) for v, c in zip(values, point_configs)}
        return run_ablation(trained_variants, test_manifest, config, coarse_model, out_csv=out_csv, verbose=verbose)

    records: List[SweepRecord] = []
    for value, point_config in zip(values, point_configs):
        model = trained(value, point_config) if axis in TRAINING_AXES else checkpoint
        assert model is not None
        if verbose:
            print(f"📏 {axis}={value}: evaluating {len(test_manifest)} samples")
        records.extend(
            evaluate_split(
                model,
                coarse_model,
                test_manifest,
                point_config,
                axis_value=value,
                dump_dir=dump_dir,
                verbose=verbose,
            )
        )
    result = SweepResult(axis=axis, values=values, records=records)
    if out_csv is not None:
        result.write_csv(out_csv, config)
    return result


def error_bars(
    checkpoint: RefinerCheckpoint,
    coarse_model: CoarseModel,
    test_manifest: Manifest,
    n_repeats: int,
    seed: int,
    config: Optional[RunConfig] = None,
    out_csv: Optional[str] = None,
    verbose: bool = False,
) -> SweepResult:
    """
    Spread of single refinements: every input is refined ``n_repeats`` times from independent noise without
    ensembling. Axis values are the sample indices; :meth:`SweepResult.mean` and :meth:`SweepResult.std` give the
    per-input statistics across repeats.

    :raises ConfigError: If ``n_repeats < 2``.
    """
    if n_repeats < 2:
        raise ConfigError(f"Error bars need n_repeats >= 2, got {n_repeats}")
    config = (config or RunConfig()).replace(seed=seed)
    records = evaluate_split(
        checkpoint, coarse_model, test_manifest, config, n_members=1, repeats=n_repeats, verbose=verbose
    )
    records = [SweepRecord(r.sample, r.sample, r.repeat, r.report, r.runtime_s, r.coarse) for r in records]
    result = SweepResult(axis="sample", values=list(range(len(test_manifest))), records=records)
    if out_csv is not None:
        result.write_csv(out_csv, config)
    return result


def pooled_error_bars(result: SweepResult) -> Dict[str, float]:
    """Mean over inputs of the per-input mean and standard deviation of AbsRel and δ1."""
    return {
        "absrel_mean": float(np.mean(list(result.mean("absrel").values()))),
        "absrel_std": float(np.mean(list(result.std("absrel").values()))),
        "delta1_mean": float(np.mean(list(result.mean("delta1").values()))),
        "delta1_std": float(np.mean(list(result.std("delta1").values()))),
    }
