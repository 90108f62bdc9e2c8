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
# Acceptance-scale runs on 64x64 synthetic scenes. They train several refiners for thousands of iterations and take
# hours of CPU; run them with ``pytest -m slow``.
#

import numpy as np
import pytest

from coarse_models.models import degrade_oracle_from_config, train_tiny_regressor
from diffusion.training import train_refiner
from evaluation.experiments import error_bars, evaluate_split, pooled_error_bars, run_ablation
from simulation.scenes import SceneSpec
from simulation.splits import generate_split
from utils.config import RunConfig

pytestmark = pytest.mark.slow

ABLATION_VARIANTS = ("no-cond", "no-align", "no-mask", "full")
N_TRAIN = 400
N_TEST = 16


@pytest.fixture(scope="module")
def config():
    return RunConfig(seed=0, size=64, iterations=2000, workers=4, record_timing=False)


@pytest.fixture(scope="module")
def splits(tmp_path_factory, config):
    root = tmp_path_factory.mktemp("acceptance")
    train = generate_split(SceneSpec(seed=1, height=64, width=64, n_primitives=4), N_TRAIN, str(root / "train"))
    test = generate_split(SceneSpec(seed=2, height=64, width=64, n_primitives=4), N_TEST, str(root / "test"))
    return train, test


@pytest.fixture(scope="module")
def refiners(splits, config):
    train, _ = splits
    oracle = degrade_oracle_from_config(config)
    return {v: train_refiner(train, oracle, config.replace(variant=v)) for v in ABLATION_VARIANTS}


@pytest.fixture(scope="module")
def ablation(refiners, splits, config):
    _, test = splits
    return run_ablation(refiners, test, config)


def test_conditioning_improves_over_the_unconditioned_variant(ablation):
    absrel, delta1 = ablation.mean("absrel"), ablation.mean("delta1")
    assert absrel["full"] < absrel["no-cond"]
    for variant in ("no-align", "no-mask", "full"):
        assert delta1[variant] > delta1["no-cond"], variant


def test_refinement_stays_faithful_to_the_coarse_layout(ablation):
    frame = ablation.to_frame()
    full = frame[frame["axis_value"] == "full"]
    faithful = full["absrel"] <= 1.1 * full["coarse_absrel"]
    assert faithful.mean() >= 0.9


def test_refiner_improves_an_unseen_coarse_model(refiners, splits, config):
    train, test = splits
    regressor = train_tiny_regressor(train, config)
    records = evaluate_split(refiners["full"], regressor, test, config)
    refined = np.mean([r.report.absrel for r in records])
    coarse = np.mean([r.coarse.absrel for r in records])
    assert refined < coarse


def test_ensembling_is_at_least_as_good_as_single_inference(refiners, splits, config, ablation):
    _, test = splits
    oracle = degrade_oracle_from_config(config)
    result = error_bars(refiners["full"], oracle, test, 10, seed=config.seed, config=config)
    pooled = pooled_error_bars(result)
    assert all(np.isfinite(v) for v in pooled.values())
    assert ablation.mean("delta1")["full"] >= pooled["delta1_mean"] - pooled["delta1_std"]
