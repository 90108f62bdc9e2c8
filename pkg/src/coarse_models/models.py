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
# Coarse depth models that supply the refiner's conditioning, behind one interface so they can be swapped at
# inference time.
#
#     degrade_oracle  - degrades the ground truth (needs gt)
#     tiny_regressor  - small trained network (image only)
#

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from alignment.affine import fit_affine
from depth_io.rasters import DepthMap, DepthUnits, ImageMap
from simulation.splits import Manifest
from utils.checkpoints import load_checkpoint, save_checkpoint, state_to_numpy
from utils.config import RunConfig
from utils.exceptions import ConfigError, DegenerateDepth, FormatError, MissingGroundTruth, ShapeError

from .degrade import DegradeParams, degrade
from .regressor import (
    REGRESSOR_BASE_CHANNELS,
    module_from_state,
    predict_regressor,
    train_tiny_regressor_module,
)


class CoarseKind(str, Enum):
    DEGRADE_ORACLE = "degrade_oracle"
    TINY_REGRESSOR = "tiny_regressor"


@dataclass
class CoarseModel:
    """
    A coarse depth model.

    ``params`` holds ``{"degrade": DegradeParams, "seed": int}`` for the oracle and
    ``{"parameters": {name: array}, "base_channels": int}`` for the regressor. ``id`` names the instance stably.
    """

    kind: CoarseKind
    params: Dict[str, Any]
    id: str
    run: Dict[str, Any] = field(default_factory=dict)
    _module: Any = field(default=None, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.kind = CoarseKind(self.kind)

    def regressor(self) -> Any:
        """The torch module of a regressor, built once from the stored parameters; safe to call from several threads."""
        with self._lock:
            if self._module is None:
                self._module = module_from_state(self.params["parameters"], self.params["base_channels"])
            return self._module


def degrade_oracle(params: Optional[DegradeParams] = None, seed: int = 0) -> CoarseModel:
    """Degradation oracle; ``id`` is derived from its parameters and seed."""
    params = params or DegradeParams()
    key = json.dumps({"degrade": params.to_dict(), "seed": seed}, sort_keys=True)
    return CoarseModel(
        kind=CoarseKind.DEGRADE_ORACLE,
        params={"degrade": params, "seed": seed},
        id=f"degrade_oracle-{hashlib.md5(key.encode()).hexdigest()[:12]}",
    )


def degrade_oracle_from_config(config: RunConfig) -> CoarseModel:
    params = DegradeParams(
        blur_sigma=config.blur_sigma,
        downscale_factor=config.downscale_factor,
        quantize_levels=config.quantize_levels,
        random_affine=config.random_affine,
    )
    return degrade_oracle(params, seed=config.seed)


def _regressor_model(parameters: Dict[str, np.ndarray], base_channels: int, run: Dict[str, Any]) -> CoarseModel:
    digest = hashlib.md5()
    for name in sorted(parameters):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(parameters[name], dtype=np.float32).tobytes())
    return CoarseModel(
        kind=CoarseKind.TINY_REGRESSOR,
        params={"parameters": parameters, "base_channels": base_channels},
        id=f"tiny_regressor-{digest.hexdigest()[:12]}",
        run=run,
    )


def predict_coarse(model: CoarseModel, x: ImageMap, gt: Optional[DepthMap] = None) -> DepthMap:
    """
    Coarse depth prediction for image ``x``.

    :param model: Coarse model.
    :param x: Input image.
    :param gt: Ground truth; required by the degradation oracle, ignored by the regressor.
    :return: Affine-ambiguous depth with the shape of ``x``.
    :raises MissingGroundTruth: If the oracle is called without ``gt``.
    :raises ShapeError: If ``gt`` does not match ``x``.
    """
    if model.kind is CoarseKind.DEGRADE_ORACLE:
        if gt is None:
            raise MissingGroundTruth("The degradation oracle needs the ground-truth depth")
        if gt.shape != x.shape:
            raise ShapeError(f"Ground truth shape {gt.shape} does not match image shape {x.shape}")
        return degrade(gt, model.params["degrade"], seed=model.params["seed"])
    return DepthMap.dense(predict_regressor(model.regressor(), x), units=DepthUnits.METRIC)


def ssi_loss(pred: DepthMap, label: DepthMap) -> float:
    """
    Scale-and-shift-invariant loss: mean squared error after least-squares alignment of ``pred`` onto ``label``
    over jointly valid pixels.

    :raises DegenerateDepth: If the label (or the prediction) is constant.
    """
    label_values = label.values[label.validity & pred.validity]
    if label_values.size and np.all(label_values == label_values[0]):
        raise DegenerateDepth("Label of the SSI loss is constant")
    return fit_affine(pred, label).residual_rms ** 2


def train_tiny_regressor(
    train_manifest: Manifest,
    config: RunConfig,
    checkpoint_path: Optional[str] = None,
    log_path: Optional[str] = None,
    verbose: bool = False,
) -> CoarseModel:
    """
    Train a tiny regressor on a split and wrap it as a :class:`CoarseModel`.

    :param train_manifest: Training split, non-empty.
    :param config: Run configuration.
    :param checkpoint_path: If given, the model is saved there.
    :param log_path: If given, the loss log is written there as CSV.
    :param verbose: Print progress.
    :raises ConfigError: On an empty manifest or invalid hyperparameters.
    """
    module, run = train_tiny_regressor_module(train_manifest, config, log_path=log_path, verbose=verbose)
    model = _regressor_model(state_to_numpy(module), REGRESSOR_BASE_CHANNELS, run)
    model._module = module
    if checkpoint_path is not None:
        save_coarse_model(model, checkpoint_path, config)
    return model


def save_coarse_model(model: CoarseModel, path: str, config: Optional[RunConfig] = None) -> None:
    """Store a coarse model in the shared checkpoint container."""
    if model.kind is CoarseKind.DEGRADE_ORACLE:
        model_config = {"degrade": model.params["degrade"].to_dict(), "seed": model.params["seed"]}
        parameters: Dict[str, np.ndarray] = {}
    else:
        model_config = {"base_channels": model.params["base_channels"]}
        parameters = model.params["parameters"]
    save_checkpoint(
        path,
        kind=model.kind.value,
        parameters=parameters,
        config={"model": model_config, "id": model.id, "run_config": config.to_dict() if config else {}},
        run=model.run,
    )


def load_coarse_model(path: str) -> CoarseModel:
    """
    Load a coarse model saved by :func:`save_coarse_model`.

    :raises MissingCheckpoint: If the file does not exist.
    :raises FormatError: If it does not hold a coarse model.
    """
    checkpoint = load_checkpoint(path)
    model_config = checkpoint.config.get("model", {})
    if checkpoint.kind == CoarseKind.DEGRADE_ORACLE.value:
        return degrade_oracle(DegradeParams(**model_config["degrade"]), seed=int(model_config["seed"]))
    if checkpoint.kind == CoarseKind.TINY_REGRESSOR.value:
        return _regressor_model(checkpoint.parameters, int(model_config["base_channels"]), checkpoint.run)
    raise FormatError(f"{path} holds a {checkpoint.kind} checkpoint, not a coarse model")


def resolve_coarse_model(spec: str, config: RunConfig) -> CoarseModel:
    """
    Parse a coarse model selector: ``oracle`` or ``regressor:PATH``.

    :raises ConfigError: On an unknown selector.
    """
    if spec == "oracle":
        return degrade_oracle_from_config(config)
    if spec.startswith("regressor:") and len(spec) > len("regressor:"):
        return load_coarse_model(spec[len("regressor:") :])
    raise ConfigError(f"Unknown coarse model {spec!r}; expected 'oracle' or 'regressor:PATH'")
