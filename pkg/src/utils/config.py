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
# Run configuration: module-level defaults, the RunConfig container and the flat ``key=value`` text format that is
# echoed into every artifact.
#

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import pandas as pd

from .exceptions import ArtifactIOError, ConfigError

# Environment variable overriding the configured seed
SEED_ENV_VAR = "DEPTHLAB_SEED"

# Scene generation
SEED = 0
RASTER_SIZE = 64
N_PRIMITIVES = 4

# Depth normalization percentiles
LO_PCT = 2.0
HI_PCT = 98.0

# Local patch masking
PATCH_SIZE = 8
THRESHOLD = 0.1
CODEC_FACTOR = 1
MASK_POOL = "max"

# Noise schedule
SCHEDULE = "scaled_linear"
TIMESTEPS = 1000
BETA_START = 0.00085
BETA_END = 0.012

# Refiner training (desk scale; the full-scale reference is in FULL_SCALE_REFERENCE)
LEARNING_RATE = 3e-5
BATCH_SIZE = 8
ITERATIONS = 2000
BASE_CHANNELS = 24
VARIANT = "full"

# Inference
DDIM_STEPS = 50
ENSEMBLE_SIZE = 10

# Coarse models
BLUR_SIGMA = 1.5
DOWNSCALE_FACTOR = 4
QUANTIZE_LEVELS = 16
RANDOM_AFFINE = True
COARSE_LEARNING_RATE = 1e-3
COARSE_STEPS = 500
COARSE_BATCH_SIZE = 8

# Full-scale reference values, shown next to the desk-scale defaults in --help
FULL_SCALE_REFERENCE = {
    "batch_size": 32,
    "iterations": 5000,
    "learning_rate": 3e-5,
    "ddim_steps": 50,
    "ensemble_size": 10,
    "patch_size": 8,
    "threshold": 0.1,
    "train_pairs": 74000,
}


@dataclass
class RunConfig:
    """
    Every hyperparameter of a DepthLab run. Instances are plain data: they serialize to and from flat
    ``key=value`` text without loss.
    """

    seed: int = SEED
    size: int = RASTER_SIZE
    n_primitives: int = N_PRIMITIVES
    lo_pct: float = LO_PCT
    hi_pct: float = HI_PCT
    patch_size: int = PATCH_SIZE
    threshold: float = THRESHOLD
    codec_factor: int = CODEC_FACTOR
    mask_pool: str = MASK_POOL
    schedule: str = SCHEDULE
    timesteps: int = TIMESTEPS
    beta_start: float = BETA_START
    beta_end: float = BETA_END
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    iterations: int = ITERATIONS
    base_channels: int = BASE_CHANNELS
    variant: str = VARIANT
    ddim_steps: int = DDIM_STEPS
    ensemble_size: int = ENSEMBLE_SIZE
    blur_sigma: float = BLUR_SIGMA
    downscale_factor: int = DOWNSCALE_FACTOR
    quantize_levels: int = QUANTIZE_LEVELS
    random_affine: bool = RANDOM_AFFINE
    coarse_learning_rate: float = COARSE_LEARNING_RATE
    coarse_steps: int = COARSE_STEPS
    coarse_batch_size: int = COARSE_BATCH_SIZE
    log_every: int = 10
    record_timing: bool = True
    workers: int = 1
    extra: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """
        Check ranges of every field.

        :raises ConfigError: On the first invalid value.
        """
        positive_ints = [
            "size",
            "patch_size",
            "codec_factor",
            "timesteps",
            "batch_size",
            "base_channels",
            "ddim_steps",
            "ensemble_size",
            "downscale_factor",
            "coarse_batch_size",
            "log_every",
            "workers",
        ]
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ["n_primitives", "iterations", "coarse_steps", "quantize_levels"]:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.lo_pct < self.hi_pct <= 100.0:
            raise ConfigError(f"Need 0 <= lo_pct < hi_pct <= 100, got {self.lo_pct}, {self.hi_pct}")
        if self.threshold <= 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if not 0.0 < self.beta_start <= self.beta_end < 1.0:
            raise ConfigError(f"Need 0 < beta_start <= beta_end < 1, got {self.beta_start}, {self.beta_end}")
        if self.learning_rate <= 0 or self.coarse_learning_rate <= 0:
            raise ConfigError("Learning rates must be > 0")
        if self.blur_sigma < 0:
            raise ConfigError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if self.mask_pool not in ("max", "min"):
            raise ConfigError(f"mask_pool must be 'max' or 'min', got {self.mask_pool!r}")
        if self.schedule not in ("scaled_linear", "linear"):
            raise ConfigError(f"schedule must be 'scaled_linear' or 'linear', got {self.schedule!r}")
        if self.ddim_steps > self.timesteps:
            raise ConfigError(f"ddim_steps ({self.ddim_steps}) cannot exceed timesteps ({self.timesteps})")
        for factor_name in ["patch_size", "codec_factor", "downscale_factor"]:
            if self.size % getattr(self, factor_name):
                raise ConfigError(f"size {self.size} is not divisible by {factor_name}={getattr(self, factor_name)}")
        latent = self.size // self.codec_factor
        if latent % 4:
            raise ConfigError(
                f"codec_factor={self.codec_factor} gives {latent}x{latent} latents on size {self.size}; "
                "the denoiser needs latent sides divisible by 4, i.e. size divisible by 4 * codec_factor"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Flat dictionary of all fields, ``extra`` entries merged in."""
        values = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        values.update(self.extra)
        return values

    def replace(self, **changes: Any) -> "RunConfig":
        """Copy with some fields changed; the copy is validated."""
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        """Serialize to ``key=value`` lines in field order."""
        return "".join(f"{key}={format_value(value)}\n" for key, value in self.to_dict().items())

    def comment_lines(self, prefix: str = "# ") -> List[str]:
        """The serialized config as comment lines, for embedding in CSV and manifest files."""
        return [f"{prefix}{line}" for line in self.to_text().splitlines()]

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """
        Build a config from string or typed values, converting each to the field's type.

        Unknown keys are kept verbatim in ``extra`` so that echoes stay complete.

        :raises ConfigError: On values that cannot be converted or fail validation.
        """
        types = {f.name: f.type for f in dataclasses.fields(cls) if f.name != "extra"}
        kwargs: Dict[str, Any] = {}
        extra: Dict[str, str] = {}
        for key, raw in values.items():
            if key in types:
                kwargs[key] = parse_value(key, raw, types[key])
            else:
                extra[key] = str(raw)
        return cls(extra=extra, **kwargs)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, raw: Any, type_name: Any) -> Any:
    """
    Convert ``raw`` to the annotated type of field ``key``.

    :raises ConfigError: If the conversion fails.
    """
    type_name = type_name if isinstance(type_name, str) else getattr(type_name, "__name__", str(type_name))
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if type_name == "bool":
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if type_name == "int":
            return int(text)
        if type_name == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"Invalid value for {key}: {raw!r} (expected {type_name})")
    return text


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Parse flat ``key=value`` text. Blank lines and ``#`` comments are ignored.

    :raises ConfigError: On a line without ``=``.
    """
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"Line {number}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Resolve a run configuration: defaults, then the config file, then ``DEPTHLAB_SEED``, then explicit overrides.

    :param path: Optional ``key=value`` config file.
    :param overrides: Values from command-line flags; ``None`` entries are ignored.
    :param environ: Environment mapping (defaults to ``os.environ``).
    :return: Validated config.
    :raises ConfigError: On unreadable or invalid configuration.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                values.update(parse_config_text(f.read()))
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}")
    env = os.environ if environ is None else environ
    if env.get(SEED_ENV_VAR):
        values["seed"] = env[SEED_ENV_VAR]
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.from_mapping(values)


def save_config(config: RunConfig, path: str) -> None:
    """Write ``config`` as ``key=value`` text."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(config.to_text())


def write_config_csv(path: str, frame: pd.DataFrame, config: RunConfig) -> None:
    """
    Write a table as CSV, preceded by ``config`` as ``# key=value`` comment lines.

    Floats use 9 significant digits, so a table computed from the same inputs is written byte-identically.

    :raises ArtifactIOError: If the file cannot be written.
    """
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(config.comment_lines()) + "\n")
            frame.to_csv(f, index=False, lineterminator="\n", float_format="%.9g")
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e


def read_config_csv(path: str) -> pd.DataFrame:
    """
    Read a CSV written by :func:`write_config_csv`, skipping the config comment lines.

    :raises ArtifactIOError: If the file cannot be read.
    """
    try:
        return pd.read_csv(path, comment="#")
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {path}: {e}") from e
