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
# Command-line entry point: generation, training, inference, evaluation, sweeps and report rendering.
#
# Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
#
# Artifacts of a run live under --out:
#
#     RUN_DIR/
#     ├── config.txt       # resolved RunConfig, key=value
#     ├── checkpoints/     # *.h5
#     ├── logs/            # loss CSVs
#     ├── preds/           # refined / coarse / input / gt PFMs
#     └── reports/         # result CSVs, rendered tables and strips
#

import argparse
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from coarse_models.models import predict_coarse, resolve_coarse_model, train_tiny_regressor
from depth_io.pfm import read_pfm, write_pfm
from depth_io.rasters import DepthMap, ImageMap, normalize_depth
from diffusion.denoiser import VARIANTS, RefinerCheckpoint
from diffusion.training import train_refiner
from evaluation.ensemble import ensemble_refine
from evaluation.experiments import SWEEP_AXES, error_bars, pooled_error_bars, run_ablation, run_sweep
from evaluation.metrics import compute_metrics
from evaluation.reports import RUN_SUBDIRS, render_run_report, run_layout
from simulation.scenes import SceneSpec
from simulation.splits import Manifest, generate_split, load_manifest
from utils import config as defaults
from utils.config import RunConfig, load_config, save_config
from utils.exceptions import ArtifactIOError, ConfigError, DepthLabError, FormatError

# flag -> (RunConfig field, type, help)
CONFIG_FLAGS: Dict[str, tuple] = {
    "seed": ("seed", int, "random seed"),
    "size": ("size", int, "raster height and width in pixels"),
    "n_primitives": ("n_primitives", int, "primitives per scene"),
    "patch_size": ("patch_size", int, "mask patch size w"),
    "threshold": ("threshold", float, "mask threshold eta"),
    "codec_factor": ("codec_factor", int, "space-to-depth codec factor f"),
    "timesteps": ("timesteps", int, "diffusion steps T"),
    "iters": ("iterations", int, "refiner training iterations"),
    "batch_size": ("batch_size", int, "refiner batch size"),
    "lr": ("learning_rate", float, "refiner learning rate"),
    "base_channels": ("base_channels", int, "denoiser width"),
    "variant": ("variant", str, "ablation variant"),
    "steps": ("ddim_steps", int, "DDIM denoising steps"),
    "ensemble": ("ensemble_size", int, "test-time ensemble members"),
    "coarse_steps": ("coarse_steps", int, "tiny regressor training steps"),
    "workers": ("workers", int, "worker threads"),
}

TRAINING_FLAGS = (
    "seed",
    "variant",
    "iters",
    "batch_size",
    "lr",
    "patch_size",
    "threshold",
    "codec_factor",
    "timesteps",
)
INT_AXES = ("patch_size", "ensemble", "ddim_steps", "train_size", "train_iters")


def _epilog() -> str:
    lines = [
        "desk-scale defaults:",
        f"  size={defaults.RASTER_SIZE} patch_size={defaults.PATCH_SIZE} threshold={defaults.THRESHOLD} "
        f"timesteps={defaults.TIMESTEPS} iterations={defaults.ITERATIONS} batch_size={defaults.BATCH_SIZE} "
        f"lr={defaults.LEARNING_RATE} ddim_steps={defaults.DDIM_STEPS} ensemble={defaults.ENSEMBLE_SIZE}",
        "full-scale reference values (not defaults):",
        "  " + " ".join(f"{key}={value}" for key, value in defaults.FULL_SCALE_REFERENCE.items()),
        f"environment: {defaults.SEED_ENV_VAR} overrides the configured seed",
        "reproducibility: pass --no-timing for byte-identical artifacts across runs",
    ]
    return "\n".join(lines)


def _add_config_flags(parser: argparse.ArgumentParser, *names: str) -> None:
    parser.add_argument("--config", type=str, help="key=value config file")
    for name in names:
        _, kind, text = CONFIG_FLAGS[name]
        flag = "--" + name.replace("_", "-")
        if name == "variant":
            parser.add_argument(flag, type=str, choices=sorted(VARIANTS), help=text)
        else:
            parser.add_argument(flag, type=kind, help=text)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=str, required=True, help="run directory")
    parser.add_argument(
        "--no-timing",
        action="store_true",
        help="write 0.0 in timing columns; needed for byte-identical CSVs and checkpoints across runs",
    )


def _subparser(sub: Any, name: str, text: str) -> argparse.ArgumentParser:
    return sub.add_parser(name, help=text, epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthlab",
        description="Depth-conditioned diffusion refinement of coarse monocular depth",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--quiet", action="store_true", help="no progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = _subparser(sub, "generate", "render a synthetic split")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--out", type=str, required=True, help="split directory")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty split directory")
    _add_config_flags(p, "seed", "size", "n_primitives", "workers")

    p = _subparser(sub, "train-coarse", "train the tiny coarse regressor")
    p.add_argument("--train", type=str, required=True, help="training split directory")
    _add_run_flags(p)
    _add_config_flags(p, "seed", "coarse_steps")

    p = _subparser(sub, "train-refiner", "train a refiner")
    p.add_argument("--train", type=str, required=True, help="training split directory")
    p.add_argument("--coarse", type=str, default="oracle", help="oracle | regressor:PATH")
    _add_run_flags(p)
    _add_config_flags(p, *TRAINING_FLAGS, "base_channels")

    p = _subparser(sub, "infer", "refine one image")
    p.add_argument("--checkpoint", type=str, required=True, help="refiner checkpoint")
    p.add_argument("--image", type=str, required=True, help="input image PFM")
    p.add_argument("--gt", type=str, help="ground-truth depth PFM (needed by the oracle)")
    p.add_argument("--coarse", type=str, default="oracle", help="oracle | regressor:PATH")
    p.add_argument("--name", type=str, help="output stem (defaults to the image file name)")
    _add_run_flags(p)
    _add_config_flags(p, "seed", "steps", "ensemble")

    p = _subparser(sub, "eval", "score a prediction, or refiners on a test split")
    p.add_argument("--pred", type=str, help="predicted depth PFM")
    p.add_argument("--gt", type=str, help="ground-truth depth PFM")
    p.add_argument("--no-align", action="store_true", help="score --pred without affine alignment")
    p.add_argument("--checkpoint", type=str, action="append", help="refiner checkpoint (repeat for an ablation)")
    p.add_argument("--test", type=str, help="test split directory")
    p.add_argument("--coarse", type=str, default="oracle", help="oracle | regressor:PATH")
    p.add_argument("--out", type=str, help="run directory (split evaluation)")
    p.add_argument(
        "--no-timing", action="store_true", help="write 0.0 in timing columns; needed for byte-identical reports"
    )
    _add_config_flags(p, "seed", "steps", "ensemble", "workers")

    p = _subparser(sub, "sweep", "hyperparameter, data or ablation sweep")
    p.add_argument("--axis", type=str, required=True, choices=SWEEP_AXES)
    p.add_argument("--values", type=str, required=True, help="comma-separated axis values")
    p.add_argument("--train", type=str, help="training split (training axes)")
    p.add_argument("--test", type=str, required=True, help="test split directory")
    p.add_argument("--checkpoint", type=str, help="trained refiner (ensemble / ddim_steps axes)")
    p.add_argument("--coarse", type=str, default="oracle", help="oracle | regressor:PATH")
    _add_run_flags(p)
    _add_config_flags(p, *TRAINING_FLAGS, "steps", "ensemble", "workers")

    p = _subparser(sub, "error-bars", "spread of repeated single refinements")
    p.add_argument("--checkpoint", type=str, required=True, help="refiner checkpoint")
    p.add_argument("--test", type=str, required=True, help="test split directory")
    p.add_argument("--coarse", type=str, default="oracle", help="oracle | regressor:PATH")
    p.add_argument("--repeats", type=int, default=10, help="refinements per input")
    _add_run_flags(p)
    _add_config_flags(p, "seed", "steps", "workers")

    p = _subparser(sub, "report", "render a run directory into tables and image strips")
    p.add_argument("--out", type=str, required=True, help="run directory")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then ``--config``, then ``DEPTHLAB_SEED``, then explicit flags."""
    overrides: Dict[str, Any] = {}
    for name, (field_name, _, _) in CONFIG_FLAGS.items():
        value = getattr(args, name, None)
        if value is not None:
            overrides[field_name] = value
    if getattr(args, "no_timing", False):
        overrides["record_timing"] = False
    return load_config(getattr(args, "config", None), overrides)


def _match_split(config: RunConfig, manifest: Manifest) -> RunConfig:
    if manifest.spec.height != manifest.spec.width:
        raise ConfigError(f"Splits must hold square rasters, got {manifest.spec.height}x{manifest.spec.width}")
    return config if config.size == manifest.spec.height else config.replace(size=manifest.spec.height)


def _prepare_run_dir(run_dir: str, config: RunConfig) -> Dict[str, str]:
    layout = run_layout(run_dir)
    try:
        for name in RUN_SUBDIRS:
            os.makedirs(layout[name], exist_ok=True)
        save_config(config, layout["config"])
    except OSError as e:
        raise ArtifactIOError(f"Cannot prepare run directory {run_dir}: {e}") from e
    return layout


def _label_for(gt: Optional[DepthMap], config: RunConfig) -> Optional[DepthMap]:
    return None if gt is None else normalize_depth(gt, config.lo_pct, config.hi_pct)[0]


def _read_depth(path: str) -> DepthMap:
    depth = read_pfm(path)
    if not isinstance(depth, DepthMap):
        raise FormatError(f"{path} does not hold a depth map")
    return depth


def _read_image(path: str) -> ImageMap:
    image = read_pfm(path, as_image=True)
    assert isinstance(image, ImageMap)
    return image


def _parse_values(axis: str, text: str) -> List[Any]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        if axis in INT_AXES:
            return [int(item) for item in items]
        if axis == "threshold":
            return [float(item) for item in items]
    except ValueError:
        raise ConfigError(f"Invalid values for axis {axis}: {text!r}")
    return items


def cmd_generate(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    spec = SceneSpec(seed=config.seed, height=config.size, width=config.size, n_primitives=config.n_primitives)
    generate_split(spec, args.count, args.out, force=args.force, workers=config.workers, verbose=verbose)
    return 0


def cmd_train_coarse(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    manifest = load_manifest(args.train)
    config = _match_split(config, manifest)
    layout = _prepare_run_dir(args.out, config)
    path = os.path.join(layout["checkpoints"], "coarse_regressor.h5")
    log_path = os.path.join(layout["logs"], "train_coarse.csv")
    model = train_tiny_regressor(manifest, config, checkpoint_path=path, log_path=log_path, verbose=verbose)
    if verbose:
        print(f"💾 {model.id} saved to {path} (use --coarse regressor:{path})")
    return 0


def cmd_train_refiner(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    manifest = load_manifest(args.train)
    config = _match_split(config, manifest)
    coarse_model = resolve_coarse_model(args.coarse, config)
    layout = _prepare_run_dir(args.out, config)
    name = f"refiner_{config.variant}"
    path = os.path.join(layout["checkpoints"], f"{name}.h5")
    train_refiner(
        manifest,
        coarse_model,
        config,
        checkpoint_path=path,
        log_path=os.path.join(layout["logs"], f"train_{name}.csv"),
        verbose=verbose,
    )
    if verbose:
        print(f"💾 Refiner saved to {path}")
    return 0


def cmd_infer(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    checkpoint = RefinerCheckpoint.load(args.checkpoint)
    image = _read_image(args.image)
    gt = _read_depth(args.gt) if args.gt else None
    label = _label_for(gt, config)
    coarse_model = resolve_coarse_model(args.coarse, config)
    coarse = predict_coarse(coarse_model, image, gt=label)
    refined = ensemble_refine(
        checkpoint,
        coarse_model,
        image,
        config.ensemble_size,
        config.seed,
        gt=label,
        steps=config.ddim_steps,
        coarse=coarse,
    )

    layout = _prepare_run_dir(args.out, config)
    stem = args.name or os.path.splitext(os.path.basename(args.image))[0]
    if stem.endswith("_image"):
        stem = stem[: -len("_image")]
    outputs = {"image": image, "coarse": coarse, "refined": refined, "gt": gt}
    for panel, raster in outputs.items():
        if raster is not None:
            write_pfm(os.path.join(layout["preds"], f"{stem}_{panel}.pfm"), raster)

    if verbose:
        print(f"✅ Refined {args.image} with {coarse_model.id}")
        print(f"   • {config.ensemble_size} ensemble members, {config.ddim_steps} DDIM steps")
        if gt is not None:
            for panel, raster in (("coarse", coarse), ("refined", refined)):
                report = compute_metrics(raster, gt)
                print(f"   • {panel}: AbsRel={report.absrel:.6f} delta1={report.delta1:.6f}")
    return 0


def cmd_eval(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    if args.pred:
        if not args.gt:
            raise ConfigError("eval --pred needs --gt")
        report = compute_metrics(_read_depth(args.pred), _read_depth(args.gt), align=not args.no_align)
        print(f"absrel={report.absrel:.9g} delta1={report.delta1:.9g} n_pixels={report.n_pixels}")
        return 0

    if not args.checkpoint or not args.test or not args.out:
        raise ConfigError("eval needs --pred/--gt, or --checkpoint, --test and --out")
    manifest = load_manifest(args.test)
    config = _match_split(config, manifest)
    coarse_model = resolve_coarse_model(args.coarse, config)
    layout = _prepare_run_dir(args.out, config)
    name = "eval" if len(args.checkpoint) == 1 else "ablation"
    result = run_ablation(
        args.checkpoint,
        manifest,
        config,
        coarse_model,
        out_csv=os.path.join(layout["reports"], f"{name}.csv"),
        verbose=verbose,
    )
    print(result.summary().to_string(index=False))
    return 0


def cmd_sweep(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    test_manifest = load_manifest(args.test)
    config = _match_split(config, test_manifest)
    train_manifest = load_manifest(args.train) if args.train else None
    checkpoint = RefinerCheckpoint.load(args.checkpoint) if args.checkpoint else None
    coarse_model = resolve_coarse_model(args.coarse, config)
    values = _parse_values(args.axis, args.values)
    layout = _prepare_run_dir(args.out, config)
    result = run_sweep(
        args.axis,
        values,
        config,
        test_manifest,
        train_manifest=train_manifest,
        checkpoint=checkpoint,
        coarse_model=coarse_model,
        out_csv=os.path.join(layout["reports"], f"sweep_{args.axis}.csv"),
        checkpoint_dir=layout["checkpoints"],
        dump_dir=os.path.join(layout["reports"], f"sweep_{args.axis}"),
        verbose=verbose,
    )
    print(result.summary().to_string(index=False))
    return 0


def cmd_error_bars(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    manifest = load_manifest(args.test)
    config = _match_split(config, manifest)
    checkpoint = RefinerCheckpoint.load(args.checkpoint)
    coarse_model = resolve_coarse_model(args.coarse, config)
    layout = _prepare_run_dir(args.out, config)
    result = error_bars(
        checkpoint,
        coarse_model,
        manifest,
        args.repeats,
        config.seed,
        config=config,
        out_csv=os.path.join(layout["reports"], "error_bars.csv"),
        verbose=verbose,
    )
    pooled = pooled_error_bars(result)
    print(" ".join(f"{key}={value:.9g}" for key, value in pooled.items()))
    return 0


def cmd_report(args: argparse.Namespace, config: RunConfig, verbose: bool) -> int:
    if not os.path.isdir(args.out):
        raise ArtifactIOError(f"Run directory not found: {args.out}")
    written = render_run_report(args.out, verbose=verbose)
    print(f"📄 Wrote {len(written)} report file(s) to {run_layout(args.out)['reports']}")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig, bool], int]] = {
    "generate": cmd_generate,
    "train-coarse": cmd_train_coarse,
    "train-refiner": cmd_train_refiner,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "error-bars": cmd_error_bars,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config, not args.quiet)
    except ConfigError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return 2
    except (DepthLabError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
