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

import os

import pytest

from cli.main import build_parser, main
from depth_io.pfm import write_pfm
from utils.config import SEED_ENV_VAR

TRAIN_FLAGS = [
    "--iters", "2",
    "--batch-size", "2",
    "--timesteps", "50",
    "--base-channels", "8",
    "--patch-size", "8",
]  # fmt: skip


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


def run(*argv):
    return main(["--quiet", *[str(a) for a in argv]])


def pipeline(root):
    """Generate two splits, train a refiner and score it; returns the run directory."""
    train, test, out = root / "train", root / "test", root / "run"
    assert run("generate", "--count", 2, "--out", train, "--size", 16, "--n-primitives", 3, "--seed", 1) == 0
    assert run("generate", "--count", 2, "--out", test, "--size", 16, "--n-primitives", 3, "--seed", 2) == 0
    assert run("train-refiner", "--train", train, "--out", out, "--no-timing", *TRAIN_FLAGS) == 0
    checkpoint = out / "checkpoints" / "refiner_full.h5"
    assert checkpoint.exists()
    args = ["eval", "--checkpoint", checkpoint, "--test", test, "--out", out, "--no-timing"]
    assert run(*args, "--steps", 2, "--ensemble", 1) == 0
    return out


class TestParser:
    def test_help_lists_defaults(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        assert "desk-scale defaults" in out
        assert "DEPTHLAB_SEED" in out
        assert "--no-timing for byte-identical" in out

    def test_unknown_command_is_a_usage_error(self):
        assert main(["frobnicate"]) == 2

    def test_variant_choices(self):
        args = build_parser().parse_args(["train-refiner", "--train", "t", "--out", "o", "--variant", "no-mask"])
        assert args.variant == "no-mask"
        assert main(["train-refiner", "--train", "t", "--out", "o", "--variant", "nope"]) == 2


class TestExitCodes:
    def test_invalid_count_is_a_configuration_error(self, tmp_path):
        assert run("generate", "--count", 0, "--out", tmp_path / "split") == 2

    def test_invalid_config_value(self, tmp_path):
        assert run("generate", "--count", 1, "--out", tmp_path / "split", "--size", 15) == 2

    def test_report_on_missing_run(self, tmp_path):
        assert run("report", "--out", tmp_path / "missing") == 1
        assert run("report", "--out", tmp_path) == 1

    def test_missing_split(self, tmp_path):
        assert run("train-refiner", "--train", tmp_path / "absent", "--out", tmp_path / "run") == 1

    def test_eval_without_inputs(self):
        assert run("eval") == 2


class TestCommands:
    def test_eval_prediction_against_itself(self, tmp_path, ramp_depth, capsys):
        path = tmp_path / "gt.pfm"
        write_pfm(str(path), ramp_depth)
        assert run("eval", "--pred", path, "--gt", path, "--no-align") == 0
        assert capsys.readouterr().out.strip() == "absrel=0 delta1=1 n_pixels=256"

    def test_generate_refuses_to_overwrite(self, tmp_path):
        split = tmp_path / "split"
        assert run("generate", "--count", 1, "--out", split, "--size", 16) == 0
        assert run("generate", "--count", 1, "--out", split, "--size", 16) == 1
        assert run("generate", "--count", 1, "--out", split, "--size", 16, "--force") == 0

    def test_train_infer_report(self, tmp_path):
        out = pipeline(tmp_path)
        assert (out / "config.txt").exists()
        assert (out / "logs" / "train_refiner_full.csv").exists()
        assert (out / "reports" / "eval.csv").exists()

        image = tmp_path / "test" / "00000_image.pfm"
        gt = tmp_path / "test" / "00000_depth.pfm"
        checkpoint = out / "checkpoints" / "refiner_full.h5"
        args = ["infer", "--checkpoint", checkpoint, "--image", image, "--gt", gt, "--out", out]
        assert run(*args, "--steps", 2, "--ensemble", 2) == 0
        for panel in ("image", "coarse", "refined", "gt"):
            assert (out / "preds" / f"00000_{panel}.pfm").exists()

        assert run("report", "--out", out) == 0
        reports = os.listdir(out / "reports")
        assert "00000_strip.pgm" in reports
        assert "eval.txt" in reports
        assert "logs_train_refiner_full.txt" in reports

    def test_sweep_and_error_bars(self, tmp_path):
        out = pipeline(tmp_path)
        checkpoint = out / "checkpoints" / "refiner_full.h5"
        test = tmp_path / "test"
        common = ["--test", test, "--checkpoint", checkpoint, "--out", out, "--no-timing"]
        assert run("sweep", "--axis", "ddim_steps", "--values", "1,2", *common, "--ensemble", 1) == 0
        assert (out / "reports" / "sweep_ddim_steps.csv").exists()
        assert run("sweep", "--axis", "ddim_steps", "--values", "2,1", *common) == 2
        assert run("error-bars", "--repeats", 2, "--steps", 2, *common) == 0
        assert (out / "reports" / "error_bars.csv").exists()
        assert run("error-bars", "--repeats", 1, *common) == 2

    def test_artifacts_are_byte_identical_across_runs(self, tmp_path):
        first = pipeline(tmp_path / "a")
        second = pipeline(tmp_path / "b")
        for rel in ("config.txt", "logs/train_refiner_full.csv", "reports/eval.csv", "checkpoints/refiner_full.h5"):
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel
        for split in ("train", "test"):
            names = sorted(os.listdir(first.parent / split))
            assert names == sorted(os.listdir(second.parent / split))
            assert any(name.endswith(".pfm") for name in names)
            for name in names:
                a, b = first.parent / split / name, second.parent / split / name
                assert a.read_bytes() == b.read_bytes(), name
