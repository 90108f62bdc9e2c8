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

import h5py
import numpy as np
import pytest

from utils.checkpoints import (
    find_checkpoint_by_config,
    list_checkpoints,
    load_checkpoint,
    save_checkpoint,
)
from utils.exceptions import FormatError, MissingCheckpoint


@pytest.fixture
def parameters(rng):
    return {"conv.weight": rng.standard_normal((4, 3, 3, 3)), "conv.bias": rng.standard_normal(4)}


def test_round_trip(tmp_path, parameters):
    path = str(tmp_path / "ckpt" / "model.h5")
    save_checkpoint(path, "refiner", parameters, {"run_config": {"seed": 1}}, run={"final_loss": 0.5})
    checkpoint = load_checkpoint(path, expected_kind="refiner")
    assert checkpoint.kind == "refiner"
    assert checkpoint.config == {"run_config": {"seed": 1}}
    assert checkpoint.run == {"final_loss": 0.5}
    for name, blob in parameters.items():
        np.testing.assert_array_equal(checkpoint.parameters[name], blob.astype(np.float32))


def test_identical_inputs_give_identical_parameters(tmp_path, parameters):
    paths = [str(tmp_path / "a.h5"), str(tmp_path / "b.h5")]
    for path in paths:
        save_checkpoint(path, "refiner", parameters, {"seed": 0})
    first, second = (load_checkpoint(p) for p in paths)
    assert first.config == second.config
    for name in parameters:
        assert first.parameters[name].tobytes() == second.parameters[name].tobytes()


def test_missing_file(tmp_path):
    with pytest.raises(MissingCheckpoint):
        load_checkpoint(str(tmp_path / "nope.h5"))


def test_wrong_kind(tmp_path, parameters):
    path = str(tmp_path / "m.h5")
    save_checkpoint(path, "tiny_regressor", parameters, {})
    with pytest.raises(FormatError):
        load_checkpoint(path, expected_kind="refiner")


def test_tampered_parameters_fail_the_integrity_check(tmp_path, parameters):
    path = str(tmp_path / "m.h5")
    save_checkpoint(path, "refiner", parameters, {}, compression=None)
    with h5py.File(path, "r+") as f:
        f["parameters"]["conv.bias"][0] = 123.0
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_foreign_hdf5_file(tmp_path):
    path = str(tmp_path / "other.h5")
    with h5py.File(path, "w") as f:
        f.create_dataset("x", data=np.zeros(3))
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_listing_and_lookup(tmp_path, parameters):
    save_checkpoint(str(tmp_path / "refiner_full.h5"), "refiner", parameters, {"run_config": {"variant": "full"}})
    save_checkpoint(str(tmp_path / "refiner_no-cond.h5"), "refiner", parameters, {"run_config": {"variant": "no-cond"}})
    (tmp_path / "notes.txt").write_text("not a checkpoint")
    assert [p.rsplit("/", 1)[-1] for p in list_checkpoints(str(tmp_path))] == ["refiner_full.h5", "refiner_no-cond.h5"]
    found = find_checkpoint_by_config({"variant": "no-cond"}, str(tmp_path))
    assert found is not None and found.endswith("refiner_no-cond.h5")
    assert find_checkpoint_by_config({"variant": "no-image"}, str(tmp_path)) is None
    assert find_checkpoint_by_config({"variant": "no-cond"}, str(tmp_path), pattern_prefix="refiner_full") is None
    assert list_checkpoints(str(tmp_path / "missing")) == []
