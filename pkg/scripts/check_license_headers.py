#!/usr/bin/env python3
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
# Check that Python files carry the GPL license header. With no arguments, every file under src/, scripts/ and
# tests/ is checked.
#

import sys
from pathlib import Path
from typing import List, Sequence

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_DIRS = ("src", "scripts", "tests")


def required_header() -> str:
    """The header as it must appear at the top of every file (after an optional shebang)."""
    lines = Path(__file__).read_text(encoding="utf-8").splitlines()[1:]
    end = next(i for i, line in enumerate(lines) if line.startswith("# along with this file."))
    return "\n".join(lines[: end + 1])


def check_license_header(file_path: Path, header: str) -> bool:
    """
    :param file_path: Python file to check.
    :param header: Expected header text.
    :return: True if the file starts with the header.
    """
    try:
        content = file_path.read_text(encoding="utf-8")
    except OSError as e:
        print(f"Error reading {file_path}: {e}")
        return False
    if content.startswith("#!"):
        content = content.split("\n", 1)[-1]
    return content.startswith(header)


def collect_files(args: Sequence[str]) -> List[Path]:
    if args:
        return [Path(arg) for arg in args]
    return sorted(p for d in DEFAULT_DIRS for p in (PROJECT_ROOT / d).rglob("*.py"))


def main() -> int:
    header = required_header()
    files = [p for p in collect_files(sys.argv[1:]) if p.suffix == ".py"]
    failed = [p for p in files if not p.exists() or not check_license_header(p, header)]

    if failed:
        print(f"❌ {len(failed)} file(s) failed the license header check:")
        for file_path in failed:
            print(f"  - {file_path}")
        return 1

    print(f"✅ All {len(files)} Python files have correct license headers.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
