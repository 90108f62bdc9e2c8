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
# Build the Sphinx documentation into docs/_build/html.
#

import argparse
import subprocess
import sys
import webbrowser
from pathlib import Path


def main() -> int:
    parser = argparse.ArgumentParser(description="Build the DepthLab documentation")
    parser.add_argument("--open", action="store_true", help="open the built docs in a browser")
    args = parser.parse_args()

    docs_dir = Path(__file__).resolve().parent.parent / "docs"
    build_dir = docs_dir / "_build" / "html"
    print(f"📚 Building documentation from {docs_dir}")

    try:
        subprocess.run(
            [sys.executable, "-m", "sphinx", "-b", "html", str(docs_dir), str(build_dir)],
            check=True,
            capture_output=True,
            text=True,
        )
    except subprocess.CalledProcessError as e:
        print(f"❌ Error building documentation: {e}")
        print(f"stdout: {e.stdout}")
        print(f"stderr: {e.stderr}")
        return 1

    index = build_dir / "index.html"
    if not index.exists():
        print("❌ Built documentation not found!")
        return 1
    print(f"✅ Documentation built at {index}")
    if args.open:
        webbrowser.open(f"file://{index}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
