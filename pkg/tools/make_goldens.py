#!/usr/bin/env python3
"""Regenerate the renderer golden files from the fixtures in test_render.py.

Run from the repository root after any intentional renderer change:
    python3 tools/make_goldens.py
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from test_render import GOLDEN_DIR, fixture_matrices  # noqa: E402

from tilerank.render import render  # noqa: E402


def main():
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for i, (matrix, spec) in enumerate(fixture_matrices()):
        path = GOLDEN_DIR / f"fixture{i}.ppm"
        path.write_bytes(render(matrix, spec))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
