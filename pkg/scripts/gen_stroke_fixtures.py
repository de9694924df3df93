#!/usr/bin/env python3
"""Regenerate the shared stroke-rasterization golden fixtures.

The server's rasterizer is the source of truth; fixtures under fixtures/strokes/
are consumed bit-for-bit by the Python tests and within 1 px by the UI tests.
"""

import json
from pathlib import Path

import numpy as np

from sketchmend.imaging import StrokeSet, rasterize_strokes

FIXTURES = {
    "horizontal_w1": {
        "canvas": [16, 16],
        "strokes": [{"points": [[2, 5], [9, 5]], "width": 1}],
    },
    "diagonal_w2": {
        "canvas": [24, 24],
        "strokes": [{"points": [[3, 3], [20, 18]], "width": 2}],
    },
    "polyline_w3": {
        "canvas": [32, 32],
        "strokes": [{"points": [[4, 26], [10, 6], [22, 14], [28, 4]], "width": 3}],
    },
    "two_strokes": {
        "canvas": [24, 24],
        "strokes": [
            {"points": [[2, 2], [21, 2]], "width": 2},
            {"points": [[12, 0], [12, 22]], "width": 4},
        ],
    },
    "dot": {
        "canvas": [16, 16],
        "strokes": [{"points": [[7.5, 7.5]], "width": 3}],
    },
    "clipped": {
        "canvas": [16, 16],
        "strokes": [{"points": [[-4, 8], [8, 8]], "width": 2}],
    },
}


def render_rows(mask: np.ndarray) -> list[str]:
    return ["".join("X" if v else "." for v in row) for row in mask.astype(bool)]


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "fixtures" / "strokes"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, spec in FIXTURES.items():
        h, w = spec["canvas"]
        ss = StrokeSet.from_json(json.dumps({"strokes": spec["strokes"]}))
        raster = rasterize_strokes(ss, h, w)
        doc = {
            "name": name,
            "canvas": {"height": h, "width": w},
            "strokeset": json.loads(ss.to_json()),
            "raster": render_rows(raster),
        }
        (out_dir / f"{name}.json").write_text(json.dumps(doc, indent=1))
        print(f"wrote {name}: {int(raster.sum())} px")


if __name__ == "__main__":
    main()
