"""Tile-image rendering of interaction matrices.

Binary portable pixmaps (P6) only: dependency-free and bit-exact, so
rendered images can be golden-file tested. Query slots are rows, segment
slots are columns, and darker means more matches. Normalization is
per matrix (grayscale: by the largest tf; rgb: each channel by its own
maximum) so every image is self-contained.

Image size: width = n_b * cell_px, height = n_q * cell_px, plus
(n + 1) one-pixel grid lines per axis when grid_lines is on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tilerank.matrix import InteractionMatrix

GRID_GRAY = 128  # grid line intensity


@dataclass(frozen=True)
class RenderSpec:
    cell_px: int = 8
    mode: str = "grayscale-tf"  # or "rgb-3channel"
    gamma: float = 1.0
    grid_lines: bool = False

    def __post_init__(self):
        if self.cell_px < 1:
            raise ValueError(f"cell_px must be >= 1, got {self.cell_px}")
        if self.mode not in ("grayscale-tf", "rgb-3channel"):
            raise ValueError(f"unknown render mode {self.mode!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _intensity(channel: np.ndarray, gamma: float) -> np.ndarray:
    """255 - round(255 * (v / max)^gamma); an all-zero channel stays white."""
    peak = channel.max()
    if peak == 0.0:
        return np.full(channel.shape, 255, dtype=np.uint8)
    scaled = _round_half_up(255.0 * (channel / peak) ** gamma)
    return (255 - scaled).astype(np.uint8)


def image_dimensions(n_q: int, n_b: int, spec: RenderSpec) -> tuple[int, int]:
    """(width, height) in pixels for the given grid and spec."""
    width = n_b * spec.cell_px
    height = n_q * spec.cell_px
    if spec.grid_lines:
        width += n_b + 1
        height += n_q + 1
    return width, height


def render(matrix: InteractionMatrix, spec: RenderSpec) -> bytes:
    """Render one matrix to P6 bytes. Pure: equal inputs give equal bytes."""
    cells = matrix.cells
    n_q, n_b = matrix.n_q, matrix.n_b
    if spec.mode == "grayscale-tf":
        gray = _intensity(cells[:, :, 0], spec.gamma)
        rgb = np.stack([gray, gray, gray], axis=-1)
    else:
        rgb = np.stack(
            [_intensity(cells[:, :, c], spec.gamma) for c in range(3)], axis=-1
        )
    width, height = image_dimensions(n_q, n_b, spec)
    if spec.grid_lines:
        pixels = np.full((height, width, 3), GRID_GRAY, dtype=np.uint8)
        step = spec.cell_px + 1
        for i in range(n_q):
            for j in range(n_b):
                y = 1 + i * step
                x = 1 + j * step
                pixels[y : y + spec.cell_px, x : x + spec.cell_px] = rgb[i, j]
    else:
        pixels = np.repeat(np.repeat(rgb, spec.cell_px, axis=0), spec.cell_px, axis=1)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def image_filename(query_id: str, doc_id: str, mode: str) -> str:
    return f"{query_id}_{doc_id}.{mode}.ppm"


def render_grid_dump(matrix: InteractionMatrix) -> str:
    """Aligned text table of all three channels, fixed 4-decimal formatting.

    Parseable back with ``parse_grid_dump`` to within 1e-4 per value.
    """
    lines = [f"# interaction matrix {matrix.n_q} x {matrix.n_b} (tf idf sim)"]
    for i in range(matrix.n_q):
        row = []
        for j in range(matrix.n_b):
            tf, idf, sim = matrix.cells[i, j]
            row.append(f"{tf:9.4f} {idf:9.4f} {sim:9.4f}")
        lines.append(" | ".join(row))
    return "\n".join(lines) + "\n"


def parse_grid_dump(text: str) -> np.ndarray:
    """Inverse of ``render_grid_dump`` (up to the 4-decimal quantization)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = []
    for line in lines:
        cells = []
        for cell in line.split(" | "):
            cells.append([float(v) for v in cell.split()])
        rows.append(cells)
    return np.array(rows, dtype=np.float64)
