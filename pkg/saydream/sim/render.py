"""
Flat-color rasterizer. Pixel (row i, column j) has its center at the unit
coordinates ((j + 0.5) / W, (i + 0.5) / H), so a point (x, y) lies at the
pixel coordinates (x * W - 0.5, y * H - 0.5).
"""
import math
from typing import Dict, Tuple
import numpy as np
from saydream.sim.world import BLOCK_HALF, Color, WorldState

RGB = Tuple[float, float, float]

TABLE_RGB: RGB = (1.0, 1.0, 1.0)
BOX_RGB: RGB = (0.55, 0.35, 0.15)
GRIPPER_RGB: RGB = (0.08, 0.08, 0.08)
BLOCK_RGB: Dict[Color, RGB] = {
    Color.RED: (0.9, 0.1, 0.1),
    Color.BLUE: (0.1, 0.2, 0.9),
    Color.YELLOW: (0.95, 0.85, 0.1),
    Color.GREEN: (0.1, 0.75, 0.2),
}

# Gripper glyphs: a crossbar over two fingers. The anchor (the gripper's
# pixel) sits at GLYPH_ANCHOR inside the template.
OPEN_GLYPH = np.array([[1, 1, 1, 1, 1],
                       [1, 0, 0, 0, 1],
                       [1, 0, 0, 0, 1],
                       [1, 0, 0, 0, 1]], dtype=np.float64)
CLOSED_GLYPH = np.array([[1, 1, 1, 1, 1],
                         [0, 1, 0, 1, 0],
                         [0, 1, 0, 1, 0],
                         [0, 1, 0, 1, 0]], dtype=np.float64)
GLYPH_ANCHOR = (2, 2)


def to_pixel(x: float, y: float, height: int, width: int) -> Tuple[float,
                                                                   float]:
    """Unit coordinates to (column, row) pixel coordinates."""
    return x * width - 0.5, y * height - 0.5


def from_pixel(col: float, row: float, height: int,
               width: int) -> Tuple[float, float]:
    return (col + 0.5) / width, (row + 0.5) / height


def glyph_anchor(x: float, y: float, height: int,
                 width: int) -> Tuple[int, int]:
    """The (row, column) of the pixel containing the gripper point."""
    row = min(max(int(math.floor(y * height)), 0), height - 1)
    col = min(max(int(math.floor(x * width)), 0), width - 1)
    return row, col


def glyph_box(x: float, y: float, height: int, width: int,
              margin: int = 0) -> Tuple[int, int, int, int]:
    """
    The clipped pixel bounding box (row0, col0, row1, col1), inclusive, of
    the gripper glyph drawn at (x, y), grown by `margin` pixels.
    """
    row, col = glyph_anchor(x, y, height, width)
    gh, gw = OPEN_GLYPH.shape
    r0 = row - GLYPH_ANCHOR[0] - margin
    c0 = col - GLYPH_ANCHOR[1] - margin
    return (max(r0, 0), max(c0, 0),
            min(r0 + gh - 1 + 2 * margin, height - 1),
            min(c0 + gw - 1 + 2 * margin, width - 1))


def _fill_square(frame: np.ndarray, x: float, y: float, half: float,
                 rgb: RGB) -> None:
    height, width = frame.shape[:2]
    cx, cy = to_pixel(x, y, height, width)
    c0 = max(int(math.ceil(cx - half * width)), 0)
    c1 = min(int(math.floor(cx + half * width)), width - 1)
    r0 = max(int(math.ceil(cy - half * height)), 0)
    r1 = min(int(math.floor(cy + half * height)), height - 1)
    if (c0 <= c1 and r0 <= r1):
        frame[r0:r1 + 1, c0:c1 + 1] = rgb


def draw_glyph(frame: np.ndarray, x: float, y: float,
               gripper_open: bool) -> None:
    height, width = frame.shape[:2]
    glyph = OPEN_GLYPH if gripper_open else CLOSED_GLYPH
    row, col = glyph_anchor(x, y, height, width)
    for i, j in zip(*np.nonzero(glyph)):
        r = row + i - GLYPH_ANCHOR[0]
        c = col + j - GLYPH_ANCHOR[1]
        if (0 <= r < height and 0 <= c < width):
            frame[r, c] = GRIPPER_RGB


def render(state: WorldState, height: int = 32, width: int = 32) -> np.ndarray:
    """
    Rasterize `state` into an [height, width, 3] frame with values in [0, 1].
    The held block is drawn last among the blocks and the gripper on top.
    """
    frame = np.empty((height, width, 3), dtype=np.float64)
    frame[:] = TABLE_RGB
    x0, y0, x1, y1 = state.box_region
    c0 = max(int(math.ceil(x0 * width - 0.5)), 0)
    c1 = min(int(math.floor(x1 * width - 0.5)), width - 1)
    r0 = max(int(math.ceil(y0 * height - 0.5)), 0)
    r1 = min(int(math.floor(y1 * height - 0.5)), height - 1)
    frame[r0:r1 + 1, c0:c1 + 1] = BOX_RGB
    blocks = sorted(state.blocks, key=lambda b: b.id == state.held)
    for b in blocks:
        _fill_square(frame, b.x, b.y, BLOCK_HALF, BLOCK_RGB[b.color])
    draw_glyph(frame, state.gripper[0], state.gripper[1], state.gripper_open)
    return frame
