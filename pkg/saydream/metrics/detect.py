"""
Entity detector for blockworld frames, rendered or generated: a gripper
glyph found by normalized cross-correlation against the open and closed
templates, and block and box regions found by nearest-palette color masks.
"""
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from recordclass import RecordClass
from saydream.sim.render import (BLOCK_RGB, BOX_RGB, CLOSED_GLYPH,
                                 GLYPH_ANCHOR, GRIPPER_RGB, OPEN_GLYPH,
                                 TABLE_RGB, from_pixel)
from saydream.sim.world import Color

Point = Tuple[float, float]

# palette entries: table, box, gripper, then one per block color
_PALETTE = np.array([TABLE_RGB, BOX_RGB, GRIPPER_RGB] +
                    [BLOCK_RGB[c] for c in Color])
_BOX, _FIRST_BLOCK = 1, 3
PALETTE_DISTANCE = 0.35
_PAD = 2


class EntityDetection(RecordClass):
    """
    Args:
      gripper: Gripper position in unit coordinates, None when the best
        template score is below the detection threshold.
      gripper_score: Best normalized cross-correlation g in [-1, 1].
      gripper_open: Whether the open template matched best.
      blocks: Centroid (unit coordinates) per color, None when absent.
      box: Box region (x0, y0, x1, y1), None when absent.
      frame_size: (H, W) of the frame.
    """
    gripper: Optional[Point]
    gripper_score: float
    gripper_open: bool
    blocks: Dict[Color, Optional[Point]]
    box: Optional[Tuple[float, float, float, float]]
    frame_size: Tuple[int, int]


def darkness(frame: np.ndarray) -> np.ndarray:
    """Per-pixel darkness in [0, 1]: 1 at the gripper color, 0 for the rest
    of the palette."""
    return np.clip((0.5 - frame.max(axis=-1)) / 0.4, 0.0, 1.0)


def _ncc(windows: np.ndarray, template: np.ndarray) -> np.ndarray:
    t = template - template.mean()
    w = windows - windows.mean(axis=(-2, -1), keepdims=True)
    num = (w * t).sum(axis=(-2, -1))
    den = np.sqrt((w * w).sum(axis=(-2, -1)) * (t * t).sum())
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 1e-12)
    return out


def match_gripper(frame: np.ndarray) -> Tuple[Tuple[int, int], float, bool]:
    """
    Returns:
      The (row, column) of the best glyph anchor, its score and whether the
      open template gave it.
    """
    dark = np.pad(darkness(frame), _PAD)
    windows = sliding_window_view(dark, OPEN_GLYPH.shape)
    open_scores = _ncc(windows, OPEN_GLYPH)
    closed_scores = _ncc(windows, CLOSED_GLYPH)
    best_open = np.unravel_index(np.argmax(open_scores), open_scores.shape)
    best_closed = np.unravel_index(np.argmax(closed_scores),
                                   closed_scores.shape)
    if (open_scores[best_open] >= closed_scores[best_closed]):
        (r, c), score, is_open = best_open, open_scores[best_open], True
    else:
        (r, c), score, is_open = best_closed, closed_scores[best_closed], \
            False
    anchor = (int(r) - _PAD + GLYPH_ANCHOR[0], int(c) - _PAD + GLYPH_ANCHOR[1])
    return anchor, float(score), is_open


def palette_labels(frame: np.ndarray) -> np.ndarray:
    """Nearest palette index per pixel, -1 when no entry is close enough."""
    dist = np.linalg.norm(frame[..., None, :] - _PALETTE, axis=-1)
    labels = np.argmin(dist, axis=-1)
    labels[np.min(dist, axis=-1) >= PALETTE_DISTANCE] = -1
    return labels


def detect_entities(frame: np.ndarray,
                    detect_min: float = 0.5) -> EntityDetection:
    height, width = frame.shape[:2]
    (row, col), score, is_open = match_gripper(frame)
    gripper = None
    if (score >= detect_min):
        gripper = from_pixel(col, row, height, width)
    labels = palette_labels(frame)
    blocks: Dict[Color, Optional[Point]] = {}
    for color in Color:
        rows, cols = np.nonzero(labels == _FIRST_BLOCK + color.value)
        blocks[color] = None if len(rows) == 0 else \
            from_pixel(float(cols.mean()), float(rows.mean()), height, width)
    box = None
    rows, cols = np.nonzero(labels == _BOX)
    if (len(rows) > 0):
        # pixel-center bounds grown by one pixel: a superset of the region
        box = ((cols.min() - 0.5) / width, (rows.min() - 0.5) / height,
               (cols.max() + 1.5) / width, (rows.max() + 1.5) / height)
    return EntityDetection(gripper, score, is_open, blocks, box,
                           (height, width))


def detect_video(frames: Sequence[np.ndarray],
                 detect_min: float = 0.5) -> List[EntityDetection]:
    return [detect_entities(f, detect_min) for f in frames]


def coverage(detections: Sequence[EntityDetection]) -> float:
    """Fraction of frames with a detected gripper."""
    if (len(detections) == 0):
        return 0.0
    return sum(d.gripper is not None for d in detections) / len(detections)
