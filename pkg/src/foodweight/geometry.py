"""Axis-aligned bounding-box arithmetic.

Boxes live in pixel space with the origin at the top-left corner and
real-valued coordinates (detector outputs are continuous).  Zero-area boxes
are rejected at construction because every downstream formula divides by a
box dimension.
"""

import math
from dataclasses import dataclass

from .errors import DegenerateBox


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box (x_min, y_min, x_max, y_max) with positive extent.

    Coordinates may exceed image bounds (raw detector output is allowed to
    overflow); `clamp_to_image` brings a box into a concrete image's frame.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise DegenerateBox(f"non-finite box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBox(f"box has non-positive extent {coords}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def area(box: BoundingBox) -> float:
    """Box area in square pixels; strictly positive by the box invariant."""
    return box.width * box.height


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Overlap area of two boxes, 0.0 when they are disjoint."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, symmetric, in [0, 1].

    Identical boxes give exactly 1.0 (intersection and union are then the
    same product, so the quotient does not round).
    """
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = area(a) + area(b) - inter
    return inter / union


def clamp_to_image(box: BoundingBox, width: float, height: float) -> BoundingBox:
    """Clip a box into [0, width] x [0, height].

    Raises DegenerateBox when clipping collapses the box to zero extent,
    which signals an unusable detection entirely outside the frame.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    x_min = min(max(box.x_min, 0.0), float(width))
    y_min = min(max(box.y_min, 0.0), float(height))
    x_max = min(max(box.x_max, 0.0), float(width))
    y_max = min(max(box.y_max, 0.0), float(height))
    if x_min >= x_max or y_min >= y_max:
        raise DegenerateBox(
            f"box {box.as_tuple()} collapses when clamped to {width}x{height}"
        )
    return BoundingBox(x_min, y_min, x_max, y_max)


def outward_pixel_bounds(box: BoundingBox) -> tuple[int, int, int, int]:
    """Integer pixel bounds covering the box: floor the mins, ceil the maxes.

    Cropping rounds outward so no pixel the box touches is lost.
    """
    return (
        math.floor(box.x_min),
        math.floor(box.y_min),
        math.ceil(box.x_max),
        math.ceil(box.y_max),
    )
