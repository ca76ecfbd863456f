"""Model-input assembly: the 5-element vector [alpha, FT, A, AR, API].

alpha is the scalar backbone output; the other four are engineered from the
raw crop (before any resize): encoded food type, crop area, aspect ratio,
and average pixel intensity.  A fitted scaler standardizes the engineered
four so the O(1e4) pixel areas do not swamp the O(1) entries; alpha is left
unscaled because the backbone trains jointly and sets its own output scale.
"""

import math
import warnings
from array import array
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyDataset, UnknownClass
from .imaging import Image, average_pixel_intensity

ENGINEERED_NAMES = ("food_type", "area", "aspect_ratio", "avg_pixel_intensity")


@dataclass(frozen=True)
class FeatureVector:
    """One model input.  Entries other than alpha may already be scaled;
    raw-value range checks happen at assembly time in extract_features."""

    alpha: float
    food_type: float
    area: float
    aspect_ratio: float
    avg_pixel_intensity: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not math.isfinite(value):
                raise ValueError(f"feature {name} is not finite: {value}")

    def as_array(self) -> array:
        return array(
            "d",
            (self.alpha, self.food_type, self.area, self.aspect_ratio,
             self.avg_pixel_intensity),
        )


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature affine standardization for the four engineered entries."""

    shift: tuple
    scale: tuple

    def __post_init__(self):
        if len(self.shift) != 4 or len(self.scale) != 4:
            raise ValueError("scaler needs exactly four (shift, scale) pairs")
        if any(not s > 0.0 for s in self.scale):
            raise ValueError(f"scaler scales must be strictly positive: {self.scale}")

    @classmethod
    def identity(cls) -> "FeatureScaler":
        return cls(shift=(0.0, 0.0, 0.0, 0.0), scale=(1.0, 1.0, 1.0, 1.0))

    def transform(self, raw: Sequence[float]) -> tuple:
        return tuple(
            (value - shift) / scale
            for value, shift, scale in zip(raw, self.shift, self.scale)
        )


def image_area(crop: Image) -> float:
    """Crop area in square pixels: height times width."""
    return float(crop.height * crop.width)


def aspect_ratio(crop: Image) -> float:
    """Width over height of the crop."""
    return crop.width / crop.height


def encode_food_type(label: str, registry: Sequence[str]) -> float:
    """Zero-based index of the label in the ordered class registry."""
    try:
        return float(registry.index(label))
    except ValueError:
        raise UnknownClass(
            f"label {label!r} not in registry of {len(registry)} classes"
        ) from None


def raw_engineered(crop: Image, label: str, registry: Sequence[str]) -> tuple:
    """The unscaled (FT, A, AR, API) tuple for one crop."""
    return (
        encode_food_type(label, registry),
        image_area(crop),
        aspect_ratio(crop),
        average_pixel_intensity(crop),
    )


def extract_features(
    crop: Image,
    label: str,
    backbone_alpha: float,
    registry: Sequence[str],
    scaler: FeatureScaler,
) -> FeatureVector:
    """Assemble the model input for one crop.

    The crop must be the raw detection crop, before the backbone's square
    resize, so area and aspect ratio describe the actual detection.
    """
    if not math.isfinite(backbone_alpha):
        raise ValueError(f"backbone output must be finite, got {backbone_alpha}")
    raw = raw_engineered(crop, label, registry)
    _check_raw(raw)
    ft, area_, ar, api = scaler.transform(raw)
    return FeatureVector(backbone_alpha, ft, area_, ar, api)


def _check_raw(raw: tuple) -> None:
    ft, area_, ar, api = raw
    if not area_ > 0.0:
        raise ValueError(f"crop area must be positive, got {area_}")
    if not ar > 0.0:
        raise ValueError(f"aspect ratio must be positive, got {ar}")
    if not 0.0 <= api <= 1.0:
        raise ValueError(f"average pixel intensity outside [0, 1]: {api}")


def fit_scaler(rows) -> FeatureScaler:
    """Fit shift = mean, scale = population std per engineered feature.

    Zero-variance features keep scale 1 (with a warning) so transforming
    them still centers without dividing by zero.
    """
    rows = list(rows)
    if not rows:
        raise EmptyDataset("fit_scaler needs at least one feature row")
    n = len(rows)
    shifts = []
    scales = []
    for j in range(4):
        total = 0.0
        for row in rows:
            total += row[j]
        mean = total / n
        var = 0.0
        for row in rows:
            d = row[j] - mean
            var += d * d
        var /= n
        std = math.sqrt(var)
        if std == 0.0:
            warnings.warn(
                f"feature {ENGINEERED_NAMES[j]!r} has zero variance; scale set to 1"
            )
            std = 1.0
        shifts.append(mean)
        scales.append(std)
    return FeatureScaler(shift=tuple(shifts), scale=tuple(scales))
