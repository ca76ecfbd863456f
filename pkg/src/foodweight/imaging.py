"""Raster decode, crop, resize, flip, and pixel statistics.

Images hold intensities as doubles in [0, 1], row-major and
channel-interleaved, and are treated as immutable once built.  `normalize`
is the one exception to the [0, 1] range: its output is a standardized
tensor headed for the model, not a displayable image.
"""

import math
from array import array
from dataclasses import dataclass, field

from . import pngio
from ._kernels import (
    avg_pool,
    flip_horizontal as _k_flip,
    normalize_affine,
    resize_bilinear,
    sum_and_sumsq,
)
from .errors import DecodeError, DegenerateBox, EmptyDataset, ZeroStd
from .geometry import BoundingBox, outward_pixel_bounds

# Pixel statistics of the dataset this pipeline was originally developed
# against (not shipped); kept as reference constants.  Fixture runs always
# compute their own pool statistics.
REFERENCE_SPLIT_STATS = {
    "train": (0.4890, 0.2301),
    "val": (0.4844, 0.2305),
    "test": (0.4917, 0.2287),
}


@dataclass(frozen=True)
class Image:
    """Decoded raster: intensities in [0, 1], interleaved row-major."""

    width: int
    height: int
    channels: int
    pixels: array = field(repr=False)

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad dimensions {self.width}x{self.height}")
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer length {len(self.pixels)} != "
                f"{self.width}x{self.height}x{self.channels}"
            )

    @property
    def pixel_count(self) -> int:
        """Total number of intensity samples (width * height * channels)."""
        return self.width * self.height * self.channels

    def value_at(self, x: int, y: int, c: int = 0) -> float:
        return self.pixels[(y * self.width + x) * self.channels + c]


def image_from_floats(width, height, channels, values) -> Image:
    return Image(width, height, channels, array("d", values))


def decode(data: bytes) -> Image:
    """Decode PNG (always available) or JPEG (requires Pillow) bytes.

    8-bit samples are scaled into [0, 1] by division by 255.
    """
    if data.startswith(pngio.SIGNATURE):
        width, height, channels, samples = pngio.decode(data)
        pixels = _samples_to_unit_floats(samples)
        return Image(width, height, channels, pixels)
    if data[:3] == b"\xff\xd8\xff":
        return _decode_jpeg(data)
    raise DecodeError("unrecognized raster format (expected PNG or JPEG)")


def _samples_to_unit_floats(samples) -> array:
    """8-bit samples to doubles in [0, 1] by true division by 255.

    Division (not multiplication by a reciprocal) keeps k/255 correctly
    rounded so lossless round-trips are bit-exact.
    """
    pixels = array("d", bytes(8 * len(samples)))
    for i, s in enumerate(samples):
        pixels[i] = s / 255.0
    return pixels


def _decode_jpeg(data: bytes) -> Image:
    try:
        import io

        from PIL import Image as PILImage
    except ImportError as exc:
        raise DecodeError(
            "JPEG decoding requires the optional Pillow dependency "
            "(pip install foodweight[jpeg])"
        ) from exc
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            width, height = im.size
            channels = 1 if im.mode == "L" else 3
            raw = im.tobytes()
    except Exception as exc:
        raise DecodeError(f"bad JPEG data: {exc}") from exc
    return Image(width, height, channels, _samples_to_unit_floats(raw))


def encode_png(img: Image) -> bytes:
    """Quantize to 8 bits and encode losslessly.

    Intensities of the form k/255 round-trip bit-exactly through
    encode_png -> decode.
    """
    quantized = bytes(
        min(255, max(0, round(v * 255.0))) for v in img.pixels
    )
    return pngio.encode(img.width, img.height, img.channels, quantized)


def crop(img: Image, box: BoundingBox) -> Image:
    """Extract the sub-image covered by the box, rounding outward.

    Mins are floored and maxes are ceiled so every pixel the box touches is
    kept.  The box must already lie within the image bounds (clamp first).
    """
    x0, y0, x1, y1 = outward_pixel_bounds(box)
    if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height:
        raise DegenerateBox(
            f"box {box.as_tuple()} not within image bounds "
            f"{img.width}x{img.height}; clamp it first"
        )
    w = x1 - x0
    h = y1 - y0
    if w <= 0 or h <= 0:
        raise DegenerateBox(f"crop region collapsed to {w}x{h}")
    ch = img.channels
    out = array("d", bytes(8 * w * h * ch))
    src = img.pixels
    for y in range(h):
        s = ((y0 + y) * img.width + x0) * ch
        out[y * w * ch : (y + 1) * w * ch] = src[s : s + w * ch]
    return Image(w, h, ch, out)


def resize(img: Image, width: int, height: int) -> Image:
    """Bilinear resize with corner-aligned sampling.

    Constant images are preserved exactly and outputs stay inside the input
    value range.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"target dimensions must be positive, got {width}x{height}")
    out = array("d", bytes(8 * width * height * img.channels))
    resize_bilinear(img.pixels, img.width, img.height, img.channels, out, width, height)
    return Image(width, height, img.channels, out)


def flip_horizontal(img: Image) -> Image:
    """Reverse column order per row; an involution."""
    out = array("d", bytes(8 * img.pixel_count))
    _k_flip(img.pixels, img.width, img.height, img.channels, out)
    return Image(img.width, img.height, img.channels, out)


def average_pixel_intensity(img: Image) -> float:
    """Mean of all intensity samples across pixels and channels."""
    s, _ = sum_and_sumsq(img.pixels, img.pixel_count)
    return s / img.pixel_count


def pixel_mean_std(imgs) -> tuple[float, float]:
    """Pooled mean and population standard deviation over a set of images.

    All intensity samples of all images form one pool; channels are not
    separated.
    """
    total = 0.0
    total_sq = 0.0
    count = 0
    for img in imgs:
        s, ss = sum_and_sumsq(img.pixels, img.pixel_count)
        total += s
        total_sq += ss
        count += img.pixel_count
    if count == 0:
        raise EmptyDataset("pixel_mean_std needs at least one image")
    mean = total / count
    variance = total_sq / count - mean * mean
    if variance < 0.0:  # rounding can push a zero-variance pool negative
        variance = 0.0
    return mean, math.sqrt(variance)


def normalize(img: Image, mean: float, std: float) -> Image:
    """Map intensities to (p - mean) / std.

    The result is a standardized tensor for model input; values routinely
    leave [0, 1].
    """
    if not std > 0.0:
        raise ZeroStd(f"normalization std must be positive, got {std}")
    out = array("d", bytes(8 * img.pixel_count))
    normalize_affine(img.pixels, out, img.pixel_count, mean, std)
    return Image(img.width, img.height, img.channels, out)


def pool_backbone_input(img: Image, pool_size: int) -> array:
    """Average-pool an image to the flat (pool_size^2 * channels) vector the
    scalar backbone consumes."""
    if img.width < pool_size or img.height < pool_size:
        raise ValueError(
            f"image {img.width}x{img.height} smaller than pool grid {pool_size}"
        )
    out = array("d", bytes(8 * pool_size * pool_size * img.channels))
    avg_pool(img.pixels, img.width, img.height, img.channels, pool_size, out)
    return out
