"""Minimal PNG codec: 8-bit grayscale and RGB, no interlace.

Covers everything the pipeline needs (fixtures and checkpointable test
images are all PNG) without an imaging dependency.  Encoding writes filter
type 0 on every scanline; decoding handles all five standard scanline
filters so externally produced files load too.
"""

import struct
import zlib

from .errors import DecodeError

SIGNATURE = b"\x89PNG\r\n\x1a\n"

_COLOR_TYPE_CHANNELS = {0: 1, 2: 3}
_CHANNELS_COLOR_TYPE = {1: 0, 3: 2}


def _chunk(kind: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + kind
        + payload
        + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
    )


def encode(width: int, height: int, channels: int, pixels: bytes) -> bytes:
    """Encode interleaved 8-bit samples (row-major) as a PNG byte string."""
    if channels not in _CHANNELS_COLOR_TYPE:
        raise ValueError(f"unsupported channel count {channels}")
    if len(pixels) != width * height * channels:
        raise ValueError(
            f"pixel buffer length {len(pixels)} != {width}x{height}x{channels}"
        )
    ihdr = struct.pack(">IIBBBBB", width, height, 8, _CHANNELS_COLOR_TYPE[channels], 0, 0, 0)
    stride = width * channels
    raw = bytearray()
    for y in range(height):
        raw.append(0)
        raw += pixels[y * stride : (y + 1) * stride]
    return (
        SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(bytes(raw)))
        + _chunk(b"IEND", b"")
    )


def decode(data: bytes) -> tuple[int, int, int, bytearray]:
    """Decode a PNG byte string to (width, height, channels, samples).

    Raises DecodeError for malformed input or for PNG features outside the
    supported subset (bit depth 8, grayscale/RGB, no interlace).
    """
    if not data.startswith(SIGNATURE):
        raise DecodeError("not a PNG: bad signature")
    pos = len(SIGNATURE)
    header = None
    idat = bytearray()
    seen_end = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise DecodeError("truncated chunk header")
        length = struct.unpack(">I", data[pos : pos + 4])[0]
        kind = data[pos + 4 : pos + 8]
        payload_end = pos + 8 + length
        if payload_end + 4 > len(data):
            raise DecodeError(f"truncated {kind!r} chunk")
        payload = data[pos + 8 : payload_end]
        crc = struct.unpack(">I", data[payload_end : payload_end + 4])[0]
        if crc != (zlib.crc32(kind + payload) & 0xFFFFFFFF):
            raise DecodeError(f"CRC mismatch in {kind!r} chunk")
        pos = payload_end + 4
        if kind == b"IHDR":
            header = struct.unpack(">IIBBBBB", payload)
        elif kind == b"IDAT":
            idat += payload
        elif kind == b"IEND":
            seen_end = True
            break
        # ancillary chunks are skipped
    if header is None:
        raise DecodeError("missing IHDR chunk")
    if not seen_end:
        raise DecodeError("missing IEND chunk")
    width, height, bit_depth, color_type, compression, filter_method, interlace = header
    if width <= 0 or height <= 0:
        raise DecodeError(f"bad dimensions {width}x{height}")
    if bit_depth != 8:
        raise DecodeError(f"unsupported bit depth {bit_depth}")
    if color_type not in _COLOR_TYPE_CHANNELS:
        raise DecodeError(f"unsupported color type {color_type}")
    if compression != 0 or filter_method != 0:
        raise DecodeError("unsupported compression or filter method")
    if interlace != 0:
        raise DecodeError("interlaced PNG not supported")
    channels = _COLOR_TYPE_CHANNELS[color_type]
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise DecodeError(f"bad IDAT stream: {exc}") from exc
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise DecodeError(
            f"decompressed size {len(raw)} != expected {height * (stride + 1)}"
        )
    out = bytearray(height * stride)
    prev_start = -1
    for y in range(height):
        line_start = y * (stride + 1)
        ftype = raw[line_start]
        src = raw[line_start + 1 : line_start + 1 + stride]
        dst_start = y * stride
        if ftype == 0:
            out[dst_start : dst_start + stride] = src
        elif ftype == 1:  # Sub
            for i in range(stride):
                a = out[dst_start + i - channels] if i >= channels else 0
                out[dst_start + i] = (src[i] + a) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                b = out[prev_start + i] if y > 0 else 0
                out[dst_start + i] = (src[i] + b) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                a = out[dst_start + i - channels] if i >= channels else 0
                b = out[prev_start + i] if y > 0 else 0
                out[dst_start + i] = (src[i] + (a + b) // 2) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                a = out[dst_start + i - channels] if i >= channels else 0
                b = out[prev_start + i] if y > 0 else 0
                c = out[prev_start + i - channels] if (y > 0 and i >= channels) else 0
                out[dst_start + i] = (src[i] + _paeth(a, b, c)) & 0xFF
        else:
            raise DecodeError(f"unknown scanline filter {ftype}")
        prev_start = dst_start
    return width, height, channels, out


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa = abs(p - a)
    pb = abs(p - b)
    pc = abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c
