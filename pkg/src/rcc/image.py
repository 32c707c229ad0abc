"""Image containers, color conversion, and PPM (P6) file I/O.

The on-disk format is binary PPM with maxval 255: ``P6\\n{w} {h}\\n255\\n``
followed by width*height*3 bytes row-major.  Writing emits exactly that
canonical form; reading additionally tolerates ``#`` comments and arbitrary
whitespace between header tokens, so the round trip is bit-exact for
canonical streams.

Rounding rule used across the whole package: round half away from zero,
then clamp to the target range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class PpmError(ValueError):
    """Base class for PPM stream problems."""


class PpmHeaderError(PpmError):
    """Magic number or header tokens are not a valid P6 header."""


class PpmMaxvalError(PpmError):
    """Stream declares a maxval other than 255."""


class PpmTruncatedError(PpmError):
    """Pixel payload is shorter or longer than the header promises."""


def round_half_away(values: np.ndarray | float) -> np.ndarray:
    """Round half away from zero (0.5 -> 1, -0.5 -> -1), as float."""
    arr = np.asarray(values, dtype=np.float64)
    return np.sign(arr) * np.floor(np.abs(arr) + 0.5)


def _as_channel_array(pixels: np.ndarray, expect_ndim: int) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != expect_ndim:
        raise ValueError(f"expected {expect_ndim}-d pixel array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image must have at least one pixel")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    else:
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """RGB raster, 8-bit channels, stored as a read-only (h, w, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_channel_array(self.pixels, 3)
        if arr.shape[2] != 3:
            raise ValueError(f"expected 3 channels, got {arr.shape[2]}")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit raster, read-only (h, w) array."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_channel_array(self.pixels, 2))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


class HsvPixel(NamedTuple):
    h: float  # degrees, [0, 360)
    s: float  # [0, 1]
    v: float  # [0, 1]


def write_ppm(img: Image) -> bytes:
    """Serialize to the canonical P6 byte stream."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def _read_header_tokens(data: bytes, start: int, count: int) -> tuple[list[bytes], int]:
    """Read whitespace-separated tokens, skipping # comments to end of line."""
    tokens: list[bytes] = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        if i >= n:
            raise PpmHeaderError("unexpected end of stream in header")
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j] != ord("#"):
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_ppm(data: bytes) -> Image:
    """Parse a binary PPM (P6, maxval 255) byte stream."""
    if len(data) < 2 or data[:2] != b"P6":
        raise PpmHeaderError("missing P6 magic number")
    try:
        tokens, pos = _read_header_tokens(data, 2, 3)
        width, height, maxval = (int(t) for t in tokens)
    except PpmHeaderError:
        raise
    except ValueError as exc:
        raise PpmHeaderError(f"non-numeric header token: {exc}") from exc
    if width < 1 or height < 1:
        raise PpmHeaderError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PpmMaxvalError(f"unsupported maxval {maxval}, only 255 is accepted")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PpmHeaderError("missing whitespace after maxval")
    payload = data[pos + 1 :]
    expected = width * height * 3
    if len(payload) != expected:
        raise PpmTruncatedError(
            f"payload holds {len(payload)} bytes, header promises {expected}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image(pixels)


def rgb_to_gray(img: Image) -> GrayImage:
    """BT.601 luma: gray = round(0.299 r + 0.587 g + 0.114 b)."""
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    gray = np.clip(round_half_away(luma), 0, 255).astype(np.uint8)
    return GrayImage(gray)


def rgb_to_hsv(r: float, g: float, b: float) -> HsvPixel:
    """Hexcone conversion of channels in [0, 255] to (h deg, s, v) fractions.

    h = 0 whenever s = 0 (achromatic input).
    """
    for name, c in (("r", r), ("g", g), ("b", b)):
        if not 0 <= c <= 255:
            raise ValueError(f"channel {name}={c} outside [0, 255]")
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    cmax = max(rf, gf, bf)
    cmin = min(rf, gf, bf)
    delta = cmax - cmin
    v = cmax
    s = 0.0 if cmax == 0 else delta / cmax
    if delta == 0 or s == 0:
        return HsvPixel(0.0, s, v)
    if cmax == rf:
        h = 60.0 * (((gf - bf) / delta) % 6.0)
    elif cmax == gf:
        h = 60.0 * ((bf - rf) / delta + 2.0)
    else:
        h = 60.0 * ((rf - gf) / delta + 4.0)
    if h >= 360.0:
        h -= 360.0
    return HsvPixel(h, s, v)
