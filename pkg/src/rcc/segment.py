"""Object localization: blur, threshold, edges, contours, bounding box.

The default pipeline is gray -> Gaussian blur -> adaptive threshold ->
contour tracing -> largest component -> axis-aligned bounding rectangle.
An alternative edge-driven mode replaces the threshold step with Sobel
magnitude, a fixed edge threshold, and one binary dilation pass to close
small gaps before tracing.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .image import GrayImage, Image, rgb_to_gray, round_half_away


class NoObjectError(Exception):
    """The mask contains no foreground component to box."""


@dataclass(frozen=True)
class BinaryMask:
    """Foreground/background bitmap; True marks foreground."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
        arr = arr.astype(bool).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class Contour:
    """Closed outer boundary as an ordered list of (col, row) points."""

    points: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pts = tuple((int(c), int(r)) for c, r in self.points)
        if not pts:
            raise ValueError("contour must contain at least one point")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class BoundRect:
    """Axis-aligned box: left column, top row, width, height."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin ({self.x}, {self.y}) must be non-negative")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box size {self.w}x{self.h} must be at least 1x1")


@dataclass(frozen=True)
class SegmentationConfig:
    """Tunable knobs of detect_bounding_box; defaults match the CLI."""

    mode: str = "adaptive"  # "adaptive" or "sobel"
    sigma: float = 1.4
    window: int = 11
    c: float = 2.0
    sobel_threshold: int = 80
    dilate_passes: int = 1  # gap closing before tracing, sobel mode only
    polarity: str = "dark"  # foreground side of the local mean: "dark" or "light"

    def __post_init__(self):
        if self.mode not in ("adaptive", "sobel"):
            raise ValueError(f"unknown segmentation mode {self.mode!r}")
        if self.polarity not in ("dark", "light"):
            raise ValueError(f"unknown polarity {self.polarity!r}")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian taps of length 2*ceil(3*sigma)+1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _replicate_pad_1d(values: np.ndarray, radius: int, axis: int) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    return np.pad(values, pad, mode="edge")


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur, replicate borders, rounded once at the end."""
    kernel = gaussian_kernel(sigma)
    radius = len(kernel) // 2
    acc = img.pixels.astype(np.float64)
    for axis in (1, 0):  # horizontal pass, then vertical
        padded = _replicate_pad_1d(acc, radius, axis)
        acc = np.zeros_like(acc)
        for t, weight in enumerate(kernel):
            if axis == 1:
                acc += weight * padded[:, t : t + img.width]
            else:
                acc += weight * padded[t : t + img.height, :]
    return GrayImage(np.clip(round_half_away(acc), 0, 255).astype(np.uint8))


def _window_means(gray: np.ndarray, window: int) -> np.ndarray:
    """Exact window x window neighborhood means with replicated borders.

    Sums are integer (int64) so the mean is a single exact division;
    this keeps the fast path bit-identical to a per-pixel oracle.
    """
    radius = window // 2
    padded = np.pad(gray.astype(np.int64), radius, mode="edge")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = gray.shape
    sums = (
        integral[window:, window:]
        - integral[:-window, window:]
        - integral[window:, :-window]
        + integral[:-window, :-window]
    )
    assert sums.shape == (h, w)
    return sums / float(window * window)


def adaptive_threshold(img: GrayImage, window: int, c: float) -> BinaryMask:
    """Mark pixels darker than their local window mean minus the offset c."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    means = _window_means(img.pixels, window)
    return BinaryMask(img.pixels.astype(np.float64) < means - c)


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.int64)


def sobel_magnitude(img: GrayImage) -> GrayImage:
    """Gradient magnitude from the 3x3 Sobel pair, clamped to [0, 255]."""
    if img.width < 3 or img.height < 3:
        raise ValueError(f"image {img.width}x{img.height} is smaller than 3x3")
    padded = np.pad(img.pixels.astype(np.int64), 1, mode="edge")
    h, w = img.height, img.width
    gx = np.zeros((h, w), dtype=np.int64)
    gy = np.zeros((h, w), dtype=np.int64)
    for m in range(3):
        for n in range(3):
            patch = padded[m : m + h, n : n + w]
            gx += _SOBEL_X[m, n] * patch
            gy += _SOBEL_Y[m, n] * patch
    mag = np.sqrt(gx.astype(np.float64) ** 2 + gy.astype(np.float64) ** 2)
    return GrayImage(np.clip(round_half_away(mag), 0, 255).astype(np.uint8))


def label_components(
    mask: BinaryMask,
) -> tuple[np.ndarray, list[int], list[tuple[int, int]]]:
    """8-connected component labels in scan order.

    Returns (label array with -1 for background, per-component pixel
    counts, per-component first pixel in row-major order).  Component k
    is the k-th component encountered scanning row-major, which fixes the
    tie-break used by largest_contour; its first pixel always has a
    background West neighbor, the precondition of _trace_boundary.
    """
    bits = mask.bits
    h, w = bits.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    counts: list[int] = []
    starts: list[tuple[int, int]] = []
    for row in range(h):
        for col in np.flatnonzero(bits[row]):
            if labels[row, col] >= 0:
                continue
            component = len(counts)
            count = 0
            queue = deque([(int(col), row)])
            labels[row, col] = component
            while queue:
                cx, cy = queue.popleft()
                count += 1
                for ny in range(max(cy - 1, 0), min(cy + 2, h)):
                    for nx in range(max(cx - 1, 0), min(cx + 2, w)):
                        if bits[ny, nx] and labels[ny, nx] < 0:
                            labels[ny, nx] = component
                            queue.append((nx, ny))
            counts.append(count)
            starts.append((int(col), row))
    return labels, counts, starts


# Moore neighborhood in clockwise order starting at West, as (dx, dy)
# with rows growing downward.
_MOORE = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def _trace_boundary(bits: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor trace of one outer boundary.

    `start` is the component's first pixel in row-major scan order, so its
    West neighbor is guaranteed background; tracing stops when the first
    move (start -> second point) is about to repeat, which closes the
    boundary exactly once.
    """
    h, w = bits.shape

    def foreground(px: int, py: int) -> bool:
        return 0 <= px < w and 0 <= py < h and bits[py, px]

    contour = [start]
    p = start
    backtrack = (start[0] - 1, start[1])
    first_move: tuple[int, int] | None = None
    limit = 4 * int(bits.sum()) + 8
    for _ in range(limit):
        base = _MOORE_INDEX[(backtrack[0] - p[0], backtrack[1] - p[1])]
        found = None
        for step in range(1, 9):
            dx, dy = _MOORE[(base + step) % 8]
            if foreground(p[0] + dx, p[1] + dy):
                found = (p[0] + dx, p[1] + dy)
                prev_dx, prev_dy = _MOORE[(base + step - 1) % 8]
                backtrack = (p[0] + prev_dx, p[1] + prev_dy)
                break
        if found is None:
            return contour  # isolated pixel
        if first_move is None:
            first_move = found
        elif p == start and found == first_move:
            break  # about to repeat the opening move: boundary is closed
        contour.append(found)
        p = found
    if len(contour) > 1 and contour[-1] == contour[0]:
        contour.pop()
    return contour


def trace_contours(mask: BinaryMask) -> list[Contour]:
    """One closed outer boundary per 8-connected foreground component."""
    _, _, starts = label_components(mask)
    return [Contour(tuple(_trace_boundary(mask.bits, start))) for start in starts]


def largest_contour(contours: list[Contour], mask: BinaryMask) -> Contour:
    """Contour of the component with the most foreground pixels.

    Ties go to the component whose first scan-order pixel comes first.
    """
    if not contours:
        raise NoObjectError("no contours to choose from")
    labels, counts, _ = label_components(mask)
    best = None
    best_count = -1
    for contour in contours:
        col, row = contour.points[0]
        component = int(labels[row, col])
        if component < 0:
            raise ValueError(f"contour start ({col}, {row}) is not foreground")
        if counts[component] > best_count:
            best = contour
            best_count = counts[component]
    assert best is not None
    return best


def minimum_bounding_rect(contour: Contour) -> BoundRect:
    """Axis-aligned extent of the contour points, inclusive."""
    cols = [p[0] for p in contour.points]
    rows = [p[1] for p in contour.points]
    return BoundRect(
        x=min(cols),
        y=min(rows),
        w=max(cols) - min(cols) + 1,
        h=max(rows) - min(rows) + 1,
    )


def dilate(mask: BinaryMask, passes: int = 1) -> BinaryMask:
    """Binary dilation with the full 3x3 structuring element."""
    bits = mask.bits
    for _ in range(passes):
        padded = np.pad(bits, 1, mode="constant")
        grown = np.zeros_like(bits)
        h, w = bits.shape
        for dy in range(3):
            for dx in range(3):
                grown |= padded[dy : dy + h, dx : dx + w]
        bits = grown
    return BinaryMask(bits)


def detect_bounding_box(img: Image, cfg: SegmentationConfig | None = None) -> BoundRect:
    """Locate the dominant object and return its bounding rectangle."""
    cfg = cfg or SegmentationConfig()
    blurred = gaussian_blur(rgb_to_gray(img), cfg.sigma)
    if cfg.mode == "adaptive":
        if cfg.polarity == "dark":
            mask = adaptive_threshold(blurred, cfg.window, cfg.c)
        else:
            means = _window_means(blurred.pixels, cfg.window)
            mask = BinaryMask(blurred.pixels.astype(np.float64) > means + cfg.c)
    else:
        edges = sobel_magnitude(blurred)
        mask = BinaryMask(edges.pixels > cfg.sobel_threshold)
        if cfg.dilate_passes > 0:
            mask = dilate(mask, cfg.dilate_passes)
    contours = trace_contours(mask)
    if not contours:
        raise NoObjectError("no foreground component found")
    return minimum_bounding_rect(largest_contour(contours, mask))
