"""Color-cube extraction: a 3x3 grid of fixed-size patches from a box.

The detected object is cropped, upscaled if it is too small to host the
grid, and sampled at nine cell midpoints.  Each cube is classified on its
own; aggregate_votes folds the nine per-cube probability vectors into a
single label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import Image
from .segment import BoundRect

CUBE_SIZE = 32
GRID_SIDE = 3


@dataclass(frozen=True)
class CubeSpec:
    """Edge length of one cube and of the full grid footprint."""

    size: int = CUBE_SIZE

    def __post_init__(self):
        if self.size < 2 or self.size % 2:
            raise ValueError(f"cube size must be even and >= 2, got {self.size}")

    @property
    def footprint(self) -> int:
        return GRID_SIDE * self.size


@dataclass(frozen=True)
class CubeGrid:
    """Nine cubes with their centers and rects in resized-crop coordinates.

    Order is column-major over the grid: index k = 3*i + j where i is the
    grid column and j the grid row, both counted from the top-left.
    """

    cubes: tuple[Image, ...]
    centers: tuple[tuple[int, int], ...]
    rects: tuple[BoundRect, ...]
    crop_size: tuple[int, int]  # (width, height) after any upscaling

    def __post_init__(self):
        n = GRID_SIDE * GRID_SIDE
        if not (len(self.cubes) == len(self.centers) == len(self.rects) == n):
            raise ValueError(f"grid must hold exactly {n} cubes")


def crop(img: Image, rect: BoundRect) -> Image:
    """Cut the rectangle out of the image; rect must lie inside it."""
    if rect.x + rect.w > img.width or rect.y + rect.h > img.height:
        raise ValueError(
            f"rect {rect} exceeds image bounds {img.width}x{img.height}"
        )
    return Image(img.pixels[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w])


def resize_nearest(img: Image, new_w: int, new_h: int) -> Image:
    """Nearest-neighbor resize: each target pixel reads the source pixel
    under its center, src = floor((dst + 0.5) * src_extent / dst_extent)."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target size {new_w}x{new_h} must be positive")
    cols = np.minimum(
        ((np.arange(new_w) + 0.5) * img.width / new_w).astype(np.int64),
        img.width - 1,
    )
    rows = np.minimum(
        ((np.arange(new_h) + 0.5) * img.height / new_h).astype(np.int64),
        img.height - 1,
    )
    return Image(img.pixels[rows[:, None], cols[None, :]])


def cube_centers(width: int, height: int) -> tuple[tuple[int, int], ...]:
    """Midpoints of the 3x3 cells over a width x height area.

    Cell (i, j) is centered at x = (2i+1)*W/6, y = (2j+1)*H/6, rounded to
    the nearest pixel; ordering is column-major (i outer, j inner).
    """
    centers = []
    for i in range(GRID_SIDE):
        x1 = round((2 * i + 1) * width / 6)
        for j in range(GRID_SIDE):
            y1 = round((2 * j + 1) * height / 6)
            centers.append((x1, y1))
    return tuple(centers)


def extract_color_cubes(
    img: Image, rect: BoundRect, spec: CubeSpec | None = None
) -> CubeGrid:
    """Crop the box and sample nine size x size cubes at cell midpoints.

    Crops smaller than the 3x3 footprint in either dimension are upscaled
    (nearest neighbor, aspect preserved up to rounding) until both
    dimensions fit, so every cube lies fully inside the crop.
    """
    spec = spec or CubeSpec()
    area = crop(img, rect)
    need = spec.footprint
    if area.width < need or area.height < need:
        factor = max(need / area.width, need / area.height)
        new_w = max(math.ceil(area.width * factor), need)
        new_h = max(math.ceil(area.height * factor), need)
        area = resize_nearest(area, new_w, new_h)
    half = spec.size // 2
    centers = cube_centers(area.width, area.height)
    cubes = []
    rects = []
    for x1, y1 in centers:
        left, top = x1 - half, y1 - half
        cube_rect = BoundRect(left, top, spec.size, spec.size)
        cubes.append(crop(area, cube_rect))
        rects.append(cube_rect)
    return CubeGrid(
        cubes=tuple(cubes),
        centers=centers,
        rects=tuple(rects),
        crop_size=(area.width, area.height),
    )


def aggregate_votes(
    labels: list[int], confidences: np.ndarray
) -> tuple[int, float]:
    """Fold nine per-cube predictions into one label.

    `labels` holds the nine per-cube class indices, `confidences` the
    matching (9, n_classes) probability vectors (each summing to 1).
    Majority vote over the labels; ties go to the tied class with the
    greatest mean probability over all nine cubes.  Returns (label index,
    mean probability of that label).
    """
    n = GRID_SIDE * GRID_SIDE
    if len(labels) != n:
        raise ValueError(f"expected {n} labels, got {len(labels)}")
    confidences = np.asarray(confidences, dtype=np.float64)
    if confidences.ndim != 2 or confidences.shape[0] != n:
        raise ValueError(
            f"expected (9, n_classes) confidences, got {confidences.shape}"
        )
    if not np.allclose(confidences.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("each confidence vector must sum to 1")
    votes = np.bincount(np.asarray(labels), minlength=confidences.shape[1])
    means = confidences.mean(axis=0)
    tied = np.flatnonzero(votes == votes.max())
    label = int(tied[np.argmax(means[tied])])
    return label, float(means[label])
