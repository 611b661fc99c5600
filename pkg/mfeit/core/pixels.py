"""Cartesian pixel grid clipped to the domain disk."""

from __future__ import annotations

# Import built-in modules
from dataclasses import dataclass, field

# Import third-party modules
import numpy as np

# Import local modules
from mfeit.core.geometry import ThinInsulator, point_segment_distance
from mfeit.errors import ConfigError, DimensionMismatch


@dataclass(frozen=True)
class Pixelation:
    """``n_grid`` x ``n_grid`` cells over the bounding square; a cell is active if it meets the disk."""

    n_grid: int = 32
    radius: float = 1.0
    cells: np.ndarray = field(init=False, repr=False, compare=False)
    index_grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_grid < 1:
            raise ConfigError("n_grid must be a positive integer")
        size = self.cell_size
        lo = -self.radius + size * np.arange(self.n_grid)
        hi = lo + size
        # closest point of each cell to the origin
        near_x = np.where((lo <= 0.0) & (hi >= 0.0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
        ix, iy = np.meshgrid(np.arange(self.n_grid), np.arange(self.n_grid), indexing="ij")
        active = np.hypot(near_x[ix], near_x[iy]) < self.radius
        index_grid = np.full((self.n_grid, self.n_grid), -1, dtype=np.int64)
        index_grid[active] = np.arange(int(active.sum()))
        cells = np.column_stack([ix[active], iy[active]])
        index_grid.setflags(write=False)
        cells.setflags(write=False)
        object.__setattr__(self, "index_grid", index_grid)
        object.__setattr__(self, "cells", cells)

    @property
    def cell_size(self) -> float:
        return 2.0 * self.radius / self.n_grid

    @property
    def size(self) -> int:
        return int(self.cells.shape[0])

    @property
    def centers(self) -> np.ndarray:
        return -self.radius + (self.cells + 0.5) * self.cell_size

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Pixel index of each point, -1 for points outside every active cell."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts + self.radius) / self.cell_size).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < self.n_grid), axis=1)
        out = np.full(pts.shape[0], -1, dtype=np.int64)
        out[inside] = self.index_grid[idx[inside, 0], idx[inside, 1]]
        return out

    def check(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values)
        if arr.shape[0] != self.size:
            raise DimensionMismatch(f"expected {self.size} pixel values, got {arr.shape[0]}")
        return arr

    def to_grid(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Scatter pixel values onto the full grid; row index is y (top row = largest y)."""
        vals = self.check(values)
        grid = np.full((self.n_grid, self.n_grid), fill, dtype=vals.dtype if np.iscomplexobj(vals) else float)
        grid[self.cells[:, 0], self.cells[:, 1]] = vals
        return grid.T[::-1]

    # -- regions of interest ---------------------------------------------------

    def disk_mask(self, center: tuple[float, float], radius: float) -> np.ndarray:
        c = self.centers
        return np.hypot(c[:, 0] - center[0], c[:, 1] - center[1]) <= radius

    def segment_mask(self, segment: ThinInsulator, width: float | None = None) -> np.ndarray:
        reach = self.cell_size if width is None else width
        return np.array([point_segment_distance(c, segment.p, segment.q) <= reach for c in self.centers])

    def background_mask(self, *rois: np.ndarray, margin: int = 2) -> np.ndarray:
        """Active pixels farther than ``margin`` cells from every ROI pixel."""
        excluded = np.zeros(self.size, dtype=bool)
        for roi in rois:
            excluded |= np.asarray(roi, dtype=bool)
        if not excluded.any():
            return ~excluded
        c = self.centers
        hits = c[excluded]
        dist = np.min(np.hypot(c[:, None, 0] - hits[None, :, 0], c[:, None, 1] - hits[None, :, 1]), axis=1)
        return dist > margin * self.cell_size
