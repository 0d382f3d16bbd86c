"""Discrete axes for observation, valuation, and action spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """An ascending axis of discrete points spanning a closed interval.

    ``points`` must be strictly increasing with ``points[0] == lower`` and
    ``points[-1] == upper``.  The coarseness is the largest half-gap between
    adjacent points: any value in the interval is at most ``coarseness`` away
    from its nearest grid point.
    """

    points: np.ndarray
    lower: float
    upper: float
    _midpoints: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least 2 points on one axis")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] != self.lower or pts[-1] != self.upper:
            raise ValueError("grid points must span [lower, upper] exactly")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_midpoints", (pts[:-1] + pts[1:]) / 2.0)

    @property
    def count(self) -> int:
        return self.points.size

    @property
    def coarseness(self) -> float:
        return float(np.max(np.diff(self.points)) / 2.0)

    def nearest_index(self, x):
        """Index of the grid point closest to ``x`` (scalar or array).

        Values outside the interval are clamped to the bounds.  Exact
        midpoints between two grid points resolve to the lower index.
        """
        x = np.clip(x, self.lower, self.upper)
        return np.searchsorted(self._midpoints, x, side="left")

    def nearest_point(self, x: float) -> tuple[int, float]:
        """Closest grid (index, value) pair for a scalar ``x``."""
        idx = int(self.nearest_index(x))
        return idx, float(self.points[idx])

    def snap(self, x):
        """Map values to their nearest grid points."""
        return self.points[self.nearest_index(x)]


def make_uniform_grid(lower: float, upper: float, count: int) -> Grid:
    """Equidistant grid of ``count`` points spanning ``[lower, upper]``."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    pts = np.linspace(lower, upper, count)
    return Grid(pts, float(lower), float(upper))


def discretize_density(grid: Grid, density) -> np.ndarray:
    """Probability vector proportional to ``density`` evaluated on the grid.

    The density is evaluated at the grid points and normalized to sum to one.
    """
    vals = np.asarray(density(grid.points), dtype=np.float64)
    vals = np.broadcast_to(vals, grid.points.shape).copy()
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("density must be finite and nonnegative on the grid")
    total = vals.sum()
    if total <= 0:
        raise ValueError("density vanishes on every grid point (degenerate prior)")
    return vals / total
