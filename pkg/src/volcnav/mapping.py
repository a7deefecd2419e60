"""Robot-centric 2.5D elevation map: height fusion, traversability, refinement.

The map is a square grid that recenters on the robot in whole-cell steps so
cells stay world-aligned. Heights fuse incoming range samples with an
exponential moving average; traversability is a geometric score (slope and
detrended roughness); refinement inpaints small unknown holes and dilates low
scores with a minimum filter to widen safety margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geo import Pose
from .world import World, DEFAULT_CRITICAL_SLOPE

EMA_NEW_SAMPLE_WEIGHT = 0.3


@dataclass
class TraversabilityParams:
    critical_slope: float = DEFAULT_CRITICAL_SLOPE
    roughness_window: int = 5
    roughness_weight: float = 8.0
    dilation_kernel: float = 0.24
    inpaint_max_hole: int = 40

    def kernel_cells(self, resolution: float) -> int:
        k = max(1, int(round(self.dilation_kernel / resolution)))
        if k % 2 == 0:
            k += 1
        return k


class ElevationMap:
    def __init__(self, center=(0.0, 0.0), size: float = 12.0, resolution: float = 0.06):
        self.resolution = float(resolution)
        self.cells = int(round(size / resolution))
        self.size = self.cells * self.resolution
        self.center = np.array([float(center[0]), float(center[1])])
        self.height = np.full((self.cells, self.cells), np.nan)
        self.traversability = np.full((self.cells, self.cells), np.nan)
        offs = (np.arange(self.cells) - (self.cells - 1) / 2.0) * self.resolution
        self._offs = offs
        self._coords = None

    def cell_coords(self):
        """World (east, north) of every cell center as two 2-D arrays."""
        if self._coords is None:
            self._coords = np.meshgrid(self.center[0] + self._offs, self.center[1] + self._offs)
        return self._coords

    def world_to_cell(self, x, y):
        i = np.rint((np.asarray(x) - self.center[0]) / self.resolution + (self.cells - 1) / 2.0).astype(int)
        j = np.rint((np.asarray(y) - self.center[1]) / self.resolution + (self.cells - 1) / 2.0).astype(int)
        return j, i

    def in_bounds(self, j, i):
        return (j >= 0) & (j < self.cells) & (i >= 0) & (i < self.cells)

    def recenter(self, position):
        """Shift the grid in whole cells so `position` is at most one cell off center."""
        delta = np.asarray(position[:2], dtype=float) - self.center
        shift = np.rint(delta / self.resolution).astype(int)
        if abs(shift[0]) <= 1 and abs(shift[1]) <= 1:
            return
        for layer in (self.height, self.traversability):
            shifted = np.full_like(layer, np.nan)
            src_j = slice(max(0, shift[1]), self.cells + min(0, shift[1]))
            src_i = slice(max(0, shift[0]), self.cells + min(0, shift[0]))
            dst_j = slice(max(0, -shift[1]), self.cells + min(0, -shift[1]))
            dst_i = slice(max(0, -shift[0]), self.cells + min(0, -shift[0]))
            shifted[dst_j, dst_i] = layer[src_j, src_i]
            layer[:] = shifted
        self.center = self.center + shift * self.resolution
        self._coords = None

    def update(self, robot_position, samples, unique_cells: bool = False):
        """Fuse world-frame range samples (N, 3); EMA weight 0.3 on new hits.

        Samples landing in the same cell within one batch are folded in
        order, matching a sequential per-hit update. `unique_cells` skips the
        duplicate-folding sort when the caller guarantees one sample per cell
        (the simulated full-footprint scan does).
        """
        self.recenter(robot_position)
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            return self
        if not np.all(np.isfinite(samples)):
            raise ValueError("range samples must be finite")
        j, i = self.world_to_cell(samples[:, 0], samples[:, 1])
        ok = self.in_bounds(j, i)
        j, i, z = j[ok], i[ok], samples[ok, 2]
        if unique_cells:
            current = self.height[j, i]
            fresh = np.isnan(current)
            self.height[j, i] = np.where(
                fresh, z, (1 - EMA_NEW_SAMPLE_WEIGHT) * current + EMA_NEW_SAMPLE_WEIGHT * z
            )
            return self
        ids = j * self.cells + i
        order = np.argsort(ids, kind="stable")
        ids, j, i, z = ids[order], j[order], i[order], z[order]
        uniq, start, counts = np.unique(ids, return_index=True, return_counts=True)
        single = counts == 1
        sj, si, sz = j[start[single]], i[start[single]], z[start[single]]
        current = self.height[sj, si]
        fresh = np.isnan(current)
        merged = np.where(fresh, sz, (1 - EMA_NEW_SAMPLE_WEIGHT) * current + EMA_NEW_SAMPLE_WEIGHT * sz)
        self.height[sj, si] = merged
        for s, c in zip(start[~single], counts[~single]):
            for k in range(s, s + c):
                cur = self.height[j[k], i[k]]
                if np.isnan(cur):
                    self.height[j[k], i[k]] = z[k]
                else:
                    self.height[j[k], i[k]] = (1 - EMA_NEW_SAMPLE_WEIGHT) * cur + EMA_NEW_SAMPLE_WEIGHT * z[k]
        return self

    def score_traversability(self, params: TraversabilityParams | None = None):
        """Geometric score per known cell: slope term times roughness term.

        Slope comes from central differences of the height layer; roughness
        is the windowed RMS of the height after removing its windowed mean,
        so planes (any tilt) have zero roughness. Unknown cells stay unknown.
        """
        params = params or TraversabilityParams()
        h = self.height
        dzdy, dzdx = np.gradient(h, self.resolution)
        slope = np.arctan(np.hypot(dzdx, dzdy))
        # masked windowed statistics: unknown cells must not poison the
        # running-sum filters, they just drop out of the window
        w = params.roughness_window
        known = np.isfinite(h)
        h0 = np.where(known, h, 0.0)
        cnt = ndimage.uniform_filter(known.astype(float), size=w, mode="nearest")
        cnt = np.maximum(cnt, 1e-12)
        local_mean = ndimage.uniform_filter(h0, size=w, mode="nearest") / cnt
        detrended = np.where(known, h - local_mean, 0.0)
        var = ndimage.uniform_filter(detrended**2, size=w, mode="nearest") / cnt
        roughness = np.sqrt(np.maximum(var, 0.0))
        slope_term = np.clip(1.0 - slope / params.critical_slope, 0.0, 1.0)
        rough_term = np.clip(1.0 - params.roughness_weight * roughness, 0.0, 1.0)
        score = slope_term * rough_term
        score[~known] = np.nan
        self.traversability = score
        return self

    def refine(self, params: TraversabilityParams | None = None):
        """Inpaint small unknown holes, zero the rest, then min-filter dilate.

        Holes up to `inpaint_max_hole` cells fill iteratively with the mean
        of known neighbors; larger unknown regions become obstacles (score 0)
        so downstream fields treat them conservatively. Dilation expands low
        scores over the odd-sized structuring element.
        """
        params = params or TraversabilityParams()
        t = self.traversability
        unknown = np.isnan(t)
        if unknown.any():
            labels, n_labels = ndimage.label(unknown)
            sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n_labels + 1))
            fill_mask = np.isin(labels, np.nonzero(sizes <= params.inpaint_max_hole)[0] + 1)
            t = t.copy()
            while True:
                target = fill_mask & np.isnan(t)
                if not target.any():
                    break
                known = ~np.isnan(t)
                vals = np.where(known, t, 0.0)
                ksum = ndimage.uniform_filter(vals, size=3, mode="constant") * 9.0
                kcnt = ndimage.uniform_filter(known.astype(float), size=3, mode="constant") * 9.0
                ready = target & (kcnt > 0.5)
                if not ready.any():
                    break
                t[ready] = ksum[ready] / kcnt[ready]
            t = np.where(np.isnan(t), 0.0, t)
        k = params.kernel_cells(self.resolution)
        self.traversability = ndimage.minimum_filter(t, size=k, mode="nearest")
        return self

    def copy(self) -> "ElevationMap":
        out = ElevationMap(self.center, self.size, self.resolution)
        out.height = self.height.copy()
        out.traversability = self.traversability.copy()
        return out


def simulate_range_scan(world: World, true_pose: Pose, believed_pose: Pose,
                        grid: ElevationMap, radius: float = 9.0) -> np.ndarray:
    """Terrain samples for one map update, registered in the believed frame.

    For each map cell center c (in the frame the robot believes it is in),
    the physically sensed point is T_true * T_believed^-1 applied to c; its
    true terrain height is recorded at c. With a perfect estimate this is an
    exact scan; with estimate error the map shifts accordingly, which is the
    behavior the navigation stack has to live with.
    """
    xx, yy = grid.cell_coords()
    dx = xx - believed_pose.position[0]
    dy = yy - believed_pose.position[1]
    mask = dx * dx + dy * dy <= radius * radius
    cx, cy = xx[mask], yy[mask]
    rel = np.stack([cx - believed_pose.position[0], cy - believed_pose.position[1]], axis=1)
    dyaw = true_pose.yaw - believed_pose.yaw
    c, s = math.cos(dyaw), math.sin(dyaw)
    px = true_pose.position[0] + c * rel[:, 0] - s * rel[:, 1]
    py = true_pose.position[1] + s * rel[:, 0] + c * rel[:, 1]
    e0, n0, e1, n1 = world.height.bounds()
    inside = (px >= e0) & (px <= e1) & (py >= n0) & (py <= n1)
    if not inside.any():
        return np.empty((0, 3))
    hz = world.height._sample_unchecked(px[inside], py[inside])
    return np.stack([cx[inside], cy[inside], hz], axis=1)
