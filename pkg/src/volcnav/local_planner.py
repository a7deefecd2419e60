"""Path following and field-based local planning.

The path manager projects the robot onto the resampled global path, measures
local curvature from forward/backward secants, adapts the lookahead distance
to it, and places the goal as an exponentially weighted average of upcoming
path samples. The local planner turns the elevation map into a pair of
scalar fields: a normalized Euclidean distance-to-obstacle field (repulsion)
and a geodesic shortest-cost distance-to-goal field (attraction), then blends
their gradients into a velocity command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sparse_dijkstra

from .geo import Pose, wrap_angle
from .mapping import ElevationMap

OBSTACLE_THRESHOLD = 0.2


class FieldError(RuntimeError):
    """Goal cell unusable: blocked and no traversable cell within snap range."""


@dataclass
class PathManagerConfig:
    lookahead_min: float = 1.0
    lookahead_max: float = 5.0
    curvature_ref: float = 0.3      # 1/m; curvature at which lookahead halves
    spacing: float = 0.5            # shared with global-path resampling
    weighting_decay: float = 0.5    # 1/m
    secant_span: int = 4            # vertices per secant
    update_rate_hz: float = 0.5

    def __post_init__(self):
        if not (0 < self.lookahead_min < self.lookahead_max):
            raise ValueError("need 0 < lookahead_min < lookahead_max")
        if self.curvature_ref <= 0 or self.spacing <= 0 or self.weighting_decay <= 0:
            raise ValueError("curvature_ref, spacing, weighting_decay must be > 0")


def project_to_path(path_xy: np.ndarray, position) -> int:
    """Index of the closest path vertex; ties resolve to the larger index."""
    p = np.asarray(position, dtype=float)[:2]
    d = np.hypot(*(np.asarray(path_xy)[:, :2] - p).T)
    reversed_argmin = int(np.argmin(d[::-1]))
    return len(d) - 1 - reversed_argmin


def curvature(path_xy: np.ndarray, i: int, span: int = 4) -> float:
    """Secant-based curvature at vertex i: angle between the forward and
    backward secants divided by the backward secant length.

    The span clamps to the vertices available on both sides; endpoints and
    degenerate (zero-length) secants give zero curvature.
    """
    path_xy = np.asarray(path_xy)
    n = len(path_xy)
    k = min(span, i, n - 1 - i)
    if k <= 0:
        return 0.0
    forward = path_xy[i + k, :2] - path_xy[i, :2]
    backward = path_xy[i, :2] - path_xy[i - k, :2]
    nf, nb = np.linalg.norm(forward), np.linalg.norm(backward)
    if nf < 1e-12 or nb < 1e-12:
        return 0.0
    cosang = float(np.clip(forward @ backward / (nf * nb), -1.0, 1.0))
    theta = math.acos(cosang)
    return theta / nb


def lookahead_distance(kappa: float, config: PathManagerConfig) -> float:
    """Curvature-adaptive lookahead: max on straights, min in tight turns."""
    return config.lookahead_min + (config.lookahead_max - config.lookahead_min) / (
        1.0 + abs(kappa) / config.curvature_ref
    )


def lookahead_waypoint(path_xy: np.ndarray, i: int, distance: float, config: PathManagerConfig) -> np.ndarray:
    """Goal as an exponentially weighted average of the next N path samples.

    Weights fall off with arc distance from the anchor; samples past the end
    of the path clamp to the final vertex. An anchor at the path end returns
    the final vertex itself.
    """
    path_xy = np.asarray(path_xy, dtype=float)
    n = len(path_xy)
    if i >= n - 1:
        return path_xy[-1, :2].copy()
    count = max(1, int(round(distance / config.spacing)))
    idx = np.minimum(i + np.arange(1, count + 1), n - 1)
    w = np.exp(-config.weighting_decay * np.arange(1, count + 1) * config.spacing)
    w = w / w.sum()
    return (w[:, None] * path_xy[idx, :2]).sum(axis=0)


@dataclass
class PathTarget:
    anchor_index: int
    curvature: float
    lookahead: float
    samples_ahead: int
    goal: np.ndarray
    at_end: bool


class PathManager:
    """Owns anchor tracking along one resampled path; updated at a slow cadence."""

    def __init__(self, path_xy: np.ndarray, config: PathManagerConfig | None = None):
        self.path = np.asarray(path_xy, dtype=float)
        self.config = config or PathManagerConfig()
        self.events: list[str] = []

    def update(self, position) -> PathTarget:
        i = project_to_path(self.path, position)
        kappa = curvature(self.path, i, self.config.secant_span)
        dist = lookahead_distance(kappa, self.config)
        goal = lookahead_waypoint(self.path, i, dist, self.config)
        at_end = i >= len(self.path) - 1
        n = max(1, int(round(dist / self.config.spacing)))
        return PathTarget(i, kappa, dist, n, goal, at_end)


def euclidean_distance_field(obstacles: np.ndarray, resolution: float) -> np.ndarray:
    """Exact Euclidean distance (meters) to the nearest obstacle cell."""
    obstacles = np.asarray(obstacles, dtype=bool)
    if not obstacles.any():
        return np.full(obstacles.shape, np.inf)
    return ndimage.distance_transform_edt(~obstacles) * resolution


def geodesic_distance_field(score: np.ndarray, resolution: float, goal_cell,
                            threshold: float = OBSTACLE_THRESHOLD) -> np.ndarray:
    """Shortest-cost distance to the goal over 8-connected traversable cells.

    Edge cost between neighbors a, b is step_length * (1/score_a + 1/score_b) / 2,
    so cost rises as traversability falls and reduces to plain step length on
    uniform score-1 grids. Unreachable and non-traversable cells are +inf.
    """
    score = np.asarray(score, dtype=float)
    rows_n, cols_n = score.shape
    trav = np.isfinite(score) & (score >= threshold)
    gj, gi = goal_cell
    if not trav[gj, gi]:
        raise FieldError(f"goal cell {goal_cell} is not traversable")
    inv = 1.0 / np.clip(score, 1e-9, None)
    ids = np.arange(rows_n * cols_n).reshape(rows_n, cols_n)
    rows, cols, data = [], [], []
    for dj, di in ((0, 1), (1, 0), (1, 1), (1, -1)):
        step = resolution * math.hypot(dj, di)
        src_j = slice(max(0, -dj), rows_n - max(0, dj))
        src_i = slice(max(0, -di), cols_n - max(0, di))
        dst_j = slice(max(0, dj), rows_n + min(0, dj) or None)
        dst_i = slice(max(0, di), cols_n + min(0, di) or None)
        a_ids, b_ids = ids[src_j, src_i], ids[dst_j, dst_i]
        ok = trav[src_j, src_i] & trav[dst_j, dst_i]
        cost = step * 0.5 * (inv[src_j, src_i] + inv[dst_j, dst_i])
        rows.append(a_ids[ok])
        cols.append(b_ids[ok])
        data.append(cost[ok])
    graph = csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(rows_n * cols_n, rows_n * cols_n),
    )
    dist = sparse_dijkstra(graph, directed=False, indices=ids[gj, gi])
    return dist.reshape(rows_n, cols_n)


@dataclass
class FieldPair:
    sdf: np.ndarray             # normalized [0, 1] distance to nearest obstacle
    gdf: np.ndarray             # meters to goal, +inf where unreachable
    resolution: float
    origin: tuple               # world coords of cell (0, 0) center
    goal_cell: tuple
    obstacle_threshold: float = OBSTACLE_THRESHOLD
    _sdf_grad: tuple = field(default=None, repr=False)
    _gdf_grad: tuple = field(default=None, repr=False)

    def world_to_grid(self, x, y):
        return (
            (y - self.origin[1]) / self.resolution,
            (x - self.origin[0]) / self.resolution,
        )

    def cell_of(self, x, y):
        gj, gi = self.world_to_grid(x, y)
        return int(round(gj)), int(round(gi))

    def in_bounds(self, j, i):
        return 0 <= j < self.sdf.shape[0] and 0 <= i < self.sdf.shape[1]


def _bilinear(grid: np.ndarray, gj: float, gi: float) -> float:
    j0 = int(np.clip(math.floor(gj), 0, grid.shape[0] - 2))
    i0 = int(np.clip(math.floor(gi), 0, grid.shape[1] - 2))
    fj = np.clip(gj - j0, 0.0, 1.0)
    fi = np.clip(gi - i0, 0.0, 1.0)
    return float(
        grid[j0, i0] * (1 - fj) * (1 - fi)
        + grid[j0, i0 + 1] * (1 - fj) * fi
        + grid[j0 + 1, i0] * fj * (1 - fi)
        + grid[j0 + 1, i0 + 1] * fj * fi
    )


def build_fields(emap: ElevationMap, goal_xy, downsample: int = 1,
                 threshold: float = OBSTACLE_THRESHOLD, snap_radius: float = 0.5) -> FieldPair:
    """Construct the SDF/GDF pair from a refined elevation map.

    Obstacles are cells scoring below the threshold (unknown counts as
    obstacle). The SDF is normalized by the map half-extent and clamped to
    [0, 1]. A blocked goal cell snaps to the nearest traversable cell within
    `snap_radius`; failing that, FieldError.
    """
    score = np.where(np.isnan(emap.traversability), 0.0, emap.traversability)
    res = emap.resolution
    if downsample > 1:
        n = (score.shape[0] // downsample) * downsample
        blocks = score[:n, :n].reshape(n // downsample, downsample, n // downsample, downsample)
        score = blocks.min(axis=3).min(axis=1)  # conservative pooling
        res = res * downsample
    obstacles = score < threshold
    half_extent = emap.size / 2.0
    edt = euclidean_distance_field(obstacles, res)
    sdf = np.clip(edt / half_extent, 0.0, 1.0)

    origin = (
        emap.center[0] - (emap.cells - 1) / 2.0 * emap.resolution + (res - emap.resolution) / 2.0,
        emap.center[1] - (emap.cells - 1) / 2.0 * emap.resolution + (res - emap.resolution) / 2.0,
    )
    gj = int(round((goal_xy[1] - origin[1]) / res))
    gi = int(round((goal_xy[0] - origin[0]) / res))
    gj = int(np.clip(gj, 0, score.shape[0] - 1))
    gi = int(np.clip(gi, 0, score.shape[1] - 1))
    if obstacles[gj, gi]:
        reach = max(1, int(math.ceil(snap_radius / res)))
        best = None
        for dj in range(-reach, reach + 1):
            for di in range(-reach, reach + 1):
                j, i = gj + dj, gi + di
                if 0 <= j < score.shape[0] and 0 <= i < score.shape[1] and not obstacles[j, i]:
                    d = math.hypot(dj, di) * res
                    if d <= snap_radius and (best is None or d < best[0]):
                        best = (d, j, i)
        if best is None:
            raise FieldError(f"goal at {tuple(goal_xy)} blocked; no traversable cell within {snap_radius} m")
        _, gj, gi = best
    gdf = geodesic_distance_field(score, res, (gj, gi), threshold)

    pair = FieldPair(sdf, gdf, res, origin, (gj, gi))
    finite = gdf[np.isfinite(gdf)]
    ceiling = (finite.max() if finite.size else 0.0) + emap.size
    gdf_solid = np.where(np.isfinite(gdf), gdf, ceiling)
    pair._gdf_grad = np.gradient(gdf_solid, res)
    pair._sdf_grad = np.gradient(sdf, res)
    return pair


@dataclass
class CommandConfig:
    attract_gain: float = 1.5
    repulse_gain: float = 2.0
    sdf_influence: float = 0.35     # normalized-sdf range of the repulsive term
    obstacle_weight: float = 0.05   # metric weight scale, ~ 1/sdf^2
    velocity_damping: float = 1.0
    heading_gain: float = 2.0
    max_speed: float = 0.8
    max_omega: float = 1.0
    goal_deadband: float = 0.25


@dataclass
class ControllerState:
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class Command:
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    stuck: bool = False
    at_goal: bool = False

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def command(pose: Pose, fields: FieldPair, state: ControllerState, dt: float,
            config: CommandConfig | None = None, goal_xy=None) -> Command:
    """Blend goal attraction and obstacle repulsion into a body-frame twist.

    Attraction descends the geodesic field; repulsion ascends the distance
    field inside its influence range. The accelerations mix with
    state-dependent weights (obstacle weight ~ 1/sdf^2), integrate into a
    velocity clipped to max_speed, and the heading command turns toward the
    velocity direction.
    """
    config = config or CommandConfig()
    x, y = pose.position[0], pose.position[1]
    gj, gi = fields.cell_of(x, y)
    if not fields.in_bounds(gj, gi):
        return Command(stuck=True)
    if not np.isfinite(fields.gdf[gj, gi]):
        state.velocity[:] = 0.0
        return Command(stuck=True)

    if goal_xy is None:
        goal_xy = (
            fields.origin[0] + fields.goal_cell[1] * fields.resolution,
            fields.origin[1] + fields.goal_cell[0] * fields.resolution,
        )
    if math.hypot(x - goal_xy[0], y - goal_xy[1]) < config.goal_deadband:
        state.velocity[:] = 0.0
        return Command(at_goal=True)

    fj, fi = fields.world_to_grid(x, y)
    dgdy = _bilinear(fields._gdf_grad[0], fj, fi)
    dgdx = _bilinear(fields._gdf_grad[1], fj, fi)
    dsdy = _bilinear(fields._sdf_grad[0], fj, fi)
    dsdx = _bilinear(fields._sdf_grad[1], fj, fi)
    sdf_val = _bilinear(fields.sdf, fj, fi)

    g = np.array([dgdx, dgdy])
    gn = np.linalg.norm(g)
    attract = -config.attract_gain * g / gn if gn > 1e-9 else np.zeros(2)
    s = np.array([dsdx, dsdy])
    sn = np.linalg.norm(s)
    strength = max(0.0, 1.0 - sdf_val / config.sdf_influence)
    repulse = config.repulse_gain * strength * s / sn if sn > 1e-9 and strength > 0 else np.zeros(2)

    w_goal = 1.0
    w_obs = config.obstacle_weight / max(sdf_val, 1e-3) ** 2
    accel = (w_goal * attract + w_obs * repulse) / (w_goal + w_obs) - config.velocity_damping * state.velocity

    v = state.velocity + accel * dt
    speed = np.linalg.norm(v)
    if speed > config.max_speed:
        v = v * (config.max_speed / speed)
    state.velocity = v

    yaw = pose.yaw
    if np.linalg.norm(v) > 1e-6:
        desired = math.atan2(v[1], v[0])
        omega = float(np.clip(config.heading_gain * wrap_angle(desired - yaw), -config.max_omega, config.max_omega))
    else:
        omega = 0.0
    c, s_ = math.cos(yaw), math.sin(yaw)
    vx_b = c * v[0] + s_ * v[1]
    vy_b = -s_ * v[0] + c * v[1]
    return Command(float(vx_b), float(vy_b), omega)
