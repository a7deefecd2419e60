"""Kinematic robot base with slip, plus the simulated sensor rig.

The base is a planar unicycle with lateral velocity: commanded twists are
speed-clamped, translation is scaled by the local slip factor (raised to a
power that grows with uphill grade, so loose soil on slopes eats forward
progress), and height snaps to the terrain. Sensors are synthesized from the
true state: noisy GNSS fixes with dropouts and degraded zones, drifting
relative odometry, and a drifting absolute SLAM pose whose error grows with
distance traveled and couples to the terrain's geometric structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import GnssFix, OdometryDelta, SlamPose
from .geo import Pose, compose, inverse, quat_from_yaw, relative_pose, wrap_angle
from .world import World

SPEED_LIMIT = 0.8


class SimulationFault(RuntimeError):
    """Robot left the world bounds; the mission must abort."""


@dataclass
class RobotState:
    pose: Pose
    commanded: tuple = (0.0, 0.0, 0.0)
    stamp: float = 0.0


def clamp_twist(vx: float, vy: float, omega: float, speed_limit: float = SPEED_LIMIT):
    speed = math.hypot(vx, vy)
    if speed > speed_limit:
        s = speed_limit / speed
        vx, vy = vx * s, vy * s
    return vx, vy, omega


def step(state: RobotState, cmd, dt: float, world: World, slip_uphill_gain: float = 8.0) -> RobotState:
    """Integrate one control period.

    Effective translation scale is slip ** (1 + gain * uphill_grade): exactly
    the slip factor on flat ground, harsher when pushing uphill on loose
    soil. Heading integrates omega unscaled; z snaps to the terrain.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    vx, vy, omega = clamp_twist(*cmd)
    x, y = state.pose.position[0], state.pose.position[1]
    yaw = state.pose.yaw
    if not world.height.contains(x, y):
        raise SimulationFault(f"robot at ({x:.2f}, {y:.2f}) outside world bounds")
    slip = float(world.soil.slip_at(x, y))

    c, s = math.cos(yaw), math.sin(yaw)
    mx, my = c * vx - s * vy, s * vx + c * vy
    speed = math.hypot(mx, my)
    scale = 1.0
    if speed > 1e-9:
        probe = 0.3
        px, py = x + mx / speed * probe, y + my / speed * probe
        if world.height.contains(px, py):
            grade = (world.height.sample_scalar(px, py) - world.height.sample_scalar(x, y)) / probe
        else:
            grade = 0.0
        scale = slip ** (1.0 + slip_uphill_gain * max(0.0, grade))

    nx = x + mx * scale * dt
    ny = y + my * scale * dt
    if not world.height.contains(nx, ny):
        raise SimulationFault(f"robot stepped outside world bounds at ({nx:.2f}, {ny:.2f})")
    nyaw = wrap_angle(yaw + omega * dt)
    nz = world.height.sample_scalar(nx, ny)
    pose = Pose(np.array([nx, ny, nz]), quat_from_yaw(nyaw), frame=state.pose.frame,
                child_frame=state.pose.child_frame, stamp=state.stamp + dt)
    return RobotState(pose, (vx, vy, omega), state.stamp + dt)


@dataclass
class GnssSpec:
    sigma_xy: float = 2.5
    sigma_z: float = 5.0            # vertical degradation, ~2x horizontal
    rate_hz: float = 5.0
    dropout_windows: list = field(default_factory=list)     # [(t0, t1), ...]
    degraded_sigma_xy: float = 6.0
    degraded_regions: list = field(default_factory=list)    # polygons [(x, y), ...]


@dataclass
class OdomSpec:
    rate_hz: float = 5.0
    sigma_xy: float = 0.01          # per emitted step
    sigma_yaw: float = 0.002
    bias_xy: tuple = (0.0, 0.0)


@dataclass
class SlamSpec:
    rate_hz: float = 10.0
    drift_rate: float = 0.005       # translation drift per meter traveled
    yaw_drift_rate: float = 0.0005  # rad per meter traveled
    degeneracy_gain: float = 4.0    # scales drift by (1 + gain * (1 - structure))
    base_sigma: float = 0.02
    map_alignment: Pose | None = None   # true world-from-map transform (default identity)


@dataclass
class SensorRig:
    gnss: GnssSpec = field(default_factory=GnssSpec)
    odom: OdomSpec = field(default_factory=OdomSpec)
    slam: SlamSpec = field(default_factory=SlamSpec)
    seed: int = 0

    def __post_init__(self):
        for spec in (self.gnss, self.odom, self.slam):
            if spec.rate_hz <= 0:
                raise ValueError("sensor rates must be > 0")
        if min(self.gnss.sigma_xy, self.gnss.sigma_z, self.odom.sigma_xy, self.odom.sigma_yaw,
               self.slam.drift_rate, self.slam.base_sigma) < 0:
            raise ValueError("sensor sigmas must be >= 0")


def point_in_polygon(x: float, y: float, polygon) -> bool:
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


@dataclass
class SensorBatch:
    gnss: GnssFix | None = None
    odom: OdometryDelta | None = None
    slam: SlamPose | None = None


class SensorSimulator:
    """Owns the seeded noise stream and per-sensor emission cadence."""

    def __init__(self, rig: SensorRig):
        self.rig = rig
        self.rng = np.random.default_rng(rig.seed)
        self._last_t = -math.inf
        self._next_due = {"gnss": 0.0, "odom": 0.0, "slam": 0.0}
        self._odom_ref: Pose | None = None
        self._slam_drift = np.zeros(3)          # (dx, dy, dyaw) in the map frame
        self._slam_var = np.zeros(3)            # accumulated drift variance
        self._dist_since_slam = 0.0
        self._prev_pos: np.ndarray | None = None
        align = rig.slam.map_alignment or Pose.identity(frame="world", child_frame="map")
        self._map_from_world = inverse(align)

    def _due(self, name: str, t: float, rate_hz: float) -> bool:
        if t + 1e-9 >= self._next_due[name]:
            self._next_due[name] = self._next_due[name] + 1.0 / rate_hz
            if self._next_due[name] <= t:
                self._next_due[name] = t + 1.0 / rate_hz
            return True
        return False

    def emit(self, state: RobotState, world: World, t: float) -> SensorBatch:
        """Sensor outputs due at time t; measurements reference world ENU."""
        if t < self._last_t:
            raise ValueError("sensor emission times must be non-decreasing")
        self._last_t = t
        pos = state.pose.position
        if self._prev_pos is not None:
            self._dist_since_slam += float(np.linalg.norm(pos[:2] - self._prev_pos[:2]))
        self._prev_pos = pos.copy()

        batch = SensorBatch()
        g = self.rig.gnss
        if self._due("gnss", t, g.rate_hz):
            in_dropout = any(t0 <= t <= t1 for t0, t1 in g.dropout_windows)
            if not in_dropout:
                sigma_xy = g.sigma_xy
                for poly in g.degraded_regions:
                    if point_in_polygon(pos[0], pos[1], poly):
                        sigma_xy = g.degraded_sigma_xy
                        break
                noise = self.rng.normal(size=3) * np.array([sigma_xy, sigma_xy, g.sigma_z])
                cov = np.diag([max(sigma_xy, 1e-3) ** 2, max(sigma_xy, 1e-3) ** 2, max(g.sigma_z, 1e-3) ** 2])
                batch.gnss = GnssFix(t=t, position=pos + noise, covariance=cov)

        o = self.rig.odom
        if self._due("odom", t, o.rate_hz):
            if self._odom_ref is None:
                self._odom_ref = state.pose.copy()
            else:
                delta = relative_pose(self._odom_ref, state.pose)
                noise_xy = self.rng.normal(size=2) * o.sigma_xy + np.asarray(o.bias_xy)
                noise_yaw = float(self.rng.normal() * o.sigma_yaw)
                noisy = Pose(
                    delta.position + np.array([noise_xy[0], noise_xy[1], 0.0]),
                    np.asarray(Pose.from_xy_yaw(0, 0, wrap_angle(_pose_yaw(delta) + noise_yaw)).orientation),
                    frame="odom",
                )
                noisy.position[2] = delta.position[2]
                sig_t = max(o.sigma_xy, 1e-4)
                sig_r = max(o.sigma_yaw, 1e-5)
                cov = np.diag([sig_t**2, sig_t**2, sig_t**2, sig_r**2, sig_r**2, sig_r**2])
                batch.odom = OdometryDelta(t0=self._odom_ref.stamp, t1=t, delta=noisy, covariance=cov)
                self._odom_ref = state.pose.copy()
                self._odom_ref.stamp = t

        s = self.rig.slam
        if self._due("slam", t, s.rate_hz):
            structure = float(world.soil.structure_at(pos[0], pos[1])) if world.height.contains(pos[0], pos[1]) else 1.0
            growth = 1.0 + s.degeneracy_gain * (1.0 - structure)
            sig_t = s.drift_rate * self._dist_since_slam * growth
            sig_y = s.yaw_drift_rate * self._dist_since_slam * growth
            if sig_t > 0 or sig_y > 0:
                inc = self.rng.normal(size=3) * np.array([sig_t, sig_t, sig_y])
                if np.linalg.norm(self._slam_drift + inc) < np.linalg.norm(self._slam_drift):
                    inc = -inc  # reflect: accumulated drift never shrinks
                self._slam_drift = self._slam_drift + inc
                self._slam_var = self._slam_var + np.array([sig_t**2, sig_t**2, sig_y**2])
            self._dist_since_slam = 0.0
            drift_pose = Pose.from_xy_yaw(self._slam_drift[0], self._slam_drift[1], self._slam_drift[2],
                                          frame="map", child_frame="map")
            map_pose = compose(self._map_from_world,
                               Pose(pos.copy(), state.pose.orientation.copy(), frame="world", child_frame="base"))
            measured = compose(drift_pose, map_pose)
            measured.stamp = t
            var_t = s.base_sigma**2 + self._slam_var[:2].mean()
            var_y = (s.base_sigma * 0.1) ** 2 + self._slam_var[2]
            cov = np.diag([var_t, var_t, var_t, var_y, var_y, var_y])
            batch.slam = SlamPose(t=t, pose=measured, covariance=cov)

        return batch


def _pose_yaw(p: Pose) -> float:
    return p.yaw
