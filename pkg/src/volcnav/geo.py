"""WGS-84 geodetic conversions and rigid-body pose algebra.

Positions move between three representations: geographic (lat, lon, alt),
Earth-centered Cartesian (ECEF, used as the exact intermediate), and a local
East-North-Up frame anchored at a declared origin. Heights carry an explicit
reference (ellipsoidal vs orthometric); a pluggable geoid model supplies the
undulation used to convert between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

ELLIPSOIDAL = "ellipsoidal"
ORTHOMETRIC = "orthometric"


class DomainError(ValueError):
    """Input outside the valid geographic or numeric domain."""


class FrameMismatchError(ValueError):
    """Pose composition attempted across incompatible frames."""


@dataclass(frozen=True)
class GeoPoint:
    """Geographic position with an explicit height reference."""

    latitude: float
    longitude: float
    altitude: float = 0.0
    height_ref: str = ELLIPSOIDAL

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise DomainError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise DomainError(f"longitude {self.longitude} outside [-180, 180]")
        if not math.isfinite(self.altitude):
            raise DomainError("altitude must be finite")
        if self.height_ref not in (ELLIPSOIDAL, ORTHOMETRIC):
            raise DomainError(f"unknown height reference {self.height_ref!r}")


@dataclass(frozen=True)
class EnuPoint:
    """East-North-Up offset in meters relative to an origin GeoPoint."""

    east: float
    north: float
    up: float = 0.0
    origin: GeoPoint | None = None

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.east, self.north, self.up)):
            raise DomainError("ENU components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.east, self.north, self.up])


class GeoidModel:
    """Geoid undulation lookup: constant offset or a bilinear sampled grid.

    Grid mode expects a regular lat/lon lattice; queries outside the covered
    box raise DomainError (the grid must cover the mission bounding box).
    """

    def __init__(self, constant: float = 0.0, grid=None):
        self.mode = "constant" if grid is None else "grid"
        self.constant = float(constant)
        if grid is not None:
            lats, lons, table = grid
            self._lats = np.asarray(lats, dtype=float)
            self._lons = np.asarray(lons, dtype=float)
            self._table = np.asarray(table, dtype=float)
            if self._table.shape != (self._lats.size, self._lons.size):
                raise DomainError("geoid grid shape does not match axes")
            if np.any(np.diff(self._lats) <= 0) or np.any(np.diff(self._lons) <= 0):
                raise DomainError("geoid grid axes must be strictly increasing")

    @classmethod
    def zero(cls) -> "GeoidModel":
        return cls(0.0)

    @classmethod
    def from_text(cls, source) -> "GeoidModel":
        """Parse a plain-text table of `lat lon undulation_m` lines.

        Samples must form a complete regular lattice; ordering is free.
        """
        if isinstance(source, (str, Path)) and "\n" not in str(source):
            text = Path(source).read_text()
        else:
            text = str(source)
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DomainError(f"geoid grid line {lineno}: expected 'lat lon undulation'")
            rows.append(tuple(float(v) for v in parts))
        if not rows:
            raise DomainError("geoid grid file contains no samples")
        lats = np.unique([r[0] for r in rows])
        lons = np.unique([r[1] for r in rows])
        table = np.full((lats.size, lons.size), np.nan)
        for lat, lon, und in rows:
            table[np.searchsorted(lats, lat), np.searchsorted(lons, lon)] = und
        if np.any(np.isnan(table)):
            raise DomainError("geoid grid is not a complete lat/lon lattice")
        return cls(grid=(lats, lons, table))

    def undulation(self, latitude: float, longitude: float) -> float:
        if self.mode == "constant":
            return self.constant
        if not (self._lats[0] <= latitude <= self._lats[-1] and self._lons[0] <= longitude <= self._lons[-1]):
            raise DomainError("query outside geoid grid coverage")
        i = np.clip(np.searchsorted(self._lats, latitude) - 1, 0, self._lats.size - 2)
        j = np.clip(np.searchsorted(self._lons, longitude) - 1, 0, self._lons.size - 2)
        t = (latitude - self._lats[i]) / (self._lats[i + 1] - self._lats[i])
        u = (longitude - self._lons[j]) / (self._lons[j + 1] - self._lons[j])
        tbl = self._table
        return float(
            (1 - t) * (1 - u) * tbl[i, j]
            + t * (1 - u) * tbl[i + 1, j]
            + (1 - t) * u * tbl[i, j + 1]
            + t * u * tbl[i + 1, j + 1]
        )


def orthometric_height(p: GeoPoint, geoid: GeoidModel) -> float:
    """Height above mean sea level: undulation is subtracted from ellipsoidal heights."""
    if p.height_ref == ORTHOMETRIC:
        return p.altitude
    return p.altitude - geoid.undulation(p.latitude, p.longitude)


def lla_to_ecef(latitude: float, longitude: float, altitude: float) -> np.ndarray:
    lat = math.radians(latitude)
    lon = math.radians(longitude)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * math.sin(lat) ** 2)
    x = (n + altitude) * math.cos(lat) * math.cos(lon)
    y = (n + altitude) * math.cos(lat) * math.sin(lon)
    z = ((1.0 - WGS84_E2) * n + altitude) * math.sin(lat)
    return np.array([x, y, z])


def ecef_to_lla(xyz) -> tuple[float, float, float]:
    """Closed-form (Bowring) inverse with one Newton refinement on latitude."""
    x, y, z = (float(v) for v in xyz)
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    if p < 1e-9:
        lat = math.copysign(math.pi / 2, z)
        alt = abs(z) - WGS84_B
        return math.degrees(lat), math.degrees(lon), alt
    theta = math.atan2(z * WGS84_A, p * WGS84_B)
    ep2 = (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    lat = math.atan2(z + ep2 * WGS84_B * math.sin(theta) ** 3, p - WGS84_E2 * WGS84_A * math.cos(theta) ** 3)
    for _ in range(2):
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * math.sin(lat) ** 2)
        alt = p / math.cos(lat) - n
        lat = math.atan2(z, p * (1.0 - WGS84_E2 * n / (n + alt)))
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * math.sin(lat) ** 2)
    alt = p / math.cos(lat) - n
    return math.degrees(lat), math.degrees(lon), alt


def _enu_rotation(origin: GeoPoint) -> np.ndarray:
    lat = math.radians(origin.latitude)
    lon = math.radians(origin.longitude)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array(
        [
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ]
    )


def lla_to_enu(origin: GeoPoint, p: GeoPoint, geoid: GeoidModel | None = None) -> EnuPoint:
    """Convert a geographic point to local ENU about `origin`.

    The conversion goes through Earth-centered Cartesian coordinates on the
    WGS-84 ellipsoid. Heights are first normalized to orthometric (undulation
    subtracted from ellipsoidal heights), so the up component is a difference
    of heights above mean sea level.
    """
    geoid = geoid or GeoidModel.zero()
    h0 = orthometric_height(origin, geoid)
    hp = orthometric_height(p, geoid)
    e0 = lla_to_ecef(origin.latitude, origin.longitude, h0)
    ep = lla_to_ecef(p.latitude, p.longitude, hp)
    enu = _enu_rotation(origin) @ (ep - e0)
    return EnuPoint(float(enu[0]), float(enu[1]), float(enu[2]), origin=origin)


def enu_to_lla(
    origin: GeoPoint,
    p: EnuPoint,
    geoid: GeoidModel | None = None,
    height_ref: str = ORTHOMETRIC,
) -> GeoPoint:
    """Inverse of lla_to_enu; `height_ref` selects the reported height reference."""
    geoid = geoid or GeoidModel.zero()
    h0 = orthometric_height(origin, geoid)
    e0 = lla_to_ecef(origin.latitude, origin.longitude, h0)
    ecef = e0 + _enu_rotation(origin).T @ p.as_array()
    lat, lon, alt = ecef_to_lla(ecef)
    if height_ref == ELLIPSOIDAL:
        alt = alt + geoid.undulation(lat, lon)
    return GeoPoint(lat, lon, alt, height_ref=height_ref)


# Quaternions are [x, y, z, w], scalar last.

def quat_identity() -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q) -> np.ndarray:
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z + w * w)
    return np.array([x / n, y / n, z / n, w / n])


def quat_mul(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by quaternion q."""
    u = np.asarray(q[:3])
    w = q[3]
    v = np.asarray(v, dtype=float)
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def rotation_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_exp(rotvec) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        return quat_normalize(np.array([rotvec[0] / 2, rotvec[1] / 2, rotvec[2] / 2, 1.0]))
    axis = rotvec / angle
    s = math.sin(angle / 2)
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, math.cos(angle / 2)])


def quat_log(q) -> np.ndarray:
    """Logarithm map: quaternion to rotation vector."""
    x, y, z, w = q
    nq = math.sqrt(x * x + y * y + z * z + w * w)
    x, y, z, w = x / nq, y / nq, z / nq, w / nq
    if w < 0:
        x, y, z, w = -x, -y, -z, -w
    n = math.sqrt(x * x + y * y + z * z)
    if n < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    s = 2.0 * math.atan2(n, w) / n
    return np.array([s * x, s * y, s * z])


def quat_from_yaw(yaw: float) -> np.ndarray:
    return np.array([0.0, 0.0, math.sin(yaw / 2), math.cos(yaw / 2)])


def yaw_from_quat(q) -> float:
    x, y, z, w = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class Pose:
    """Rigid-body transform: position plus unit quaternion, with frame bookkeeping.

    `frame` is the frame the pose is expressed in (the parent); `child_frame`
    names the frame this pose defines. An empty child frame acts as a
    wildcard so anonymous intermediate transforms compose freely.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)
    frame: str = "world"
    child_frame: str = ""
    stamp: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = np.asarray(self.orientation, dtype=float).reshape(4)
        if not self.frame:
            raise DomainError("pose frame identifier must be non-empty")
        n = np.linalg.norm(self.orientation)
        if abs(n - 1.0) > 1e-6:
            raise DomainError(f"quaternion norm {n} too far from 1")
        if abs(n - 1.0) > 1e-9:
            self.orientation = self.orientation / n

    @classmethod
    def identity(cls, frame: str = "world", child_frame: str = "", stamp: float = 0.0) -> "Pose":
        return cls(np.zeros(3), quat_identity(), frame, child_frame, stamp)

    @classmethod
    def from_xy_yaw(cls, x: float, y: float, yaw: float, z: float = 0.0, frame: str = "world",
                    child_frame: str = "", stamp: float = 0.0) -> "Pose":
        return cls(np.array([x, y, z]), quat_from_yaw(yaw), frame, child_frame, stamp)

    @property
    def yaw(self) -> float:
        return yaw_from_quat(self.orientation)

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self.orientation, p) + self.position

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = rotation_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    def copy(self) -> "Pose":
        return replace(self, position=self.position.copy(), orientation=self.orientation.copy())


def compose(a: Pose, b: Pose) -> Pose:
    """Group-law composition a * b; requires a's child frame to match b's frame."""
    if a.child_frame and a.child_frame != b.frame:
        raise FrameMismatchError(f"cannot compose: child frame {a.child_frame!r} != frame {b.frame!r}")
    q = quat_normalize(quat_mul(a.orientation, b.orientation))
    p = a.position + quat_rotate(a.orientation, b.position)
    return Pose(p, q, frame=a.frame, child_frame=b.child_frame, stamp=max(a.stamp, b.stamp))


def inverse(a: Pose) -> Pose:
    qi = quat_conjugate(a.orientation)
    pi = -quat_rotate(qi, a.position)
    child = a.child_frame or a.frame
    return Pose(pi, qi, frame=child, child_frame=a.frame, stamp=a.stamp)


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Transform of b expressed in a's frame: a^-1 * b (frame checks relaxed)."""
    qi = quat_conjugate(a.orientation)
    q = quat_normalize(quat_mul(qi, b.orientation))
    p = quat_rotate(qi, b.position - a.position)
    return Pose(p, q, frame=a.child_frame or "local", child_frame=b.child_frame, stamp=b.stamp)
