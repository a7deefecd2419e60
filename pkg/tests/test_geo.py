import math

import numpy as np
import pytest

from volcnav import geo
from volcnav.geo import (
    DomainError,
    EnuPoint,
    FrameMismatchError,
    GeoidModel,
    GeoPoint,
    Pose,
    compose,
    enu_to_lla,
    inverse,
    lla_to_enu,
)

ORIGIN = GeoPoint(37.7, 14.99, 1800.0)


def oracle_enu(origin: GeoPoint, p: GeoPoint) -> np.ndarray:
    """Independent geographic->ENU conversion through Earth-centered Cartesian."""
    a, f = 6378137.0, 1.0 / 298.257223563
    e2 = f * (2.0 - f)

    def ecef(lat, lon, h):
        lat, lon = np.radians(lat), np.radians(lon)
        n = a / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
        return np.array(
            [
                (n + h) * np.cos(lat) * np.cos(lon),
                (n + h) * np.cos(lat) * np.sin(lon),
                (n * (1.0 - e2) + h) * np.sin(lat),
            ]
        )

    d = ecef(p.latitude, p.longitude, p.altitude) - ecef(origin.latitude, origin.longitude, origin.altitude)
    lat, lon = np.radians(origin.latitude), np.radians(origin.longitude)
    rot = np.array(
        [
            [-np.sin(lon), np.cos(lon), 0.0],
            [-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon), np.cos(lat)],
            [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)],
        ]
    )
    return rot @ d


class TestLlaToEnu:
    def test_identity(self):
        e = lla_to_enu(ORIGIN, ORIGIN, GeoidModel.zero())
        assert np.allclose([e.east, e.north, e.up], 0.0, atol=1e-9)
        assert e.origin == ORIGIN

    def test_small_latitude_step(self):
        # +0.001 deg latitude at 37.7N: oracle gives 110.99 m of northing.
        o = GeoPoint(37.7, 0.0, 0.0)
        p = GeoPoint(37.701, 0.0, 0.0)
        e = lla_to_enu(o, p)
        assert e.north == pytest.approx(110.99, abs=0.2)
        assert abs(e.east) < 1e-6
        assert abs(e.up) < 0.01

    def test_matches_independent_ecef_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            p = GeoPoint(
                ORIGIN.latitude + rng.uniform(-0.3, 0.3),
                ORIGIN.longitude + rng.uniform(-0.3, 0.3),
                rng.uniform(0.0, 3000.0),
            )
            e = lla_to_enu(ORIGIN, p)
            expected = oracle_enu(ORIGIN, p)
            assert np.allclose([e.east, e.north, e.up], expected, atol=1e-6)

    def test_geoid_undulation_applied_to_ellipsoidal_heights(self):
        geoid = GeoidModel(constant=40.0)
        o = GeoPoint(37.7, 15.0, 1000.0, height_ref=geo.ORTHOMETRIC)
        p = GeoPoint(37.7, 15.0, 2000.0, height_ref=geo.ELLIPSOIDAL)
        e = lla_to_enu(o, p, geoid)
        # ellipsoidal 2000 m becomes orthometric 1960 m, relative to origin's 1000 m
        assert e.up == pytest.approx(960.0, abs=1e-6)
        assert abs(e.east) < 1e-9 and abs(e.north) < 1e-9

    def test_out_of_range_coordinates_rejected(self):
        with pytest.raises(DomainError):
            GeoPoint(95.0, 0.0)
        with pytest.raises(DomainError):
            GeoPoint(0.0, 200.0)
        with pytest.raises(DomainError):
            GeoPoint(0.0, 0.0, float("nan"))

    def test_round_trip_within_50_km(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            p = GeoPoint(
                ORIGIN.latitude + rng.uniform(-0.4, 0.4),
                ORIGIN.longitude + rng.uniform(-0.4, 0.4),
                rng.uniform(-100.0, 3000.0),
            )
            e = lla_to_enu(ORIGIN, p)
            back = enu_to_lla(ORIGIN, e)
            assert back.latitude == pytest.approx(p.latitude, abs=1e-6)
            assert back.longitude == pytest.approx(p.longitude, abs=1e-6)
            assert back.altitude == pytest.approx(p.altitude, abs=1e-3)

    def test_enu_distance_matches_great_circle(self):
        # great-circle arc on the local normal-section sphere (Euler radius
        # for the pair's azimuth), evaluated at ellipsoid height
        origin = GeoPoint(ORIGIN.latitude, ORIGIN.longitude, 0.0)
        lat = math.radians(origin.latitude)
        m = 6378137.0 * (1 - geo.WGS84_E2) / (1 - geo.WGS84_E2 * math.sin(lat) ** 2) ** 1.5
        n = 6378137.0 / math.sqrt(1 - geo.WGS84_E2 * math.sin(lat) ** 2)
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = GeoPoint(
                origin.latitude + rng.uniform(-0.03, 0.03),
                origin.longitude + rng.uniform(-0.03, 0.03),
                origin.altitude,
            )
            e = lla_to_enu(origin, p)
            d_enu = math.hypot(e.east, e.north)
            if d_enu < 100.0 or d_enu > 5000.0:
                continue
            azimuth = math.atan2(e.east, e.north)
            r_az = 1.0 / (math.cos(azimuth) ** 2 / m + math.sin(azimuth) ** 2 / n)
            phi1, phi2 = math.radians(origin.latitude), math.radians(p.latitude)
            dphi = phi2 - phi1
            dlmb = math.radians(p.longitude - origin.longitude)
            h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
            arc = 2 * r_az * math.asin(math.sqrt(h))
            assert d_enu == pytest.approx(arc, rel=1e-3)


class TestGeoidModel:
    def test_grid_file_parse_and_bilinear(self, tmp_path):
        text = "\n".join(
            f"{lat} {lon} {10.0 + lat + 0.5 * lon}"
            for lat in (37.0, 38.0)
            for lon in (14.0, 15.0)
        )
        path = tmp_path / "geoid.txt"
        path.write_text(text + "\n")
        g = GeoidModel.from_text(path)
        assert g.mode == "grid"
        # bilinear interpolation of a bilinear function is exact
        assert g.undulation(37.25, 14.5) == pytest.approx(10.0 + 37.25 + 0.5 * 14.5, abs=1e-9)
        with pytest.raises(DomainError):
            g.undulation(36.0, 14.5)

    def test_incomplete_lattice_rejected(self):
        with pytest.raises(DomainError):
            GeoidModel.from_text("37 14 10\n37 15 11\n38 14 12\n")


def random_pose(rng, frame="world", child=""):
    q = geo.quat_normalize(rng.normal(size=4))
    return Pose(rng.normal(scale=10.0, size=3), q, frame=frame, child_frame=child)


class TestPoseAlgebra:
    def test_compose_identity(self):
        rng = np.random.default_rng(0)
        b = random_pose(rng)
        out = compose(Pose.identity(frame=b.frame), b)
        assert np.allclose(out.position, b.position)
        assert np.allclose(out.orientation, b.orientation) or np.allclose(out.orientation, -b.orientation)

    def test_inverse_is_involution(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = random_pose(rng)
            aa = inverse(inverse(a))
            assert np.allclose(aa.position, a.position, atol=1e-12)
            q = aa.orientation if np.dot(aa.orientation, a.orientation) > 0 else -aa.orientation
            assert np.allclose(q, a.orientation, atol=1e-12)

    def test_compose_matches_homogeneous_matrices(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            a, b = random_pose(rng), random_pose(rng)
            x = rng.normal(size=3)
            left = compose(a, b).transform_point(x)
            right = (a.matrix() @ b.matrix() @ np.append(x, 1.0))[:3]
            assert np.allclose(left, right, atol=1e-9)
            also = a.transform_point(b.transform_point(x))
            assert np.allclose(left, also, atol=1e-9)

    def test_compose_inverse_is_identity(self):
        rng = np.random.default_rng(3)
        a = random_pose(rng)
        out = compose(a, inverse(a))
        assert np.allclose(out.position, 0.0, atol=1e-9)
        assert abs(abs(out.orientation[3]) - 1.0) < 1e-9

    def test_frame_mismatch_rejected(self):
        a = Pose.identity(frame="world", child_frame="map")
        b = Pose.identity(frame="base")
        with pytest.raises(FrameMismatchError):
            compose(a, b)

    def test_quaternion_norm_stable_over_many_compositions(self):
        rng = np.random.default_rng(4)
        p = Pose.identity()
        steps = [random_pose(rng) for _ in range(64)]
        for i in range(100_000):
            p = compose(p, steps[i % 64])
        assert abs(np.linalg.norm(p.orientation) - 1.0) < 1e-9

    def test_quat_exp_log_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            v = rng.normal(scale=1.0, size=3)
            back = geo.quat_log(geo.quat_exp(v))
            assert np.allclose(back, v, atol=1e-9)


class TestEnuPoint:
    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            EnuPoint(float("inf"), 0.0, 0.0)
