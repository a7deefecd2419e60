"""Procedural synthetic volcanic worlds.

A world is a flat ENU patch holding a heightfield, a soil map (slip factor
and geometric-structure score per cell), and a wind model. Everything is a
pure function of (seed, params) so scenario files stay small: documents store
parameters, rasters are regenerated on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

WORLD_SCHEMA_VERSION = 1
DEFAULT_CRITICAL_SLOPE = math.radians(25.0)


class ParamError(ValueError):
    """Degenerate world-generation parameters."""


class QueryError(ValueError):
    """Sample requested outside the grid's valid interior."""


@dataclass
class CraterSpec:
    center: tuple[float, float]
    rim_radius: float
    rim_height: float
    rim_width: float = 0.0      # 0 -> rim_radius / 3
    depth: float = 0.0          # 0 -> 0.3 * rim_height

    def resolved(self) -> "CraterSpec":
        w = self.rim_width if self.rim_width > 0 else self.rim_radius / 3.0
        d = self.depth if self.depth > 0 else 0.3 * self.rim_height
        return CraterSpec(self.center, self.rim_radius, self.rim_height, w, d)


def crater_height(spec: CraterSpec, r) -> np.ndarray:
    """Analytic rim-and-bowl primitive: Gaussian rim ring minus parabolic bowl.

    Exactly rim_height on the rim circle (the bowl term vanishes there) and
    negative at the center for any depth > rim_height * exp(-(R/w)^2).
    """
    s = spec.resolved()
    r = np.asarray(r, dtype=float)
    rim = s.rim_height * np.exp(-(((r - s.rim_radius) / s.rim_width) ** 2))
    bowl = s.depth * np.maximum(0.0, 1.0 - (r / s.rim_radius) ** 2)
    return rim - bowl


@dataclass
class NoiseSpec:
    amplitude: float = 0.0
    min_wavelength: float = 5.0
    max_wavelength: float = 40.0


@dataclass
class SandPatch:
    center: tuple[float, float]
    radius: float
    slip: float = 0.45
    structure: float = 0.3


@dataclass
class BoulderSpec:
    center: tuple[float, float]
    radius: float
    height: float


@dataclass
class WorldParams:
    extent: float = 120.0
    resolution: float = 0.5
    craters: list[CraterSpec] = field(default_factory=list)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sand_patches: list[SandPatch] = field(default_factory=list)
    boulders: list[BoulderSpec] = field(default_factory=list)
    critical_slope: float = DEFAULT_CRITICAL_SLOPE


@dataclass
class WindField:
    """Mean wind plus a seeded sinusoidal gust along the mean direction."""

    mean_velocity: tuple[float, float] = (1.4, 0.0)
    gust_amplitude: float = 0.0
    gust_period: float = 45.0
    seed: int = 0

    def __post_init__(self):
        if self.gust_amplitude < 0:
            raise ParamError("gust amplitude must be >= 0")
        self._phase = float(np.random.default_rng(self.seed).uniform(0.0, 2.0 * math.pi))

    def velocity_at(self, t: float) -> np.ndarray:
        mean = np.asarray(self.mean_velocity, dtype=float)
        speed = np.linalg.norm(mean)
        direction = mean / speed if speed > 1e-9 else np.array([1.0, 0.0])
        gust = self.gust_amplitude * math.sin(2.0 * math.pi * t / self.gust_period + self._phase)
        return mean + direction * gust


class HeightField:
    """Node-centered heightfield with bilinear interior sampling."""

    def __init__(self, heights: np.ndarray, resolution: float, origin=(0.0, 0.0)):
        if resolution <= 0:
            raise ParamError("resolution must be positive")
        self.heights = np.asarray(heights, dtype=float)
        if not np.all(np.isfinite(self.heights)):
            raise ParamError("heights must be finite")
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    def bounds(self):
        e0, n0 = self.origin
        return (e0, n0, e0 + (self.width - 1) * self.resolution, n0 + (self.height - 1) * self.resolution)

    def contains(self, x, y) -> bool:
        e0, n0, e1, n1 = self.bounds()
        return bool(np.all(x >= e0) and np.all(x <= e1) and np.all(y >= n0) and np.all(y <= n1))

    def sample(self, x, y):
        """Bilinear height at (x, y); strictly-inside queries only."""
        if not self.contains(x, y):
            raise QueryError(f"height query ({x}, {y}) outside bounds {self.bounds()}")
        return self._sample_unchecked(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def _sample_unchecked(self, x, y):
        e0, n0 = self.origin
        gx = np.clip((x - e0) / self.resolution, 0.0, self.width - 1.0)
        gy = np.clip((y - n0) / self.resolution, 0.0, self.height - 1.0)
        i = np.clip(gx.astype(int), 0, self.width - 2)
        j = np.clip(gy.astype(int), 0, self.height - 2)
        fx = gx - i
        fy = gy - j
        h = self.heights
        return (
            h[j, i] * (1 - fx) * (1 - fy)
            + h[j, i + 1] * fx * (1 - fy)
            + h[j + 1, i] * (1 - fx) * fy
            + h[j + 1, i + 1] * fx * fy
        )

    def sample_scalar(self, x: float, y: float) -> float:
        """Pure-float bilinear sample for hot scalar paths (no bounds check)."""
        e0, n0 = self.origin
        gx = (x - e0) / self.resolution
        gy = (y - n0) / self.resolution
        if gx < 0.0:
            gx = 0.0
        elif gx > self.width - 1.0:
            gx = self.width - 1.0
        if gy < 0.0:
            gy = 0.0
        elif gy > self.height - 1.0:
            gy = self.height - 1.0
        i = min(int(gx), self.width - 2)
        j = min(int(gy), self.height - 2)
        fx = gx - i
        fy = gy - j
        h = self.heights
        return float(
            h[j, i] * (1 - fx) * (1 - fy)
            + h[j, i + 1] * fx * (1 - fy)
            + h[j + 1, i] * (1 - fx) * fy
            + h[j + 1, i + 1] * fx * fy
        )

    def slope(self, x, y):
        """Surface slope (radians) from central differences of bilinear samples.

        The stencil shrinks one-sidedly near the borders so queries remain
        valid anywhere inside the bounds.
        """
        if not self.contains(x, y):
            raise QueryError(f"slope query ({x}, {y}) outside bounds {self.bounds()}")
        e0, n0, e1, n1 = self.bounds()
        s = self.resolution
        xp, xm = np.minimum(x + s, e1), np.maximum(x - s, e0)
        yp, ym = np.minimum(y + s, n1), np.maximum(y - s, n0)
        dzdx = (self._sample_unchecked(xp, np.asarray(y, float)) - self._sample_unchecked(xm, np.asarray(y, float))) / (xp - xm)
        dzdy = (self._sample_unchecked(np.asarray(x, float), yp) - self._sample_unchecked(np.asarray(x, float), ym)) / (yp - ym)
        return np.arctan(np.hypot(dzdx, dzdy))


class SoilMap:
    """Per-cell slip factor and geometric-structure score, aligned with a heightfield."""

    def __init__(self, slip: np.ndarray, structure: np.ndarray, resolution: float, origin=(0.0, 0.0)):
        self.slip = np.asarray(slip, dtype=float)
        self.structure = np.asarray(structure, dtype=float)
        if self.slip.shape != self.structure.shape:
            raise ParamError("slip and structure grids must have equal shape")
        if np.any(self.slip < 0) or np.any(self.slip > 1) or np.any(self.structure < 0) or np.any(self.structure > 1):
            raise ParamError("soil values must lie in [0, 1]")
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))

    def _index(self, x, y):
        i = np.rint((np.asarray(x, float) - self.origin[0]) / self.resolution).astype(int)
        j = np.rint((np.asarray(y, float) - self.origin[1]) / self.resolution).astype(int)
        if np.any(i < 0) or np.any(i >= self.slip.shape[1]) or np.any(j < 0) or np.any(j >= self.slip.shape[0]):
            raise QueryError(f"soil query ({x}, {y}) outside grid")
        return j, i

    def slip_at(self, x, y):
        j, i = self._index(x, y)
        return self.slip[j, i]

    def structure_at(self, x, y):
        j, i = self._index(x, y)
        return self.structure[j, i]


@dataclass
class World:
    height: HeightField
    soil: SoilMap
    wind: WindField
    params: WorldParams
    seed: int
    gas_source_specs: list = field(default_factory=list)

    def to_document(self) -> dict:
        doc = {
            "version": WORLD_SCHEMA_VERSION,
            "seed": self.seed,
            "params": _params_to_dict(self.params),
            "wind": {
                "mean_velocity": list(self.wind.mean_velocity),
                "gust_amplitude": self.wind.gust_amplitude,
                "gust_period": self.wind.gust_period,
                "seed": self.wind.seed,
            },
            "gas_sources": self.gas_source_specs,
        }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True)


def _params_to_dict(p: WorldParams) -> dict:
    d = asdict(p)
    return d


def _params_from_dict(d: dict) -> WorldParams:
    return WorldParams(
        extent=d.get("extent", 120.0),
        resolution=d.get("resolution", 0.5),
        craters=[CraterSpec(tuple(c["center"]), c["rim_radius"], c["rim_height"],
                            c.get("rim_width", 0.0), c.get("depth", 0.0)) for c in d.get("craters", [])],
        noise=NoiseSpec(**d.get("noise", {})),
        sand_patches=[SandPatch(tuple(s["center"]), s["radius"], s.get("slip", 0.45), s.get("structure", 0.3))
                      for s in d.get("sand_patches", [])],
        boulders=[BoulderSpec(tuple(b["center"]), b["radius"], b["height"]) for b in d.get("boulders", [])],
        critical_slope=d.get("critical_slope", DEFAULT_CRITICAL_SLOPE),
    )


def world_from_document(doc: dict) -> World:
    version = doc.get("version")
    if version != WORLD_SCHEMA_VERSION:
        raise ParamError(f"unsupported world schema version {version!r}")
    params = _params_from_dict(doc.get("params", {}))
    wind_doc = doc.get("wind", {})
    wind = WindField(
        mean_velocity=tuple(wind_doc.get("mean_velocity", (1.4, 0.0))),
        gust_amplitude=wind_doc.get("gust_amplitude", 0.0),
        gust_period=wind_doc.get("gust_period", 45.0),
        seed=wind_doc.get("seed", 0),
    )
    world = generate_world(doc.get("seed", 0), params)
    world.wind = wind
    world.gas_source_specs = list(doc.get("gas_sources", []))
    return world


def _band_limited_noise(rng: np.random.Generator, shape, resolution, spec: NoiseSpec) -> np.ndarray:
    if spec.amplitude <= 0:
        return np.zeros(shape)
    white = rng.standard_normal(shape)
    fy = np.fft.fftfreq(shape[0], d=resolution)
    fx = np.fft.fftfreq(shape[1], d=resolution)
    f = np.hypot(*np.meshgrid(fx, fy))
    lo, hi = 1.0 / spec.max_wavelength, 1.0 / spec.min_wavelength
    mask = (f >= lo) & (f <= hi)
    if not mask.any():
        raise ParamError("noise wavelength band excludes every representable frequency")
    spec_f = np.fft.fft2(white) * mask
    out = np.real(np.fft.ifft2(spec_f))
    sd = out.std()
    if sd > 0:
        out = out * (spec.amplitude / sd)
    return out


def generate_world(seed: int, params: WorldParams) -> World:
    """Build a deterministic world from (seed, params).

    The heightfield is centered on the ENU origin: band-limited noise plus
    analytic crater rings and boulder bumps. Sand patches lower the soil
    map's slip factor and structure score inside their discs.
    """
    if params.extent <= 0 or params.resolution <= 0:
        raise ParamError("extent and resolution must be positive")
    for c in params.craters:
        if c.rim_radius <= 0 or c.rim_radius >= params.extent / 2:
            raise ParamError(f"crater rim radius {c.rim_radius} invalid for extent {params.extent}")
    n = int(round(params.extent / params.resolution)) + 1
    half = (n - 1) * params.resolution / 2.0
    origin = (-half, -half)
    axis = np.linspace(-half, half, n)
    xx, yy = np.meshgrid(axis, axis)

    rng = np.random.default_rng(seed)
    heights = _band_limited_noise(rng, (n, n), params.resolution, params.noise)
    for c in params.craters:
        r = np.hypot(xx - c.center[0], yy - c.center[1])
        heights = heights + crater_height(c, r)
    for b in params.boulders:
        r2 = ((xx - b.center[0]) ** 2 + (yy - b.center[1]) ** 2) / b.radius**2
        heights = heights + b.height * np.maximum(0.0, 1.0 - r2)

    slip = np.ones((n, n))
    structure = np.ones((n, n))
    for s in params.sand_patches:
        inside = np.hypot(xx - s.center[0], yy - s.center[1]) <= s.radius
        slip[inside] = np.minimum(slip[inside], s.slip)
        structure[inside] = np.minimum(structure[inside], s.structure)

    hf = HeightField(heights, params.resolution, origin)
    soil = SoilMap(slip, structure, params.resolution, origin)
    return World(hf, soil, WindField(), params, seed)


def ground_truth_traversability(hf: HeightField, soil: SoilMap, x, y, critical_slope: float = DEFAULT_CRITICAL_SLOPE):
    """True drivability in [0, 1]: clamp(1 - slope/critical, 0, 1) * slip_factor."""
    slope = hf.slope(x, y)
    slope_term = np.clip(1.0 - slope / critical_slope, 0.0, 1.0)
    return slope_term * soil.slip_at(x, y)
