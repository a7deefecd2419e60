"""Wind-driven gas dispersion and the lagged mass-spectrometer sampling model.

Dispersion is a steady Gaussian plume per point source, evaluated in
wind-aligned coordinates with ground reflection; spread grows as a power law
of downwind distance (sigma = a * x**b, defaults a=0.08, b=0.9 on both axes).
Below a calm-wind cutoff the model switches to an isotropic quasi-steady
diffusion kernel so sources remain observable in still air.

The spectrometer sweeps a fixed list of mass bins; each bin's reading lags
the true concentration with a first-order filter whose time constant is
asymmetric: fast on rising inputs, slow on decay (residual gas in the
vacuum chamber).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class GasModelError(ValueError):
    pass


@dataclass(frozen=True)
class GasSource:
    """Continuous point emitter of one species (by atomic mass bin)."""

    position: tuple[float, float, float]
    species: int
    emission_rate: float
    release_height: float = 0.3

    def __post_init__(self):
        if self.emission_rate <= 0:
            raise GasModelError("emission rate must be > 0")
        if not 1 <= self.species <= 200:
            raise GasModelError(f"species {self.species} amu outside the instrument's 1-200 range")


@dataclass
class PlumeParams:
    sigma_a: float = 0.08
    sigma_b: float = 0.9
    calm_cutoff: float = 0.3        # m/s; below this, isotropic kernel
    calm_diffusivity: float = 0.5   # m^2/s for the quasi-steady kernel
    near_field_clamp: float = 0.1   # m; avoids the point-source singularity


def _plume_sigma(params: PlumeParams, x: float) -> float:
    return params.sigma_a * x**params.sigma_b


def _source_concentration(src: GasSource, wind_vel: np.ndarray, p: np.ndarray, params: PlumeParams) -> float:
    rel = p - np.asarray(src.position, dtype=float)
    z = rel[2]                      # height above the source's ground level
    h = src.release_height
    u = float(np.linalg.norm(wind_vel))

    if u < params.calm_cutoff:
        # steady-state diffusion from a continuous point source, with a
        # mirrored image source below ground
        d = params.calm_diffusivity
        r = max(params.near_field_clamp, math.sqrt(rel[0] ** 2 + rel[1] ** 2 + (z - h) ** 2))
        r_img = max(params.near_field_clamp, math.sqrt(rel[0] ** 2 + rel[1] ** 2 + (z + h) ** 2))
        return src.emission_rate / (4.0 * math.pi * d) * (1.0 / r + 1.0 / r_img)

    downwind_dir = wind_vel / u
    x = rel[0] * downwind_dir[0] + rel[1] * downwind_dir[1]
    if x <= 0.0:
        return 0.0
    y = -rel[0] * downwind_dir[1] + rel[1] * downwind_dir[0]
    sy = _plume_sigma(params, x)
    sz = _plume_sigma(params, x)
    norm = src.emission_rate / (2.0 * math.pi * u * sy * sz)
    lateral = math.exp(-(y**2) / (2.0 * sy**2))
    vertical = math.exp(-((z - h) ** 2) / (2.0 * sz**2)) + math.exp(-((z + h) ** 2) / (2.0 * sz**2))
    return norm * lateral * vertical


def concentration_at(sources, wind, p, t: float, params: PlumeParams | None = None,
                     background=None) -> dict[int, float]:
    """True concentration per species at ENU point p and time t.

    `wind` provides velocity_at(t); `p` is (east, north, up). Contributions
    from sources of the same species add; a per-species background (default
    zero, e.g. helium) is included.
    """
    params = params or PlumeParams()
    p = np.asarray(p, dtype=float)
    wind_vel = np.asarray(wind.velocity_at(t), dtype=float)
    out: dict[int, float] = {}
    if background:
        out.update({int(k): float(v) for k, v in background.items()})
    for src in sources:
        c = _source_concentration(src, wind_vel, p, params)
        out[src.species] = out.get(src.species, 0.0) + c
    return out


@dataclass
class SpectrometerModel:
    """Quadrupole instrument model: bin sweep timing, lag, and dynamic range."""

    bins: tuple[int, ...] = (4,)
    dwell: float = 0.0018
    rise_tau: float = 1.0
    decay_tau: float = 4.0
    inlet_height: float = 0.75
    detection_floor: float = 0.05
    dynamic_range: float = 1e6

    def __post_init__(self):
        if not self.bins:
            raise GasModelError("bin list must be non-empty")
        if not (self.decay_tau > self.rise_tau > 0):
            raise GasModelError("need decay_tau > rise_tau > 0")
        if self.dwell <= 0:
            raise GasModelError("dwell must be > 0")

    @property
    def sweep_duration(self) -> float:
        return len(self.bins) * self.dwell

    def clip(self, value: float) -> float:
        return min(max(value, self.detection_floor), self.detection_floor * self.dynamic_range)


@dataclass
class SpectrometerState:
    """Internal (unclipped) filter state per bin plus the last sample time."""

    values: dict[int, float] = field(default_factory=dict)
    t: float = 0.0


@dataclass(frozen=True)
class BinReading:
    t: float
    species: int
    value: float


def spectrometer_read(model: SpectrometerModel, true_concentrations, state: SpectrometerState,
                      dt: float) -> tuple[list[BinReading], SpectrometerState]:
    """Advance the instrument by dt and perform one sweep over the bins.

    Each bin's filter state moves toward the true concentration with a
    first-order lag (rise_tau when rising, decay_tau when falling); readings
    are the filter state clipped to [floor, floor * dynamic_range] and
    stamped at their own slot within the sweep. Call intervals are expected
    to be much longer than the sweep itself.
    """
    if dt <= 0:
        raise GasModelError("dt must be > 0")
    t_call = state.t + dt
    values = dict(state.values)
    readings = []
    for i, amu in enumerate(model.bins):
        target = float(true_concentrations.get(amu, 0.0))
        current = values.get(amu, 0.0)
        tau = model.rise_tau if target > current else model.decay_tau
        alpha = 1.0 - math.exp(-dt / tau)
        current = current + alpha * (target - current)
        values[amu] = current
        readings.append(BinReading(t=t_call + i * model.dwell, species=amu, value=model.clip(current)))
    return readings, replace(state, values=values, t=t_call)
