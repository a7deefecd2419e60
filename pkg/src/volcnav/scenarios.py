"""Ready-made worlds and missions used by the demos and the acceptance suite.

Three fixtures cover the survey archetypes: a crater-rim loop survey
for full-stack autonomy, a gentle-wind transect past a helium source (a
clean detection), and a gusty crosswind transect with the source displaced
downwind (a miss).
"""

from __future__ import annotations

import math

import numpy as np

from .estimator import EstimatorConfig
from .geo import GeoPoint
from .mission import MissionConfig, MissionLog
from .plume import GasSource, SpectrometerModel, SpectrometerState, concentration_at, spectrometer_read
from .roadgraph import MissionPlan, RoadGraph, load_graph, rim_loop_graph_document
from .robot import GnssSpec, OdomSpec, SensorRig, SlamSpec
from .world import (
    BoulderSpec,
    CraterSpec,
    NoiseSpec,
    SandPatch,
    WindField,
    World,
    WorldParams,
    generate_world,
)

SURVEY_ORIGIN = GeoPoint(37.73, 15.004, 1900.0)


def rim_survey_scenario(seed: int = 7):
    """Crater-rim loop: ~314 m around a gentle rim with scattered boulders.

    Returns (world, graph, mission, config). The road rides the rim crest;
    boulder bumps sit 1.0-2.4 m off the trail so the local planner has to
    swerve without losing the path.
    """
    rim_r = 50.0
    boulders = []
    for k, ang_deg in enumerate((30, 75, 105, 160, 200, 265, 300, 330)):
        ang = math.radians(ang_deg)
        offset = 1.0 if ang_deg == 160 else (2.4 if k % 2 == 0 else -2.2)
        r = rim_r + offset
        boulders.append(BoulderSpec((r * math.cos(ang), r * math.sin(ang)), 0.5, 0.45))
    params = WorldParams(
        extent=140.0,
        resolution=0.5,
        craters=[CraterSpec(center=(0.0, 0.0), rim_radius=rim_r, rim_height=4.0, rim_width=14.0)],
        noise=NoiseSpec(amplitude=0.12, min_wavelength=10.0, max_wavelength=30.0),
        sand_patches=[SandPatch((0.0, -60.0), 4.0, slip=0.55, structure=0.5)],
        boulders=boulders,
    )
    world = generate_world(seed, params)
    # wind runs tangent to the rim at the source so the plume hugs the trail
    src_ang = math.radians(45.0)
    tangent = (-math.sin(src_ang), math.cos(src_ang))
    world.wind = WindField((1.4 * tangent[0], 1.4 * tangent[1]), gust_amplitude=0.6,
                           gust_period=37.0, seed=seed)
    sx, sy = rim_r * math.cos(src_ang), rim_r * math.sin(src_ang)
    world.gas_source_specs = [
        {
            "position": [sx, sy, float(world.height.sample(sx, sy))],
            "species": 4,
            "rate": 100.0,
            "release_height": 0.75,
        }
    ]

    doc, _ = rim_loop_graph_document(SURVEY_ORIGIN, radius=rim_r, n_rim=40)
    graph = load_graph(doc)
    node = {n["id"]: GeoPoint(n["lat"], n["lon"], n["alt"]) for n in doc["nodes"]}
    targets = [node[0], node[13], node[27]]
    mission = MissionPlan(targets, return_to_start=True)

    config = MissionConfig(
        timeout_s=900.0,
        solve_iters=2,
        rig=SensorRig(
            gnss=GnssSpec(sigma_xy=1.5, sigma_z=3.0, rate_hz=5.0),
            odom=OdomSpec(rate_hz=2.5, sigma_xy=0.01, sigma_yaw=0.002),
            slam=SlamSpec(rate_hz=10.0, drift_rate=0.002, yaw_drift_rate=0.0002,
                          degeneracy_gain=2.0, base_sigma=0.02),
        ),
        estimator=EstimatorConfig(window_duration=6.0),
        spectrometer=SpectrometerModel(bins=(4,)),
    )
    return world, graph, mission, config


def gas_transect_scenario(miss: bool = False, seed: int = 3):
    """Flat-world transect past a helium source.

    Detection variant: light steady wind (1.4 m/s, ~5 km/h) blowing the
    plume across the track, source 1.2 m off the line. Miss variant: strong
    gusty crosswind (peaks 10.8 m/s, ~39 km/h) pointing away from the track
    with the source displaced downwind, so the track stays upwind.
    """
    params = WorldParams(extent=80.0, resolution=0.5)
    world = generate_world(seed, params)
    if miss:
        world.wind = WindField((0.0, -6.4), gust_amplitude=4.4, gust_period=20.0, seed=seed)
        source = {"position": [10.0, -2.0, 0.0], "species": 4, "rate": 100.0, "release_height": 0.75}
    else:
        world.wind = WindField((0.0, -1.4), gust_amplitude=0.0, gust_period=30.0, seed=seed)
        source = {"position": [10.0, 1.2, 0.0], "species": 4, "rate": 100.0, "release_height": 0.75}
    world.gas_source_specs = [source]
    start, end = np.array([-25.0, 0.0]), np.array([25.0, 0.0])
    return world, start, end


def run_gas_transect(world: World, start, end, speed: float = 0.8,
                     model: SpectrometerModel | None = None, dt: float = 0.1) -> MissionLog:
    """Drive a straight line at constant speed, sampling the spectrometer.

    A scripted pass with no estimator in the loop: positions in the log are
    ground truth. Produces a complete mission log for the metrics pipeline.
    """
    model = model or SpectrometerModel(bins=(4,))
    sources = [
        GasSource(tuple(s["position"]), int(s["species"]), float(s["rate"]),
                  float(s.get("release_height", 0.3)))
        for s in world.gas_source_specs
    ]
    log = MissionLog({"seed": world.seed, "config": "gas-transect"})
    log.append(0.0, "mission-start")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.linalg.norm(end - start))
    direction = (end - start) / length
    duration = length / speed
    state = SpectrometerState()
    t = 0.0
    while t <= duration:
        pos = start + direction * speed * t
        z = float(world.height.sample(pos[0], pos[1]))
        log.append(t, "true-pose", position=[float(pos[0]), float(pos[1]), z], yaw=float(math.atan2(direction[1], direction[0])))
        inlet = np.array([pos[0], pos[1], z + model.inlet_height])
        conc = concentration_at(sources, world.wind, inlet, t)
        readings, state = spectrometer_read(model, conc, state, dt)
        for r in readings:
            log.append(t, "gas", amu=r.species, value=r.value,
                       position=[float(pos[0]), float(pos[1]), z], stamp=r.t)
        t += dt
    log.append(t, "mission-complete")
    return log
