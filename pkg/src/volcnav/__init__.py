"""volcnav: deterministic mission simulation and navigation for volcanic gas surveys.

Library layout:

- geo            WGS-84 <-> local ENU conversion, geoid correction, pose algebra
- world          procedural volcanic terrain, soil/slip maps, wind
- raster         shared binary raster format for terrain and field snapshots
- robot          kinematic base with slip plus simulated GNSS/odometry/SLAM
- plume          Gaussian-plume gas dispersion and the lagged spectrometer
- roadgraph      geo-referenced road networks, A* planning, path resampling
- estimator      sliding-window factor-graph fusion with map alignment
- mapping        robot-centric elevation map, traversability, refinement
- local_planner  adaptive-lookahead path manager and SDF/GDF command fields
- mission        the closed mission loop, event log, autonomy metrics
- benchmarks     estimator accuracy benchmark (fusion vs raw GNSS)
- scenarios      ready-made worlds and missions for demos and acceptance
- service        FastAPI mission service with WebSocket telemetry
"""

from .geo import EnuPoint, GeoidModel, GeoPoint, Pose, compose, enu_to_lla, inverse, lla_to_enu
from .mission import (
    MissionConfig,
    MissionLog,
    MissionRunner,
    MetricsReport,
    compute_metrics,
    detect_peaks,
    run_mission,
)
from .roadgraph import GlobalPath, MissionPlan, RoadGraph, load_graph, plan, project_target
from .world import World, WorldParams, WindField, generate_world, ground_truth_traversability

__version__ = "0.1.0"

__all__ = [
    "EnuPoint",
    "GeoidModel",
    "GeoPoint",
    "GlobalPath",
    "MetricsReport",
    "MissionConfig",
    "MissionLog",
    "MissionPlan",
    "MissionRunner",
    "Pose",
    "RoadGraph",
    "WindField",
    "World",
    "WorldParams",
    "compose",
    "compute_metrics",
    "detect_peaks",
    "enu_to_lla",
    "generate_world",
    "ground_truth_traversability",
    "inverse",
    "lla_to_enu",
    "load_graph",
    "plan",
    "project_target",
    "run_mission",
]
