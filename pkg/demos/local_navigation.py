"""Local planning around obstacles: elevation map, SDF/GDF fields, commands.

Scans a boulder field into the robot-centric map, scores and refines
traversability, builds the distance fields, and steers a simulated robot
through the gap between two boulders.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from volcnav.geo import Pose
from volcnav.local_planner import ControllerState, build_fields, command
from volcnav.mapping import ElevationMap, TraversabilityParams, simulate_range_scan
from volcnav.robot import RobotState, step
from volcnav.world import BoulderSpec, WorldParams, generate_world

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

world = generate_world(
    seed=4,
    params=WorldParams(
        extent=40.0,
        resolution=0.25,
        boulders=[BoulderSpec((2.0, 1.2), 0.6, 0.5), BoulderSpec((2.2, -1.6), 0.7, 0.5)],
    ),
)

emap = ElevationMap(center=(0.0, 0.0), size=12.0, resolution=0.06)
pose = Pose.from_xy_yaw(-4.0, 0.0, 0.0)
emap.recenter(pose.position)
emap.update(pose.position, simulate_range_scan(world, pose, pose, emap), unique_cells=True)
emap.score_traversability(TraversabilityParams())
emap.refine(TraversabilityParams())
obstacle_cells = int(np.count_nonzero(emap.traversability < 0.2))
print(f"map scored: {obstacle_cells} obstacle cells "
      f"({100 * obstacle_cells / emap.traversability.size:.1f}% of the grid)")

goal = (4.5, 0.0)
fields = build_fields(emap, goal, downsample=2)
print(f"fields built at {fields.resolution:.2f} m: goal cell {fields.goal_cell}, "
      f"gdf(goal)={fields.gdf[fields.goal_cell]:.2f} m")

# drive the command loop: the robot should thread the boulder gap
robot = RobotState(pose)
controller = ControllerState()
track = [robot.pose.position[:2].copy()]
for k in range(400):
    cmd = command(robot.pose, fields, controller, 0.1, goal_xy=goal)
    if cmd.at_goal:
        print(f"reached goal after {k} ticks, {0.1 * k:.1f} s")
        break
    robot = step(robot, (cmd.vx, cmd.vy, cmd.omega), 0.1, world)
    track.append(robot.pose.position[:2].copy())
track = np.array(track)
clearance = min(
    np.hypot(*(track - np.array([2.0, 1.2])).T).min(),
    np.hypot(*(track - np.array([2.2, -1.6])).T).min(),
)
print(f"closest approach to a boulder center: {clearance:.2f} m")
print(f"max speed along the run: {np.hypot(*np.diff(track, axis=0).T).max() / 0.1:.2f} m/s")

fig, axes = plt.subplots(1, 3, figsize=(15, 4.6))
half = emap.size / 2
extent = (emap.center[0] - half, emap.center[0] + half, emap.center[1] - half, emap.center[1] + half)
axes[0].imshow(emap.traversability, origin="lower", extent=extent, cmap="RdYlGn", vmin=0, vmax=1)
axes[0].set_title("refined traversability")
axes[1].imshow(fields.sdf, origin="lower", extent=extent, cmap="magma", vmin=0, vmax=1)
axes[1].set_title("normalized distance to obstacles")
gdf = np.where(np.isfinite(fields.gdf), fields.gdf, np.nan)
axes[2].imshow(gdf, origin="lower", extent=extent, cmap="viridis")
axes[2].set_title("geodesic distance to goal (m)")
for ax in axes:
    ax.plot(track[:, 0], track[:, 1], color="w", lw=2)
    ax.scatter(*goal, marker="*", color="tab:red", s=140, zorder=3)
fig.tight_layout()
fig.savefig(OUT / "local_navigation.png", dpi=110)
print(f"figure saved to {OUT / 'local_navigation.png'}")
