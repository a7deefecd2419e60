"""Plan a mission over a road network: projection, A*, resampling.

Builds a crater-rim loop graph with an access spur, projects off-graph
targets, and assembles the resampled mission path.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from volcnav.geo import EnuPoint, GeoPoint, enu_to_lla
from volcnav.roadgraph import MissionPlan, load_graph, plan, project_target, rim_loop_graph_document

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

origin = GeoPoint(37.73, 15.004, 1900.0)
doc, manifest = rim_loop_graph_document(origin, radius=50.0, n_rim=40, access_length=25.0)
graph = load_graph(doc)
print(f"graph: {manifest['nodes']} nodes, {manifest['edges']} edges")

# a target off the graph projects onto the nearest edge
offside = enu_to_lla(origin, EnuPoint(62.0, 14.0, 0.0))
proj = project_target(graph, offside)
print(f"off-graph target projects {proj.distance:.2f} m onto edge {proj.edge}")

mission = MissionPlan(
    [
        enu_to_lla(origin, EnuPoint(75.0, 0.0, 0.0)),   # end of the access spur
        enu_to_lla(origin, EnuPoint(-50.0, 0.0, 0.0)),  # far side of the rim
        offside,
    ],
    return_to_start=False,
)
path = plan(graph, mission, spacing=0.5)
print(f"planned path: {len(path.enu)} resampled vertices, {path.length:.1f} m")
steps = np.hypot(*np.diff(path.enu[:, :2], axis=0).T)
print(f"resample spacing: median {np.median(steps):.3f} m, max {steps.max():.3f} m")
print(f"vertex tags: {sum(1 for t in path.tags if t == 'connector')} connector, "
      f"{sum(1 for t in path.tags if t == 'graph')} graph")

fig, ax = plt.subplots(figsize=(7, 7))
for a, b in graph.edges:
    pa, pb = graph.enu[a], graph.enu[b]
    ax.plot([pa[0], pb[0]], [pa[1], pb[1]], color="0.8", lw=1, zorder=1)
ax.plot(path.enu[:, 0], path.enu[:, 1], color="tab:blue", lw=2, zorder=2, label="mission path")
for i, idx in enumerate(path.target_indices):
    ax.scatter(*path.enu[idx][:2], marker="*", s=160, color="tab:red", zorder=3)
    ax.annotate(f"T{i}", path.enu[idx][:2], textcoords="offset points", xytext=(6, 6))
ax.set_aspect("equal")
ax.set_xlabel("east (m)")
ax.set_ylabel("north (m)")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "global_planning.png", dpi=110)
print(f"figure saved to {OUT / 'global_planning.png'}")
