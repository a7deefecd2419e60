"""Build a synthetic volcanic world and look at its layers.

Generates a crater with band-limited noise, sand patches, and boulder bumps;
prints terrain statistics; exports the heightfield in the binary raster
format and a quicklook PNG.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from volcnav.raster import write_raster
from volcnav.world import (
    BoulderSpec,
    CraterSpec,
    NoiseSpec,
    SandPatch,
    WorldParams,
    generate_world,
    ground_truth_traversability,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

params = WorldParams(
    extent=140.0,
    resolution=0.5,
    craters=[CraterSpec(center=(0.0, 0.0), rim_radius=50.0, rim_height=4.0, rim_width=14.0)],
    noise=NoiseSpec(amplitude=0.15, min_wavelength=10.0, max_wavelength=30.0),
    sand_patches=[SandPatch((20.0, -35.0), 8.0, slip=0.45, structure=0.3)],
    boulders=[BoulderSpec((35.0, 35.0), 0.6, 0.5), BoulderSpec((-40.0, 10.0), 0.8, 0.6)],
)
world = generate_world(seed=42, params=params)

h = world.height.heights
print(f"grid: {world.height.width} x {world.height.height} cells at {world.height.resolution} m")
print(f"height range: {h.min():.2f} .. {h.max():.2f} m (rim should peak near 4 m)")
print(f"slope at rim crest (50, 0): {np.degrees(world.height.slope(50.0, 0.0)):.1f} deg")
print(f"slope on rim flank (42, 0): {np.degrees(world.height.slope(42.0, 0.0)):.1f} deg")
print(f"slip inside sand patch: {world.soil.slip_at(20.0, -35.0):.2f}, outside: {world.soil.slip_at(-50.0, -50.0):.2f}")

# ground-truth traversability along a radial cut through the crater
xs = np.linspace(-65.0, 65.0, 261)
scores = [ground_truth_traversability(world.height, world.soil, x, 0.0) for x in xs]
print(f"radial traversability: min {min(scores):.2f} (crater wall), at crest {scores[230]:.2f}")

write_raster(OUT / "terrain.vras", h, world.height.resolution, world.height.origin)
print(f"raster written to {OUT / 'terrain.vras'} ({(OUT / 'terrain.vras').stat().st_size} bytes)")

fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
e0, n0, e1, n1 = world.height.bounds()
extent = (e0, e1, n0, n1)
im0 = axes[0].imshow(h, origin="lower", extent=extent, cmap="terrain")
axes[0].set_title("height (m)")
im1 = axes[1].imshow(world.soil.slip, origin="lower", extent=extent, cmap="copper", vmin=0, vmax=1)
axes[1].set_title("slip factor")
tt = np.array([[ground_truth_traversability(world.height, world.soil, x, y)
                for x in np.linspace(e0 + 1, e1 - 1, 200)]
               for y in np.linspace(n0 + 1, n1 - 1, 200)])
im2 = axes[2].imshow(tt, origin="lower", extent=extent, cmap="RdYlGn", vmin=0, vmax=1)
axes[2].set_title("ground-truth traversability")
for ax, im in zip(axes, (im0, im1, im2)):
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig(OUT / "terrain_world.png", dpi=110)
print(f"figure saved to {OUT / 'terrain_world.png'}")
