"""Surface sampling for the 3-D study: sphere source, mesh target.

Loads the checked-in PLY surface, draws area-uniform samples from it and
from the unit sphere, and writes both clouds to CSV (the inputs of the 3-D
registration configs).  Swap in data/bunny.ply after running
scripts/fetch_bunny.py to reproduce the scanned-surface setup.
"""

from pathlib import Path

import numpy as np

from sinkreg import (load_mesh_ply, normalize, sample_mesh_surface,
                     sample_sphere, save_point_cloud)

root = Path(__file__).resolve().parent.parent
mesh = load_mesh_ply(root / "data" / "blob_mesh.ply")
print(f"mesh: {mesh.vertices.shape[0]} vertices, {mesh.faces.shape[0]} faces, "
      f"total area {mesh.face_areas().sum():.3f}")

target = sample_mesh_surface(mesh, 5000, seed=0)
target, transform = normalize(target)
source = sample_sphere(5000, seed=1)
print(f"target cloud: centroid {np.round(target.points.mean(axis=0), 12)}, "
      f"max norm {np.linalg.norm(target.points, axis=1).max():.6f}")
print(f"source cloud: on the unit sphere, n = {source.n}")

out = Path(__file__).resolve().parent / "output" / "mesh"
out.mkdir(parents=True, exist_ok=True)
save_point_cloud(source, out / "sphere.csv")
save_point_cloud(target, out / "surface.csv")
print(f"clouds written to {out}")
