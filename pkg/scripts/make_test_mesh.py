"""Regenerate data/blob_mesh.ply, the small bumpy-sphere test surface.

The repo ships this mesh so the 3-D protocol and the mesh-sampling tests
run without downloads; scripts/fetch_bunny.py grabs the real scanned
surface for paper-style figures.
"""

import sys
from pathlib import Path

import numpy as np


def icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=int)
    return verts, faces


def subdivide(verts, faces):
    verts = list(map(tuple, verts))
    cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            v = 0.5 * (np.array(verts[i]) + np.array(verts[j]))
            v /= np.linalg.norm(v)
            cache[key] = len(verts)
            verts.append(tuple(v))
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(verts), np.array(out, dtype=int)


def main(out_path):
    verts, faces = icosahedron()
    for _ in range(3):
        verts, faces = subdivide(verts, faces)
    # radial bumps give the surface a blobby, bunny-ish silhouette
    theta = np.arctan2(verts[:, 1], verts[:, 0])
    phi = np.arccos(np.clip(verts[:, 2], -1, 1))
    r = 1.0 + 0.18 * np.sin(3 * theta) * np.sin(2 * phi) + 0.12 * np.cos(4 * phi)
    verts = verts * r[:, None]
    with open(out_path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\ncomment bumpy icosphere test surface\n")
        fh.write(f"element vertex {len(verts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write(f"element face {len(faces)}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for v in verts:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
    print(f"wrote {len(verts)} vertices / {len(faces)} faces to {out_path}")


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else \
        Path(__file__).resolve().parent.parent / "data" / "blob_mesh.ply"
    main(target)
