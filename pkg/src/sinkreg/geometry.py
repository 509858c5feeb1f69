"""Point-cloud data model, dataset generators, mesh sampling and file formats.

Clouds always carry uniform weights 1/n, so a cloud of n points stands for
the empirical measure (1/n) sum_i delta_{x_i}.  All generators are pure
functions of their parameters and an explicit integer seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError

CSV_FMT = "%.17g"  # lossless float64 round trip


@dataclass(frozen=True)
class PointCloud:
    """n weighted points in R^d with implicit uniform weight 1/n."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("point cloud needs an (n, d) array with n >= 1")
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle surface given by (V, 3) vertices and (F, 3) vertex indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError("vertices must be a (V, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) index array")
        if faces.size and (faces.min() < 0 or faces.max() >= verts.shape[0]):
            raise ValueError("face index out of range")
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    def face_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class AffineTransform:
    """Record of the (shift, scale) applied by normalize: y = (x - shift)/scale."""

    shift: np.ndarray
    scale: float
    degenerate: bool = False

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.shift) / self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.shift


def normalize(cloud: PointCloud) -> tuple[PointCloud, AffineTransform]:
    """Center the cloud at the origin and scale the max Euclidean norm to 1.

    When all points coincide the scale is undefined; the centered cloud is
    returned with scale 1 and the transform flagged degenerate.
    """
    shift = cloud.points.mean(axis=0)
    centered = cloud.points - shift
    scale = float(np.linalg.norm(centered, axis=1).max())
    if scale <= 1e-15 * (1.0 + float(np.linalg.norm(shift))):
        return PointCloud(centered), AffineTransform(shift, 1.0, degenerate=True)
    return PointCloud(centered / scale), AffineTransform(shift, scale)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def save_point_cloud(cloud: PointCloud, path) -> Path:
    path = Path(path)
    np.savetxt(path, cloud.points, fmt=CSV_FMT, delimiter=",")
    return path


def _load_csv(path: Path) -> PointCloud:
    rows = []
    dim = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if dim is None:
                dim = len(parts)
            elif len(parts) != dim:
                raise ParseError(
                    f"{path}: inconsistent dimension at row {lineno} "
                    f"(expected {dim} columns, got {len(parts)})"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{path}: bad number at row {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty point-cloud file")
    return PointCloud(np.asarray(rows))


_PLY_SIZES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _parse_ply_header(raw: bytes):
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file (missing ply/end_header)")
    end = raw.index(b"\n", end) + 1
    header = raw[:end].decode("ascii", errors="replace")
    fmt = None
    elements = []  # (name, count, [(prop_name, type, list_count_type|None)])
    for line in header.splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError("PLY property before any element")
            if tok[1] == "list":
                elements[-1][2].append((tok[4], tok[3], tok[2]))
            else:
                elements[-1][2].append((tok[2], tok[1], None))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"unsupported PLY format: {fmt}")
    return fmt, elements, end


def load_mesh_ply(path) -> TriangleMesh:
    """Parse an ascii or binary little-endian PLY mesh (vertices + faces).

    Extra scalar vertex properties are skipped.  Degenerate (zero-area)
    faces are dropped.
    """
    path = Path(path)
    raw = path.read_bytes()
    fmt, elements, offset = _parse_ply_header(raw)

    verts = None
    faces = []
    if fmt == "ascii":
        lines = raw[offset:].decode("ascii", errors="replace").splitlines()
        cursor = 0
        for name, count, props in elements:
            if cursor + count > len(lines):
                raise ParseError(f"PLY element '{name}': unexpected end of file")
            chunk = lines[cursor:cursor + count]
            cursor += count
            if name == "vertex":
                idx = {p[0]: k for k, p in enumerate(props)}
                if not all(ax in idx for ax in ("x", "y", "z")):
                    raise ParseError("PLY vertex element lacks x, y, z properties")
                verts = np.empty((count, 3))
                for i, line in enumerate(chunk):
                    tok = line.split()
                    try:
                        verts[i] = [float(tok[idx["x"]]), float(tok[idx["y"]]), float(tok[idx["z"]])]
                    except (IndexError, ValueError) as exc:
                        raise ParseError(f"PLY vertex {i}: {exc}") from exc
            elif name == "face":
                for i, line in enumerate(chunk):
                    tok = line.split()
                    cnt = int(tok[0])
                    if len(tok) < 1 + cnt:
                        raise ParseError(f"PLY face {i}: truncated index list")
                    poly = [int(t) for t in tok[1:1 + cnt]]
                    faces.extend(_fan_triangulate(poly, i))
    else:
        view = memoryview(raw)
        pos = offset
        for name, count, props in elements:
            if name == "vertex" and all(p[2] is None for p in props):
                names = [p[0] for p in props]
                if not all(ax in names for ax in ("x", "y", "z")):
                    raise ParseError("PLY vertex element lacks x, y, z properties")
                dt = np.dtype([(p[0], "<" + _PLY_SIZES[p[1]][0]) for p in props])
                need = dt.itemsize * count
                if pos + need > len(raw):
                    raise ParseError("PLY vertex data truncated")
                rec = np.frombuffer(view[pos:pos + need], dtype=dt)
                pos += need
                verts = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
            else:
                pos = _read_binary_element(view, pos, name, count, props, faces)
    if verts is None:
        raise ParseError("PLY file has no vertex element")
    faces_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    mesh = TriangleMesh(verts, faces_arr)
    keep = mesh.face_areas() > 0.0
    return TriangleMesh(verts, faces_arr[keep])


def _fan_triangulate(poly, face_idx):
    if len(poly) < 3:
        raise ParseError(f"PLY face {face_idx}: fewer than 3 vertices")
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def _read_binary_element(view, pos, name, count, props, faces):
    for i in range(count):
        poly = None
        for pname, ptype, ltype in props:
            if ltype is None:
                pos += _PLY_SIZES[ptype][1]
            else:
                code, size = _PLY_SIZES[ltype]
                (cnt,) = struct.unpack_from("<" + code, view, pos)
                pos += size
                icode, isize = _PLY_SIZES[ptype]
                vals = struct.unpack_from("<" + icode * cnt, view, pos)
                pos += isize * cnt
                if pname in ("vertex_indices", "vertex_index"):
                    poly = vals
        if name == "face":
            if poly is None:
                raise ParseError(f"PLY face {i}: no vertex index list")
            faces.extend(_fan_triangulate(list(poly), i))
    return pos


def load_point_cloud(path, format: str | None = None) -> PointCloud:
    """Load a cloud from CSV (one point per row) or PLY (vertices only)."""
    path = Path(path)
    if format is None:
        format = "ply" if path.suffix.lower() == ".ply" else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "ply":
        mesh = load_mesh_ply(path)
        return PointCloud(mesh.vertices)
    raise ParseError(f"unknown point-cloud format: {format!r}")


# ---------------------------------------------------------------------------
# Dataset generators
# ---------------------------------------------------------------------------

# The 2-D benchmark pair is a fixed, documented mixture: the source is two
# isotropic Gaussian blobs, the target adds a third annular component so the
# support has a hole.  Constants are in pre-normalization coordinates.
_SRC_CENTERS = np.array([[-0.55, -0.35], [0.45, 0.50]])
_SRC_STD = np.array([0.22, 0.16])
_SRC_WEIGHTS = np.array([0.55, 0.45])

_TGT_CENTERS = np.array([[-0.45, 0.55], [0.60, -0.40]])
_TGT_STD = np.array([0.13, 0.18])
_TGT_RING_CENTER = np.array([0.05, 0.05])
_TGT_RING_RADIUS = (0.55, 0.045)  # mean, std of the radius
_TGT_WEIGHTS = np.array([0.30, 0.30, 0.40])


def sample_blobs_2d(n: int, side: str, seed: int, normalized: bool = True) -> PointCloud:
    """Draw n points from the fixed 2-D blob mixture for the given side.

    side 'source' is a 2-Gaussian mixture, side 'target' a 3-component
    mixture whose last component is a noisy ring.  With normalized=True the
    sample is centered and scaled to max norm 1.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    if side == "source":
        comp = rng.choice(2, size=n, p=_SRC_WEIGHTS)
        pts = _SRC_CENTERS[comp] + _SRC_STD[comp, None] * rng.standard_normal((n, 2))
    elif side == "target":
        comp = rng.choice(3, size=n, p=_TGT_WEIGHTS)
        pts = np.empty((n, 2))
        gauss = comp < 2
        k = int(gauss.sum())
        cg = comp[gauss]
        pts[gauss] = _TGT_CENTERS[cg] + _TGT_STD[cg, None] * rng.standard_normal((k, 2))
        ring = ~gauss
        k = int(ring.sum())
        theta = rng.uniform(0.0, 2.0 * np.pi, size=k)
        radius = rng.normal(_TGT_RING_RADIUS[0], _TGT_RING_RADIUS[1], size=k)
        pts[ring] = _TGT_RING_CENTER + radius[:, None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=1
        )
    else:
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    cloud = PointCloud(pts)
    if normalized:
        cloud, _ = normalize(cloud)
    return cloud


def sample_sphere(n: int, seed: int) -> PointCloud:
    """n points uniform on the unit sphere S^2 (normalized Gaussian draws)."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, 3))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0
    return PointCloud(g / norms[:, None])


def sample_mesh_surface(mesh: TriangleMesh, n: int, seed: int) -> PointCloud:
    """n points area-uniform on the mesh surface, uniform in each triangle."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    areas = mesh.face_areas()
    total = areas.sum()
    if mesh.faces.shape[0] == 0 or total <= 0.0:
        raise ValueError("mesh has no non-degenerate face to sample")
    rng = np.random.default_rng(seed)
    face = rng.choice(mesh.faces.shape[0], size=n, p=areas / total)
    a = mesh.vertices[mesh.faces[face, 0]]
    b = mesh.vertices[mesh.faces[face, 1]]
    c = mesh.vertices[mesh.faces[face, 2]]
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    return PointCloud(a + u[:, None] * (b - a) + v[:, None] * (c - a))


# ---------------------------------------------------------------------------
# Trajectory persistence
# ---------------------------------------------------------------------------

MANIFEST_KEYS = (
    "n", "d", "tau", "sigma", "lambda", "loss", "optimizer", "seed",
    "final_loss", "wall_time_s",
)


def save_frames(frames, out_dir, manifest: dict) -> Path:
    """Write frame_<t>.csv files plus manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, pts in enumerate(frames):
        np.savetxt(out_dir / f"frame_{t}.csv", pts, fmt=CSV_FMT, delimiter=",")
    full = {key: manifest.get(key) for key in MANIFEST_KEYS}
    full.update(manifest)
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(full, indent=2, sort_keys=True) + "\n")
    return manifest_path


def save_trajectory(bundle, out_dir, extra: dict | None = None) -> Path:
    """Persist a trajectory bundle: one frame CSV per time node plus manifest.

    Also writes momentum_<t>.csv so saved deformations can be re-applied to
    new clouds.
    """
    tau = bundle.z.shape[0] - 1
    n, d = bundle.z.shape[1], bundle.z.shape[2]
    manifest = {
        "n": n, "d": d, "tau": tau, "sigma": bundle.sigma,
    }
    if extra:
        manifest.update(extra)
    out_dir = Path(out_dir)
    path = save_frames(bundle.z, out_dir, manifest)
    for t in range(tau + 1):
        np.savetxt(out_dir / f"momentum_{t}.csv", bundle.a[t], fmt=CSV_FMT, delimiter=",")
    return path


def load_trajectory(in_dir):
    """Rebuild (TrajectoryBundle, manifest) from a save_trajectory directory."""
    from .lddmm import TrajectoryBundle  # local import to avoid a cycle

    in_dir = Path(in_dir)
    manifest = json.loads((in_dir / "manifest.json").read_text())
    tau = int(manifest["tau"])
    z = np.stack([_load_csv(in_dir / f"frame_{t}.csv").points for t in range(tau + 1)])
    a = np.stack([_load_csv(in_dir / f"momentum_{t}.csv").points for t in range(tau + 1)])
    bundle = TrajectoryBundle(z=z, a=a, sigma=float(manifest["sigma"]),
                              sources=PointCloud(z[0]))
    return bundle, manifest
