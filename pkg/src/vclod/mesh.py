"""Indexed triangle meshes, OBJ I/O and geometric quality metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

#: Triangles with an area below this (m^2) are treated as degenerate.
MIN_TRIANGLE_AREA = 1e-12


class MeshError(ValueError):
    """Structural problem with a mesh (bad indices, degenerate faces, empty)."""


class ObjParseError(MeshError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertex positions (n, 3) in meters and triangle indices (m, 3)."""

    vertices: np.ndarray
    triangles: np.ndarray
    name: str | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if len(t):
            if t.min() < 0 or t.max() >= len(v):
                raise MeshError(
                    f"triangle index out of range for {len(v)} vertices")
            if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2])
                      | (t[:, 0] == t[:, 2])):
                raise MeshError("triangle repeats a vertex index")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = self.triangles
        return self.vertices[t[:, 0]], self.vertices[t[:, 1]], self.vertices[t[:, 2]]

    def triangle_areas(self) -> np.ndarray:
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def validate(self) -> "TriangleMesh":
        """Raise `MeshError` if the mesh is empty or has degenerate triangles."""
        if self.triangle_count == 0:
            raise MeshError("mesh has zero triangles")
        areas = self.triangle_areas()
        bad = np.flatnonzero(areas < MIN_TRIANGLE_AREA)
        if len(bad):
            raise MeshError(
                f"{len(bad)} degenerate triangle(s), first at index {bad[0]}")
        return self

    def compact(self) -> "TriangleMesh":
        """Drop unreferenced vertices, keeping the original vertex order."""
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.ravel()] = True
        remap = np.cumsum(used) - 1
        return TriangleMesh(self.vertices[used], remap[self.triangles], self.name)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles))

    __hash__ = None


@dataclass(frozen=True)
class MeshMetrics:
    triangle_count: int
    vertex_count: int
    surface_area: float
    bounding_box: tuple[tuple[float, float, float], tuple[float, float, float]] = field(
        default=((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)))

    def to_dict(self) -> dict:
        return {
            "triangle_count": self.triangle_count,
            "vertex_count": self.vertex_count,
            "surface_area": self.surface_area,
            "bounding_box": [list(self.bounding_box[0]), list(self.bounding_box[1])],
        }


def load_obj(path) -> TriangleMesh:
    """Read the `v`/`f` subset of a Wavefront OBJ file.

    Faces with more than three corners are fan-triangulated around their
    first corner. Negative (relative) indices are accepted. Everything
    else (normals, texture coordinates, groups, materials) is ignored.
    """
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError("vertex needs three coordinates", lineno)
                try:
                    vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError:
                    raise ObjParseError(f"bad vertex coordinate in {line!r}", lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ObjParseError("face needs at least three corners", lineno)
                idx = []
                for token in parts[1:]:
                    head = token.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ObjParseError(f"bad face index {token!r}", lineno) from None
                    if i == 0:
                        raise ObjParseError("face index 0 is invalid in OBJ", lineno)
                    i = i - 1 if i > 0 else len(vertices) + i
                    if not 0 <= i < len(vertices):
                        raise MeshError(
                            f"line {lineno}: face index {token} out of range "
                            f"({len(vertices)} vertices defined)")
                    idx.append(i)
                for k in range(1, len(idx) - 1):
                    triangles.append((idx[0], idx[k], idx[k + 1]))
    return TriangleMesh(np.array(vertices, dtype=float).reshape(-1, 3),
                        np.array(triangles, dtype=np.int64).reshape(-1, 3),
                        name=path.stem)


def format_obj(mesh: TriangleMesh, header: list[str] | None = None) -> str:
    if mesh.triangle_count == 0:
        raise MeshError("refusing to write a mesh with zero triangles")
    lines = [f"# {h}" for h in (header or [])]
    if mesh.name:
        lines.append(f"o {mesh.name}")
    lines.extend(f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices.tolist())
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist())
    return "\n".join(lines) + "\n"


def save_obj(mesh: TriangleMesh, path, header: list[str] | None = None) -> None:
    """Write `mesh` as OBJ with 9 significant digits per coordinate."""
    text = format_obj(mesh, header)
    Path(path).write_text(text, encoding="utf-8")


def metrics(mesh: TriangleMesh) -> MeshMetrics:
    if mesh.vertex_count:
        lo = tuple(float(x) for x in mesh.vertices.min(axis=0))
        hi = tuple(float(x) for x in mesh.vertices.max(axis=0))
    else:
        lo = hi = (0.0, 0.0, 0.0)
    area = float(mesh.triangle_areas().sum()) if mesh.triangle_count else 0.0
    return MeshMetrics(mesh.triangle_count, mesh.vertex_count, area, (lo, hi))


def sample_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `n` points uniformly by area over the mesh surface."""
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise MeshError("mesh has zero surface area")
    tri = rng.choice(len(areas), size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a, b, c = (x[tri] for x in mesh.corners())
    return ((1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b
            + (r1 * r2)[:, None] * c)


def closest_point_on_triangle(p, a, b, c) -> np.ndarray:
    """Closest points on triangles (a, b, c) to points p; all arrays (k, 3).

    Region-based method from Ericson, "Real-Time Collision Detection".
    """
    p, a, b, c = (np.asarray(x, dtype=float) for x in (p, a, b, c))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        out = a + ab * v[:, None] + ac * w[:, None]

        # edge BC
        m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[m] = (b + (c - b) * t[:, None])[m]
        # edge AC
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = d2 / (d2 - d6)
        out[m] = (a + ac * t[:, None])[m]
        # edge AB
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = d1 / (d1 - d3)
        out[m] = (a + ab * t[:, None])[m]
    # vertex regions take precedence
    m = (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    m = (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    return out


def squared_distance_to_surface(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Exact squared distance from each point to the nearest triangle of `mesh`.

    The distance to the nearest vertex bounds the answer from above, so only
    triangles whose centroid lies within that bound plus the largest
    centroid-to-corner radius need to be examined.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a, b, c = mesh.corners()
    centroids = (a + b + c) / 3.0
    radius = np.sqrt(np.max(np.stack([
        np.sum((a - centroids) ** 2, axis=1),
        np.sum((b - centroids) ** 2, axis=1),
        np.sum((c - centroids) ** 2, axis=1)]), axis=0))
    r_max = float(radius.max())
    vtree = cKDTree(mesh.vertices)
    ctree = cKDTree(centroids)
    upper, _ = vtree.query(points)
    out = np.empty(len(points))
    for i, (p, ub) in enumerate(zip(points, upper)):
        cand = np.asarray(ctree.query_ball_point(p, ub + r_max + 1e-12), dtype=np.int64)
        if len(cand) == 0:
            out[i] = ub * ub
            continue
        pp = np.broadcast_to(p, (len(cand), 3))
        q = closest_point_on_triangle(pp, a[cand], b[cand], c[cand])
        out[i] = float(np.min(np.sum((q - pp) ** 2, axis=1)))
    return out


def mean_squared_deviation(simplified: TriangleMesh, reference: TriangleMesh,
                           samples: int = 1000, seed: int = 0) -> float:
    """Mean squared distance (m^2) from area-uniform samples on `simplified`
    to the surface of `reference`."""
    if simplified.triangle_count == 0 or reference.triangle_count == 0:
        raise MeshError("mean_squared_deviation needs two non-empty meshes")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = sample_surface(simplified, samples, rng)
    return float(np.mean(squared_distance_to_surface(pts, reference)))
