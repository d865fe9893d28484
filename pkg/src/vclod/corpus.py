"""Procedural test meshes: planar grids, closed solids and a statue stand-in."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

STATUE_TRIANGLES = 12074


def planar_grid(nx: int, ny: int, size: tuple[float, float] = (1.0, 1.0),
                z: float = 0.0, name: str = "grid") -> TriangleMesh:
    """Open rectangular grid in the plane z = `z` with 2*nx*ny triangles."""
    xs = np.linspace(0.0, size[0], nx + 1)
    ys = np.linspace(0.0, size[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z)])
    tris = []
    for i in range(nx):
        for j in range(ny):
            v00 = i * (ny + 1) + j
            v10 = v00 + ny + 1
            tris.append((v00, v10, v10 + 1))
            tris.append((v00, v10 + 1, v00 + 1))
    return TriangleMesh(verts, np.array(tris), name)


def quad(z: float = 0.0, size: float = 1.0) -> TriangleMesh:
    return planar_grid(1, 1, (size, size), z, name="quad")


def unit_cube() -> TriangleMesh:
    verts = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)],
                     dtype=float)
    # outward-facing, counter-clockwise
    tris = np.array([
        (0, 1, 3), (0, 3, 2),  # x = 0
        (4, 6, 7), (4, 7, 5),  # x = 1
        (0, 4, 5), (0, 5, 1),  # y = 0
        (2, 3, 7), (2, 7, 6),  # y = 1
        (0, 2, 6), (0, 6, 4),  # z = 0
        (1, 5, 7), (1, 7, 3),  # z = 1
    ])
    return TriangleMesh(verts, tris, "cube")


def tetrahedron() -> TriangleMesh:
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    tris = np.array([(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)])
    return TriangleMesh(verts, tris, "tetrahedron")


def icosphere(subdivisions: int = 1, radius: float = 1.0) -> TriangleMesh:
    """Closed sphere approximation with 20 * 4**subdivisions triangles."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, np.array(faces),
                        f"icosphere{subdivisions}")


def height_field(nx: int = 6, ny: int = 6, amplitude: float = 0.15,
                 name: str = "hills") -> TriangleMesh:
    """Open, non-planar grid patch z = amplitude * sin(x) * cos(y)."""
    grid = planar_grid(nx, ny, (2.0, 2.0), name=name)
    v = grid.vertices.copy()
    v[:, 2] = amplitude * np.sin(np.pi * v[:, 0]) * np.cos(np.pi * v[:, 1])
    return TriangleMesh(v, grid.triangles, name)


def noisy_patch(nx: int = 7, ny: int = 7, sd: float = 0.3, seed: int = 0,
                name: str = "noisy") -> TriangleMesh:
    """Open grid with Gaussian height noise; many collapses there are illegal."""
    grid = planar_grid(nx, ny, name=name)
    v = grid.vertices.copy()
    v[:, 2] = np.random.default_rng(seed).normal(0.0, sd, len(v))
    return TriangleMesh(v, grid.triangles, name)


def _split_at_centroid(verts: list, tris: list, index: int) -> None:
    a, b, c = tris[index]
    verts.append((np.asarray(verts[a]) + verts[b] + verts[c]) / 3.0)
    m = len(verts) - 1
    tris[index] = (a, b, m)
    tris.extend([(b, c, m), (c, a, m)])


def statue(n_lon: int = 85, n_rings: int = 71, height: float = 1.8,
           name: str = "statue") -> TriangleMesh:
    """Closed, bumpy, upright blob standing in for the reference statue.

    With the default resolution the surface has 2 * 85 * 71 = 12070
    triangles; two centroid splits bring it to exactly 12074.
    """
    verts: list = [np.array([0.0, 0.0, -height / 2])]
    for r in range(1, n_rings + 1):
        theta = np.pi * r / (n_rings + 1)
        z = -np.cos(theta) * height / 2
        for k in range(n_lon):
            phi = 2 * np.pi * k / n_lon
            # head/shoulder/waist profile plus surface relief
            profile = (0.30 + 0.08 * np.cos(3 * theta) - 0.05 * np.cos(5 * theta)
                       + 0.02 * np.sin(4 * phi) * np.sin(theta)
                       + 0.012 * np.sin(9 * phi + 6 * theta))
            rad = profile * np.sin(theta)
            verts.append(np.array([rad * np.cos(phi), 0.8 * rad * np.sin(phi), z]))
    verts.append(np.array([0.0, 0.0, height / 2]))
    top = len(verts) - 1

    def ring(r, k):
        return 1 + r * n_lon + (k % n_lon)

    tris: list = []
    for k in range(n_lon):
        tris.append((0, ring(0, k + 1), ring(0, k)))
    for r in range(n_rings - 1):
        for k in range(n_lon):
            a, b = ring(r, k), ring(r, k + 1)
            c, d = ring(r + 1, k), ring(r + 1, k + 1)
            tris.append((a, b, d))
            tris.append((a, d, c))
    for k in range(n_lon):
        tris.append((top, ring(n_rings - 1, k), ring(n_rings - 1, k + 1)))
    if len(tris) == 2 * n_lon * n_rings and len(tris) + 4 == STATUE_TRIANGLES:
        _split_at_centroid(verts, tris, len(tris) // 3)
        _split_at_centroid(verts, tris, 2 * len(tris) // 3)
    return TriangleMesh(np.array(verts), np.array(tris), name)


def small_corpus() -> list[TriangleMesh]:
    """Meshes of at most 100 triangles, closed and open."""
    return [
        unit_cube(),
        tetrahedron(),
        icosphere(1),
        planar_grid(4, 4, name="grid4"),
        planar_grid(5, 3, (2.0, 1.0), name="grid5x3"),
        height_field(5, 5),
        height_field(7, 7, amplitude=0.6, name="hills7"),
        noisy_patch(),
        quad(),
    ]


def planar_corpus() -> list[TriangleMesh]:
    return [planar_grid(10, 10, name="grid10"), planar_grid(8, 4, (3.0, 1.0), name="strip"),
            planar_grid(6, 6, (1.0, 1.0), z=0.25, name="raised")]
