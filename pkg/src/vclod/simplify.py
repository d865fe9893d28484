"""Quadric error metric edge-collapse simplification and LOD chains.

Every vertex carries a quadric: the (weighted) sum of squared distances to
the planes of its incident triangles. Collapsing an edge merges the two
endpoint quadrics and places the surviving vertex where the merged quadric
is smallest; the resulting error is the collapse cost. Edges are collapsed
greedily, cheapest first, with ties broken by the (low, high) vertex index
pair of the edge.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import MIN_TRIANGLE_AREA, MeshError, TriangleMesh

logger = logging.getLogger(__name__)

DET_TOLERANCE = 1e-10
BOUNDARY_WEIGHT = 1000.0
MIN_TRIANGLES = 4
DEFAULT_LADDER = (0.50, 0.625, 0.70, 0.775, 0.85, 0.90, 0.95)

_ZERO = (0.0,) * 10


class Quadric:
    """Symmetric 4x4 form stored as its upper triangle.

    Coefficient order: a11 a12 a13 a14 a22 a23 a24 a33 a34 a44.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=_ZERO):
        coeffs = tuple(float(c) for c in coeffs)
        if len(coeffs) != 10:
            raise ValueError("a quadric has exactly 10 coefficients")
        self.coeffs = coeffs

    @classmethod
    def from_plane(cls, a, b, c, d, weight=1.0) -> "Quadric":
        return cls(_plane_coeffs(a, b, c, d, weight))

    @classmethod
    def zero(cls) -> "Quadric":
        return cls(_ZERO)

    def __add__(self, other: "Quadric") -> "Quadric":
        return Quadric(_qadd(self.coeffs, other.coeffs))

    def __mul__(self, s: float) -> "Quadric":
        return Quadric(tuple(s * c for c in self.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Quadric) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"Quadric({', '.join(f'{c:.6g}' for c in self.coeffs)})"

    def matrix(self) -> np.ndarray:
        a11, a12, a13, a14, a22, a23, a24, a33, a34, a44 = self.coeffs
        return np.array([[a11, a12, a13, a14],
                         [a12, a22, a23, a24],
                         [a13, a23, a33, a34],
                         [a14, a24, a34, a44]])

    def error(self, point) -> float:
        x, y, z = (float(v) for v in point)
        return _qerror(self.coeffs, x, y, z)


def _plane_coeffs(a, b, c, d, w=1.0):
    return (w * a * a, w * a * b, w * a * c, w * a * d,
            w * b * b, w * b * c, w * b * d,
            w * c * c, w * c * d, w * d * d)


def _qadd(p, q):
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3], p[4] + q[4],
            p[5] + q[5], p[6] + q[6], p[7] + q[7], p[8] + q[8], p[9] + q[9])


def _qerror(q, x, y, z):
    return (q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x
            + q[4] * y * y + 2 * q[5] * y * z + 2 * q[6] * y
            + q[7] * z * z + 2 * q[8] * z + q[9])


def _unit_plane(p0, p1, p2):
    ux, uy, uz = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    vx, vy, vz = p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]
    nx, ny, nz = uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if 0.5 * norm < MIN_TRIANGLE_AREA:
        raise MeshError("degenerate triangle has no plane")
    nx, ny, nz = nx / norm, ny / norm, nz / norm
    return nx, ny, nz, -(nx * p0[0] + ny * p0[1] + nz * p0[2]), 0.5 * norm


def plane_quadric(triangle) -> Quadric:
    """Quadric p p^T of the unit-normal plane through a triangle.

    Evaluated at a point it gives the squared perpendicular distance from
    the point to the triangle's plane.
    """
    p0, p1, p2 = ([float(c) for c in p] for p in triangle)
    a, b, c, d, _ = _unit_plane(p0, p1, p2)
    return Quadric.from_plane(a, b, c, d)


def _raw_vertex_quadrics(vertices: list, triangles: list,
                         boundary_weight: float = BOUNDARY_WEIGHT) -> list:
    n = len(vertices)
    quads = [_ZERO] * n
    if not triangles:
        return quads
    planes = [_unit_plane(vertices[a], vertices[b], vertices[c]) for a, b, c in triangles]
    mean_area = sum(p[4] for p in planes) / len(planes)
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for f, (a, b, c) in enumerate(triangles):
        nx, ny, nz, d, area = planes[f]
        q = _plane_coeffs(nx, ny, nz, d, area / mean_area)
        for v in (a, b, c):
            quads[v] = _qadd(quads[v], q)
        for e in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(e), max(e)), []).append(f)
    for (a, b), faces in sorted(edge_faces.items()):
        if len(faces) != 1:
            continue
        nx, ny, nz, _, area = planes[faces[0]]
        pa, pb = vertices[a], vertices[b]
        ex, ey, ez = pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]
        # plane through the boundary edge, perpendicular to its face
        px, py, pz = ey * nz - ez * ny, ez * nx - ex * nz, ex * ny - ey * nx
        norm = math.sqrt(px * px + py * py + pz * pz)
        if norm == 0.0:
            continue
        px, py, pz = px / norm, py / norm, pz / norm
        d = -(px * pa[0] + py * pa[1] + pz * pa[2])
        q = _plane_coeffs(px, py, pz, d, boundary_weight * area / mean_area)
        quads[a] = _qadd(quads[a], q)
        quads[b] = _qadd(quads[b], q)
    return quads


def vertex_quadrics(mesh: TriangleMesh, boundary_weight: float = BOUNDARY_WEIGHT) -> list[Quadric]:
    """Per-vertex sum of incident plane quadrics.

    Face quadrics are weighted by triangle area relative to the mean
    triangle area, so a uniform triangulation gets unit weights. Boundary
    edges add a plane perpendicular to their face, `boundary_weight` times
    heavier, which pins open silhouettes.
    """
    quads = _raw_vertex_quadrics(mesh.vertices.tolist(), mesh.triangles.tolist(),
                                 boundary_weight)
    return [Quadric(q) for q in quads]


def _optimal(q, p1, p2):
    a11, a12, a13, a14, a22, a23, a24, a33, a34, a44 = q
    c11 = a22 * a33 - a23 * a23
    c12 = a13 * a23 - a12 * a33
    c13 = a12 * a23 - a13 * a22
    det = a11 * c11 + a12 * c12 + a13 * c13
    if abs(det) > DET_TOLERANCE:
        c22 = a11 * a33 - a13 * a13
        c23 = a12 * a13 - a11 * a23
        c33 = a11 * a22 - a12 * a12
        inv = 1.0 / det
        # solve A x = -b via the adjugate of the symmetric 3x3 block
        x = -(c11 * a14 + c12 * a24 + c13 * a34) * inv
        y = -(c12 * a14 + c22 * a24 + c23 * a34) * inv
        z = -(c13 * a14 + c23 * a24 + c33 * a34) * inv
        cost = _qerror(q, x, y, z)
        return (cost if cost > 0.0 else 0.0), (x, y, z)
    mid = ((p1[0] + p2[0]) * 0.5, (p1[1] + p2[1]) * 0.5, (p1[2] + p2[2]) * 0.5)
    best = None
    for p in (p1, p2, mid):
        e = _qerror(q, p[0], p[1], p[2])
        if best is None or e < best[0]:
            best = (e, (p[0], p[1], p[2]))
    cost, pos = best
    return (cost if cost > 0.0 else 0.0), pos


def optimal_collapse(q_sum: Quadric, v1, v2) -> tuple[np.ndarray, float]:
    """Best position for the merged vertex of edge (v1, v2) and its cost.

    Solves for the minimiser of the quadric when the 3x3 position block is
    invertible (|det| > 1e-10); otherwise picks the cheapest of v1, v2 and
    their midpoint. The cost is clamped at zero.
    """
    p1 = tuple(float(c) for c in v1)
    p2 = tuple(float(c) for c in v2)
    cost, pos = _optimal(q_sum.coeffs, p1, p2)
    return np.array(pos), cost


@dataclass(frozen=True)
class Collapse:
    edge: tuple[int, int]
    cost: float
    position: tuple[float, float, float]
    triangles_after: int


class EdgeCollapser:
    """Greedy edge-collapse state machine over one mesh.

    A lazy heap holds candidate collapses keyed by (cost, low, high).
    Candidates found illegal when popped are parked; they are re-queued
    whenever a collapse touches the one-ring of either endpoint, which is
    the only way their legality can change.
    """

    def __init__(self, mesh: TriangleMesh, boundary_weight: float = BOUNDARY_WEIGHT):
        mesh.validate()
        self.source = mesh
        self.pos: list = [tuple(p) for p in mesh.vertices.tolist()]
        self.tris: list = [tuple(t) for t in mesh.triangles.tolist()]
        self.alive = [True] * len(self.tris)
        self.count = len(self.tris)
        self.vtris: list[set[int]] = [set() for _ in self.pos]
        for f, t in enumerate(self.tris):
            for v in t:
                self.vtris[v].add(f)
        self.quadrics = _raw_vertex_quadrics(self.pos, self.tris, boundary_weight)
        self.history: list[Collapse] = []
        self._cache: dict[tuple[int, int], tuple[float, tuple]] = {}
        self._heap: list = []
        self._blocked: set[tuple[int, int]] = set()
        for e in self.edges():
            self._queue(e)

    # -- queries -----------------------------------------------------------

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for f in self.vtris[v]:
            out.update(self.tris[f])
        out.discard(v)
        return out

    def edges(self) -> list[tuple[int, int]]:
        out = set()
        for f, (a, b, c) in enumerate(self.tris):
            if self.alive[f]:
                out.add((a, b) if a < b else (b, a))
                out.add((b, c) if b < c else (c, b))
                out.add((c, a) if c < a else (a, c))
        return sorted(out)

    def evaluate(self, edge: tuple[int, int]) -> tuple[float, tuple]:
        """(cost, position) of collapsing `edge` in the current state."""
        a, b = edge
        return _optimal(_qadd(self.quadrics[a], self.quadrics[b]), self.pos[a], self.pos[b])

    def _is_boundary_vertex(self, v: int) -> bool:
        seen: dict[int, int] = {}
        for f in self.vtris[v]:
            for w in self.tris[f]:
                if w != v:
                    seen[w] = seen.get(w, 0) + 1
        return any(c == 1 for c in seen.values())

    def is_legal(self, edge: tuple[int, int], position) -> bool:
        """Topology and geometry checks for collapsing `edge` to `position`."""
        a, b = edge
        shared = self.vtris[a] & self.vtris[b]
        if not shared or self.count - len(shared) < MIN_TRIANGLES:
            return False
        opposite = set()
        for f in shared:
            opposite.update(self.tris[f])
        opposite.discard(a)
        opposite.discard(b)
        if self.neighbors(a) & self.neighbors(b) != opposite:
            return False
        if len(shared) == 2 and self._is_boundary_vertex(a) and self._is_boundary_vertex(b):
            return False
        if len(shared) == 1 and len(self.vtris[a]) == 1 and len(self.vtris[b]) == 1:
            return False
        px, py, pz = position
        for v in (a, b):
            for f in self.vtris[v]:
                if f in shared:
                    continue
                t = self.tris[f]
                p = [self.pos[w] for w in t]
                old = _cross(p[0], p[1], p[2])
                i = t.index(v)
                p[i] = (px, py, pz)
                new = _cross(p[0], p[1], p[2])
                if old[0] * new[0] + old[1] * new[1] + old[2] * new[2] <= 0.0:
                    return False
                if 0.5 * math.sqrt(new[0] ** 2 + new[1] ** 2 + new[2] ** 2) < MIN_TRIANGLE_AREA:
                    return False
        return True

    # -- mutation ----------------------------------------------------------

    def _queue(self, edge):
        cost, pos = self.evaluate(edge)
        self._cache[edge] = (cost, pos)
        heapq.heappush(self._heap, (cost, edge[0], edge[1]))

    def step(self) -> Collapse | None:
        """Apply the cheapest legal collapse; None when none remain."""
        heap = self._heap
        while heap:
            cost, a, b = heapq.heappop(heap)
            edge = (a, b)
            entry = self._cache.get(edge)
            if entry is None or entry[0] != cost:
                continue
            if edge in self._blocked:
                continue
            if not self.is_legal(edge, entry[1]):
                self._blocked.add(edge)
                continue
            return self._apply(edge, cost, entry[1])
        return None

    def _apply(self, edge, cost, position) -> Collapse:
        u, v = edge
        for w in self.neighbors(u) | self.neighbors(v):
            for x in (u, v):
                key = (x, w) if x < w else (w, x)
                self._cache.pop(key, None)
                self._blocked.discard(key)
        shared = self.vtris[u] & self.vtris[v]
        for f in shared:
            self.alive[f] = False
            for w in self.tris[f]:
                self.vtris[w].discard(f)
        self.count -= len(shared)
        for f in self.vtris[v]:
            self.tris[f] = tuple(u if w == v else w for w in self.tris[f])
        self.vtris[u] |= self.vtris[v]
        self.vtris[v] = set()
        self.pos[u] = position
        self.quadrics[u] = _qadd(self.quadrics[u], self.quadrics[v])
        ring = self.neighbors(u)
        for w in sorted(ring):
            self._queue((u, w) if u < w else (w, u))
        # legality of edges around the one-ring may have changed
        for s in ring:
            for w in self.neighbors(s):
                key = (s, w) if s < w else (w, s)
                if key in self._blocked:
                    self._blocked.discard(key)
                    heapq.heappush(self._heap, (self._cache[key][0], key[0], key[1]))
        record = Collapse(edge, cost, position, self.count)
        self.history.append(record)
        return record

    def run(self, target: int) -> bool:
        """Collapse until at most `target` triangles remain; True if reached."""
        while self.count > target:
            if self.step() is None:
                return False
        return True

    def current_mesh(self) -> TriangleMesh:
        tris = [t for t, ok in zip(self.tris, self.alive) if ok]
        return TriangleMesh(np.array(self.pos), np.array(tris, dtype=np.int64),
                            self.source.name).compact()


def _cross(p0, p1, p2):
    ux, uy, uz = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    vx, vy, vz = p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]
    return (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx)


@dataclass(frozen=True)
class SimplifyResult:
    mesh: TriangleMesh
    target: int
    reached: bool
    collapses: int

    @property
    def achieved(self) -> int:
        return self.mesh.triangle_count


def _check_target(mesh: TriangleMesh, target: int) -> None:
    if target < MIN_TRIANGLES:
        raise ValueError(f"target_triangles must be >= {MIN_TRIANGLES}, got {target}")
    if target > mesh.triangle_count:
        raise ValueError(
            f"target_triangles {target} exceeds mesh triangle count {mesh.triangle_count}")


def simplify_report(mesh: TriangleMesh, target_triangles: int) -> SimplifyResult:
    _check_target(mesh, target_triangles)
    if target_triangles == mesh.triangle_count:
        return SimplifyResult(mesh, target_triangles, True, 0)
    collapser = EdgeCollapser(mesh)
    reached = collapser.run(target_triangles)
    out = collapser.current_mesh()
    if not reached:
        logger.warning("simplify stalled at %d triangles (target %d): no legal collapses",
                       out.triangle_count, target_triangles)
    return SimplifyResult(out, target_triangles, reached, len(collapser.history))


def simplify(mesh: TriangleMesh, target_triangles: int) -> TriangleMesh:
    """Greedy quadric edge collapse down to `target_triangles` (or below by one).

    If no legal collapse remains first, the partial result is returned and
    a warning names the achieved count; use `simplify_report` to inspect it.
    """
    return simplify_report(mesh, target_triangles).mesh


@dataclass(frozen=True)
class LodLevel:
    aggressiveness: float
    mesh: TriangleMesh
    achieved_triangle_count: int
    target_triangle_count: int = 0
    reached: bool = True


@dataclass(frozen=True)
class LodChain:
    reference: TriangleMesh
    levels: list[LodLevel] = field(default_factory=list)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i) -> LodLevel:
        return self.levels[i]

    @property
    def aggressiveness(self) -> list[float]:
        return [lvl.aggressiveness for lvl in self.levels]


def lod_targets(reference_count: int, levels) -> list[int]:
    # half-up rounding: 12074 * 0.25 = 3018.5 -> 3019
    return [max(MIN_TRIANGLES, math.floor(reference_count * (1.0 - a) + 0.5)) for a in levels]


def generate_lod_chain(mesh: TriangleMesh, levels=DEFAULT_LADDER) -> LodChain:
    """Reference mesh plus one simplified variant per aggressiveness fraction.

    Greedy collapse is deterministic and its prefix does not depend on the
    stopping point, so all levels are snapshots of a single run.
    """
    levels = [float(a) for a in levels]
    if not levels:
        raise ValueError("at least one aggressiveness level is required")
    if any(not 0.0 < a < 1.0 for a in levels):
        raise ValueError("aggressiveness fractions must lie in (0, 1)")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("aggressiveness fractions must be strictly increasing")
    mesh.validate()
    n = mesh.triangle_count
    chain = [LodLevel(0.0, mesh, n, n, True)]
    collapser = EdgeCollapser(mesh)
    for a, target in zip(levels, lod_targets(n, levels)):
        reached = collapser.run(target)
        out = collapser.current_mesh()
        if not reached:
            logger.warning("LOD %.4g stalled at %d triangles (target %d)",
                           a, out.triangle_count, target)
        chain.append(LodLevel(a, out, out.triangle_count, target, reached))
    return LodChain(mesh, chain)
