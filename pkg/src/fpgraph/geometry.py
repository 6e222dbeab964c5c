"""Per-frame graph construction from facial landmarks.

A frame's 68 landmark coordinates are reduced to 26 selected points (lips,
jaw, nose tip), triangulated with Bowyer-Watson, and augmented with hub edges
from the nose tip to every other node. Edge weights are Euclidean distances
in raw pixel units; any normalization happens downstream in the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

import numpy as np

NUM_LANDMARKS = 68
NUM_GRAPH_NODES = 26
NOSE_TIP_LANDMARK = 30  # 0-based index in the 68-point ordering

# Lip region (48-67), five jaw points symmetric about the chin, and the nose
# tip. 26 indices total, ascending.
DEFAULT_SUBSET_INDICES: Tuple[int, ...] = (3, 5, 8, 11, 13, 30) + tuple(range(48, 68))

# Points closer than this are rejected as duplicates.
DUPLICATE_EPS = 1e-9
# Incircle determinants within this margin of zero count as "on the circle",
# which strict containment treats as outside.
INCIRCLE_EPS = 1e-12


class GeometryError(ValueError):
    """Base class for geometric construction failures."""


class MalformedSubsetError(GeometryError):
    pass


class DegenerateTriangleError(GeometryError):
    pass


class DegenerateInputError(GeometryError):
    """All points collinear: no triangulation exists."""


class DuplicatePointError(GeometryError):
    pass


@dataclass(frozen=True)
class LandmarkFrame:
    """One video frame's 68 2-D landmarks plus its index within the clip."""

    points: np.ndarray
    frame_index: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (NUM_LANDMARKS, 2):
            raise ValueError(f"expected {NUM_LANDMARKS}x2 landmark array, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("landmark coordinates must be finite")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class LandmarkSubset:
    """Which 26 of the 68 landmarks become graph nodes, and which is the hub."""

    indices: Tuple[int, ...] = DEFAULT_SUBSET_INDICES
    hub_position: int = DEFAULT_SUBSET_INDICES.index(NOSE_TIP_LANDMARK)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) != NUM_GRAPH_NODES:
            raise MalformedSubsetError(f"subset needs {NUM_GRAPH_NODES} indices, got {len(idx)}")
        if len(set(idx)) != NUM_GRAPH_NODES:
            raise MalformedSubsetError("subset indices must be distinct")
        if any(i < 0 or i >= NUM_LANDMARKS for i in idx):
            raise MalformedSubsetError("subset indices must lie in [0, 67]")
        if not (0 <= self.hub_position < NUM_GRAPH_NODES):
            raise MalformedSubsetError(f"hub_position out of range: {self.hub_position}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_hub_landmark(cls, indices, hub_landmark: int) -> "LandmarkSubset":
        indices = tuple(int(i) for i in indices)
        if hub_landmark not in indices:
            raise MalformedSubsetError(f"hub landmark {hub_landmark} not in subset")
        return cls(indices=indices, hub_position=indices.index(hub_landmark))


def select_landmarks(frame: LandmarkFrame, subset: LandmarkSubset) -> np.ndarray:
    """Pick the subset's landmarks from a frame, order preserved; (26, 2)."""
    return frame.points[list(subset.indices)].copy()


class Triangle(NamedTuple):
    """Three node indices in canonical (sorted) order."""

    a: int
    b: int
    c: int

    @classmethod
    def canonical(cls, a: int, b: int, c: int) -> "Triangle":
        if a == b or b == c or a == c:
            raise DegenerateTriangleError(f"repeated vertex in triangle ({a}, {b}, {c})")
        x, y, z = sorted((a, b, c))
        return cls(x, y, z)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _incircle_det(ax, ay, bx, by, cx, cy, px, py):
    # 3x3 determinant of the lifted (paraboloid) coordinates relative to p;
    # positive iff p is inside the circumcircle of a CCW triangle.
    adx = ax - px
    ady = ay - py
    bdx = bx - px
    bdy = by - py
    cdx = cx - px
    cdy = cy - py
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (
        adx * (bdy * cd - bd * cdy)
        - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx)
    )


def circumcircle_contains(t: Triangle, p, coords) -> bool:
    """Strict containment of point ``p`` in the circumcircle of ``t``.

    Points on the circle (determinant within INCIRCLE_EPS of zero) count as
    outside. Raises for collinear triangles, whose circumcircle is undefined.
    """
    coords = np.asarray(coords, dtype=np.float64)
    ax, ay = coords[t.a]
    bx, by = coords[t.b]
    cx, cy = coords[t.c]
    px, py = float(p[0]), float(p[1])
    orient = _orient(ax, ay, bx, by, cx, cy)
    if orient == 0.0:
        raise DegenerateTriangleError(f"collinear triangle {t}")
    det = _incircle_det(ax, ay, bx, by, cx, cy, px, py)
    if orient < 0.0:
        det = -det
    return det > INCIRCLE_EPS


def _check_point_set(pts: np.ndarray) -> None:
    n = len(pts)
    if n < 3:
        raise DegenerateInputError(f"need at least 3 points, got {n}")
    for i in range(n):
        for j in range(i + 1, n):
            if math.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1]) < DUPLICATE_EPS:
                raise DuplicatePointError(f"points {i} and {j} coincide")
    # collinearity: every cross product against the first two distinct points
    ax, ay = pts[0]
    bx, by = pts[1]
    for i in range(2, n):
        if _orient(ax, ay, bx, by, pts[i, 0], pts[i, 1]) != 0.0:
            return
    raise DegenerateInputError("all points are collinear")


def delaunay_triangulate(points) -> List[Triangle]:
    """Bowyer-Watson triangulation of a planar point set.

    Points are inserted in input order (the deterministic tie-break for
    cocircular configurations). Returned triangles are canonical and sorted;
    each one's open circumdisk contains no input point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) point array, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    _check_point_set(pts)

    n = len(pts)
    xs = pts[:, 0]
    ys = pts[:, 1]
    cx = (xs.min() + xs.max()) / 2.0
    cy = (ys.min() + ys.max()) / 2.0
    span = max(xs.max() - xs.min(), ys.max() - ys.min(), 1.0)
    big = 20.0 * span
    verts = [(float(x), float(y)) for x, y in pts]
    verts.append((cx - big, cy - big))
    verts.append((cx + big, cy - big))
    verts.append((cx, cy + big))
    s0, s1, s2 = n, n + 1, n + 2

    def in_circum(tri, p_idx):
        ax, ay = verts[tri[0]]
        bx, by = verts[tri[1]]
        cx_, cy_ = verts[tri[2]]
        px, py = verts[p_idx]
        orient = _orient(ax, ay, bx, by, cx_, cy_)
        det = _incircle_det(ax, ay, bx, by, cx_, cy_, px, py)
        if orient < 0.0:
            det = -det
        return det > INCIRCLE_EPS

    triangles: List[Tuple[int, int, int]] = [(s0, s1, s2)]
    for p in range(n):
        bad = [t for t in triangles if in_circum(t, p)]
        # cavity boundary: edges of bad triangles seen exactly once
        edge_count: Dict[Tuple[int, int], int] = {}
        for t in bad:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
                key = (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])
                edge_count[key] = edge_count.get(key, 0) + 1
        bad_set = set(bad)
        triangles = [t for t in triangles if t not in bad_set]
        for (u, v), cnt in edge_count.items():
            if cnt == 1:
                triangles.append((u, v, p))

    out = [
        Triangle.canonical(*t)
        for t in triangles
        if s0 not in t and s1 not in t and s2 not in t
    ]
    out.sort()
    return out


@dataclass(frozen=True, eq=False)
class FaceGraph:
    """Weighted undirected graph over the 26 selected landmarks.

    Edges are the Delaunay edges plus a hub edge from the nose-tip node to
    every other node; weights are Euclidean distances in pixels.
    """

    coords: np.ndarray
    edges: Tuple[Tuple[int, int], ...]
    weights: Dict[Tuple[int, int], float]
    hub: int
    num_nodes: int = NUM_GRAPH_NODES
    _neighbors: Tuple[Tuple[int, ...], ...] = field(repr=False, default=())

    def weight(self, u: int, v: int) -> float:
        key = (u, v) if u < v else (v, u)
        return self.weights[key]

    def neighbors(self, u: int) -> Tuple[int, ...]:
        return self._neighbors[u]

    def degree(self, u: int) -> int:
        return len(self._neighbors[u])


def build_face_graph(points, hub_position: int) -> FaceGraph:
    """Triangulate 26 points and connect the hub to every other node."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if not (0 <= hub_position < n):
        raise ValueError(f"hub_position {hub_position} out of range for {n} points")
    tris = delaunay_triangulate(pts)

    edge_set = set()
    for t in tris:
        edge_set.add((t.a, t.b))
        edge_set.add((t.b, t.c))
        edge_set.add((t.a, t.c))
    for v in range(n):
        if v != hub_position:
            edge_set.add((min(v, hub_position), max(v, hub_position)))

    edges = tuple(sorted(edge_set))
    weights = {
        (u, v): math.hypot(pts[u, 0] - pts[v, 0], pts[u, 1] - pts[v, 1])
        for u, v in edges
    }
    nbrs: List[List[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    neighbors = tuple(tuple(sorted(ns)) for ns in nbrs)
    return FaceGraph(
        coords=pts,
        edges=edges,
        weights=weights,
        hub=hub_position,
        num_nodes=n,
        _neighbors=neighbors,
    )


def frame_to_graph(frame: LandmarkFrame, subset: LandmarkSubset) -> FaceGraph:
    """Select the subset's landmarks and build the per-frame graph."""
    return build_face_graph(select_landmarks(frame, subset), subset.hub_position)
