"""
Triangular meshes of rotated squares.

Meshes are stored as plain numpy arrays: ``vertices`` is ``(nv, 2)`` and
``triangles`` is ``(nt, 3)`` with counterclockwise vertex order.  Regular
refinement returns the fine mesh together with a :class:`Hierarchy` that
records which fine triangles came from which coarse triangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    """Raised for malformed or invalid meshes."""


class MeshFormatError(MeshError):
    """Parse error in the mesh text format; carries the 1-based line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class OrientationError(MeshError):
    """A triangle is clockwise or degenerate."""


@dataclass(frozen=True)
class MeshSpec:
    N: int
    omega: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 <= self.omega <= math.pi:
            raise ValueError(f"omega must lie in [0, pi], got {self.omega!r}")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable P1 triangulation.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    boundary : (nv,) bool array, True on the Dirichlet boundary
    h_char : characteristic mesh size
    omega : rotation angle the mesh was generated with (0 for loaded meshes)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h_char: float
    omega: float = 0.0

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        b = np.ascontiguousarray(self.boundary, dtype=bool)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        if b.shape != (v.shape[0],):
            raise MeshError("boundary must have one flag per vertex")
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise MeshError("triangle vertex index out of range")
        for arr in (v, t, b):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary", b)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def areas(self) -> np.ndarray:
        return self.signed_areas()

    def edges(self) -> np.ndarray:
        """Unique edges as sorted endpoint pairs, in ascending lexicographic order."""
        return unique_edges(self.triangles)

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lens = [np.hypot(*(p[:, (k + 1) % 3] - p[:, k]).T) for k in range(3)]
        return np.max(lens, axis=0)

    def check_orientation(self, tol: float = 1e-14):
        """Raise :class:`OrientationError` on the first non-positive triangle."""
        area = self.signed_areas()
        bad = np.flatnonzero(area <= tol * self.h_char**2)
        if bad.size:
            k = int(bad[0])
            raise OrientationError(
                f"triangle {k} {tuple(self.triangles[k])} has signed area {area[k]:.3e}")

    @property
    def y_extent(self) -> tuple[float, float]:
        y = self.vertices[:, 1]
        return float(y.min()), float(y.max())


def unique_edges(triangles: np.ndarray) -> np.ndarray:
    tri = np.asarray(triangles)
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def boundary_vertices(triangles: np.ndarray, n_vertices: int) -> np.ndarray:
    """Flag vertices lying on an edge that belongs to exactly one triangle."""
    tri = np.asarray(triangles)
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    flags = np.zeros(n_vertices, dtype=bool)
    flags[uniq[counts == 1].ravel()] = True
    return flags


def rotate(points: np.ndarray, omega: float) -> np.ndarray:
    c, s = math.cos(omega), math.sin(omega)
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([c * x - s * y, s * x + c * y])


def build_rotated_uniform(spec: MeshSpec) -> Mesh:
    """Uniform N x N triangulation of (-1, 1)^2 rotated by ``spec.omega``.

    Each square is cut along its lower-left to upper-right diagonal.
    Vertex ``k*(N+1) + j`` sits at pre-rotation ``(-1 + 2j/N, -1 + 2k/N)``.
    """
    N = spec.N
    t = np.linspace(-1.0, 1.0, N + 1)
    X, Y = np.meshgrid(t, t)
    pre = np.column_stack([X.ravel(), Y.ravel()])
    boundary = ((np.abs(np.abs(pre[:, 0]) - 1.0) < BOUNDARY_TOL)
                | (np.abs(np.abs(pre[:, 1]) - 1.0) < BOUNDARY_TOL))

    j, k = np.meshgrid(np.arange(N), np.arange(N))
    ll = (k * (N + 1) + j).ravel()
    lr, ul = ll + 1, ll + N + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    tris = np.empty((2 * N * N, 3), dtype=np.int64)
    tris[0::2] = lower
    tris[1::2] = upper

    return Mesh(rotate(pre, spec.omega), tris, boundary,
                h_char=2.0 * math.sqrt(2.0) / N, omega=spec.omega)


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Two nested meshes produced by one regular refinement.

    ``children[K]`` lists the four fine triangles of coarse triangle ``K``;
    the last entry is the central child whose vertices are the three edge
    midpoints.  ``edges[e]`` is a sorted coarse edge and ``midpoints[e]`` the
    fine vertex at its midpoint.  Coarse vertex ``i`` is fine vertex ``i``.
    """

    coarse: Mesh
    fine: Mesh
    children: np.ndarray
    edges: np.ndarray
    midpoints: np.ndarray
    parent: np.ndarray = field(repr=False)


def refine_regular(coarse: Mesh) -> tuple[Mesh, Hierarchy]:
    """Split every triangle into four congruent children through edge midpoints."""
    nv = coarse.n_vertices
    tri = coarse.triangles
    edges = unique_edges(tri)
    ne = edges.shape[0]
    midpoints = nv + np.arange(ne)

    # edge id for each (a, b) pair via sorted search on the packed key
    key = edges[:, 0] * nv + edges[:, 1]

    def edge_id(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.searchsorted(key, lo * nv + hi)

    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    m_ab = midpoints[edge_id(a, b)]
    m_bc = midpoints[edge_id(b, c)]
    m_ca = midpoints[edge_id(c, a)]

    nt = tri.shape[0]
    fine_tri = np.empty((4 * nt, 3), dtype=np.int64)
    fine_tri[0::4] = np.column_stack([a, m_ab, m_ca])
    fine_tri[1::4] = np.column_stack([m_ab, b, m_bc])
    fine_tri[2::4] = np.column_stack([m_ca, m_bc, c])
    fine_tri[3::4] = np.column_stack([m_ab, m_bc, m_ca])

    V = coarse.vertices
    fine_xy = np.concatenate([V, 0.5 * (V[edges[:, 0]] + V[edges[:, 1]])])

    # both endpoints on the boundary is not sufficient (corner diagonals)
    edge_boundary = _boundary_edge_mask(tri, edges)
    fine_boundary = np.concatenate([coarse.boundary, edge_boundary])

    fine = Mesh(fine_xy, fine_tri, fine_boundary, h_char=coarse.h_char / 2,
                omega=coarse.omega)
    children = np.arange(4 * nt, dtype=np.int64).reshape(nt, 4)
    parent = np.repeat(np.arange(nt, dtype=np.int64), 4)
    return fine, Hierarchy(coarse, fine, children, edges, midpoints, parent)


def _boundary_edge_mask(tri: np.ndarray, edges: np.ndarray) -> np.ndarray:
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    # unique_edges and np.unique share the same lexicographic order
    assert np.array_equal(uniq, edges)
    return counts == 1


def refine_times(mesh: Mesh, k: int) -> tuple[Mesh, Hierarchy | None]:
    """Refine ``k`` times; returns the final mesh and the last hierarchy."""
    hier = None
    for _ in range(k):
        mesh, hier = refine_regular(mesh)
    return mesh, hier


def save_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for (x, y), b in zip(mesh.vertices.tolist(), mesh.boundary.tolist()):
        lines.append(f"{x!r} {y!r} {int(b)}")
    for i0, i1, i2 in mesh.triangles.tolist():
        lines.append(f"{i0} {i1} {i2}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    """Parse the ``nv nt`` / ``x y b`` / ``i0 i1 i2`` text format.

    Boundary flags are recomputed from the connectivity (vertices on edges
    owned by a single triangle); the file's flags must agree with them.
    ``h_char`` is the largest triangle diameter.
    """
    lines = text.splitlines()
    if not lines:
        raise MeshFormatError(1, "empty file")
    head = lines[0].split()
    try:
        if len(head) != 2:
            raise ValueError
        nv, nt = int(head[0]), int(head[1])
        if nv < 3 or nt < 1:
            raise ValueError
    except ValueError:
        raise MeshFormatError(1, f"expected '<nv> <nt>', got {lines[0]!r}") from None
    if len(lines) < 1 + nv + nt:
        raise MeshFormatError(len(lines) + 1, f"expected {nv} vertex and {nt} triangle lines")

    xy = np.empty((nv, 2))
    flags = np.empty(nv, dtype=bool)
    for i in range(nv):
        lineno = i + 2
        parts = lines[i + 1].split()
        try:
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ValueError
            xy[i] = float(parts[0]), float(parts[1])
            flags[i] = parts[2] == "1"
        except ValueError:
            raise MeshFormatError(lineno, f"expected 'x y b', got {lines[i + 1]!r}") from None
    tri = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        lineno = nv + i + 2
        parts = lines[nv + i + 1].split()
        try:
            if len(parts) != 3:
                raise ValueError
            tri[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(lineno, f"expected 'i0 i1 i2', got {lines[nv + i + 1]!r}") from None
        if tri[i].min() < 0 or tri[i].max() >= nv:
            raise MeshFormatError(lineno, "vertex index out of range")
    for extra in range(1 + nv + nt, len(lines)):
        if lines[extra].strip():
            raise MeshFormatError(extra + 1, "trailing content")

    topo = boundary_vertices(tri, nv)
    if not np.array_equal(topo, flags):
        bad = int(np.flatnonzero(topo != flags)[0])
        raise MeshFormatError(bad + 2, "boundary flag disagrees with mesh topology")

    p = xy[tri]
    diam = max(float(np.hypot(*(p[:, (k + 1) % 3] - p[:, k]).T).max()) for k in range(3))
    mesh = Mesh(xy, tri, topo, h_char=diam, omega=0.0)
    area = mesh.signed_areas()
    bad = np.flatnonzero(area <= 1e-14 * diam**2)
    if bad.size:
        k = int(bad[0])
        raise OrientationError(
            f"line {nv + k + 2}: triangle {k} is not counterclockwise (signed area {area[k]:.3e})")
    return mesh


def jitter_interior(mesh: Mesh, amplitude: float, seed: int) -> Mesh:
    """Displace interior vertices by at most ``amplitude * h_char``.

    Offsets are drawn uniformly from a disk.  A vertex whose move would
    invert or flatten an incident triangle retries with half the offset, up
    to ten times, before :class:`OrientationError` is raised.  The returned
    mesh uses the largest triangle diameter as ``h_char``.
    """
    if not 0.0 <= amplitude <= 0.3:
        raise ValueError(f"amplitude must lie in [0, 0.3], got {amplitude!r}")
    if amplitude == 0.0:
        return Mesh(mesh.vertices, mesh.triangles, mesh.boundary, mesh.h_char, mesh.omega)

    rng = np.random.default_rng(seed)
    n = mesh.n_vertices
    radius = amplitude * mesh.h_char * np.sqrt(rng.uniform(size=n))
    angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
    offset = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    offset[mesh.boundary] = 0.0

    incident = _vertex_triangles(mesh.triangles, n)
    xy = mesh.vertices.copy()
    tri = mesh.triangles
    min_area = 1e-14 * mesh.h_char**2
    for v in np.flatnonzero(~mesh.boundary):
        base = xy[v].copy()
        for _attempt in range(11):
            xy[v] = base + offset[v]
            if (_signed_area(xy, tri[incident[v]]) > min_area).all():
                break
            offset[v] *= 0.5
        else:
            raise OrientationError(f"cannot move vertex {v} without inverting a triangle")

    out = Mesh(xy, tri, mesh.boundary, h_char=mesh.h_char, omega=mesh.omega)
    return Mesh(xy, tri, mesh.boundary, h_char=float(out.diameters().max()), omega=mesh.omega)


def _signed_area(xy: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p = xy[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _vertex_triangles(tri: np.ndarray, n: int) -> list[np.ndarray]:
    order = np.argsort(tri.ravel(), kind="stable")
    owners = order // 3
    counts = np.bincount(tri.ravel(), minlength=n)
    return np.split(owners, np.cumsum(counts)[:-1])
