"""P1 finite element assembly for -u_xx - eps*u_yy with homogeneous Dirichlet data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, MeshError


@dataclass(frozen=True)
class ProblemConfig:
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")


@dataclass(frozen=True, eq=False)
class DofMap:
    """Interior vertices numbered in ascending vertex order.

    ``vertices[d]`` is the mesh vertex of DOF ``d``; ``index[v]`` is the DOF
    of vertex ``v`` or -1 on the boundary.
    """

    vertices: np.ndarray
    index: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        interior = np.flatnonzero(~mesh.boundary)
        index = np.full(mesh.n_vertices, -1, dtype=np.int64)
        index[interior] = np.arange(interior.size)
        return cls(interior, index)

    @property
    def n(self) -> int:
        return self.vertices.size

    def to_vertices(self, u: np.ndarray, n_vertices: int | None = None) -> np.ndarray:
        """Extend a DOF vector by zeros on the boundary."""
        n_vertices = self.index.size if n_vertices is None else n_vertices
        out = np.zeros(n_vertices)
        out[self.vertices] = u
        return out

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.vertices]


def element_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients per triangle.

    Returns ``(grads, area)`` with ``grads[k, i] = grad(phi_i)`` on triangle
    ``k``, shape ``(nt, 3, 2)``.
    """
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    tiny = 1e-14 * mesh.h_char**2
    if (area <= tiny).any():
        k = int(np.flatnonzero(area <= tiny)[0])
        raise MeshError(f"degenerate or clockwise triangle {k} (area {area[k]:.3e})")
    x, y = p[..., 0], p[..., 1]
    grads = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = y[:, j] - y[:, k]
        grads[:, i, 1] = x[:, k] - x[:, j]
    grads /= (2.0 * area)[:, None, None]
    return grads, area


def piecewise_gradient(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Constant gradient ``(nt, 2)`` of the P1 function with the given nodal values."""
    grads, _ = element_gradients(mesh)
    return np.einsum("kid,ki->kd", grads, np.asarray(values)[mesh.triangles])


def _global(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _restrict(M: sp.csr_matrix, dofs: DofMap) -> sp.csr_matrix:
    R = M[dofs.vertices][:, dofs.vertices]
    R.sum_duplicates()
    R.sort_indices()
    return R


def stiffness_full(mesh: Mesh, epsilon: float) -> sp.csr_matrix:
    grads, area = element_gradients(mesh)
    gx, gy = grads[..., 0], grads[..., 1]
    local = area[:, None, None] * (gx[:, :, None] * gx[:, None, :]
                                   + epsilon * gy[:, :, None] * gy[:, None, :])
    return _global(mesh, local)


def directional_stiffness(mesh: Mesh, axis: int, dofs: DofMap | None = None) -> sp.csr_matrix:
    """Matrix of ``||d v / d x_axis||_0^2`` on interior DOFs (axis 0 is x)."""
    dofs = DofMap.from_mesh(mesh) if dofs is None else dofs
    grads, area = element_gradients(mesh)
    g = grads[..., axis]
    return _restrict(_global(mesh, area[:, None, None] * g[:, :, None] * g[:, None, :]), dofs)


def mass_full(mesh: Mesh) -> sp.csr_matrix:
    _, area = element_gradients(mesh)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _global(mesh, area[:, None, None] * ref)


def assemble_stiffness(mesh: Mesh, cfg: ProblemConfig, dofs: DofMap | None = None) -> sp.csr_matrix:
    """Stiffness matrix of a(u,v) = int(u_x v_x + eps u_y v_y) on interior DOFs."""
    dofs = DofMap.from_mesh(mesh) if dofs is None else dofs
    return _restrict(stiffness_full(mesh, cfg.epsilon), dofs)


def assemble_mass(mesh: Mesh, dofs: DofMap | None = None) -> sp.csr_matrix:
    dofs = DofMap.from_mesh(mesh) if dofs is None else dofs
    return _restrict(mass_full(mesh), dofs)


def delta_E_y(triangle: np.ndarray, edge: int) -> float:
    """``(y_j - y_i) / (2|K|)`` for edge ``(i, j) = (edge, edge+1 mod 3)``.

    ``triangle`` is a ``(3, 2)`` array of counterclockwise vertices.  The
    opposite vertex is ``edge + 2 mod 3``.
    """
    p = np.asarray(triangle, dtype=float)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if area <= 1e-14 * max(np.ptp(p[:, 0]), np.ptp(p[:, 1])) ** 2:
        raise MeshError(f"degenerate or clockwise triangle (area {area:.3e})")
    i, j = edge % 3, (edge + 1) % 3
    return (p[j, 1] - p[i, 1]) / (2.0 * area)


def dx_from_edges(triangle: np.ndarray, values: np.ndarray) -> float:
    """x-derivative of the linear interpolant from edge increments.

    Sums ``delta_E_y * v_E`` over the three edges, with ``v_E`` the value at
    the vertex opposite ``E``.  For counterclockwise triangles the sum is
    ``-dv/dx``, so the sign is flipped here.
    """
    values = np.asarray(values, dtype=float)
    total = sum(delta_E_y(triangle, e) * values[(e + 2) % 3] for e in range(3))
    return -total


def energy_norm(A, v: np.ndarray, tol: float = 1e-12) -> float:
    v = np.asarray(v, dtype=float)
    q = float(v @ (A @ v))
    if q < 0:
        if q < -tol * max(1.0, float(v @ v)):
            raise ValueError(f"negative energy {q:.3e}: matrix is not positive semidefinite")
        return 0.0
    return float(np.sqrt(q))


def directional_seminorms(mesh: Mesh, values: np.ndarray) -> tuple[float, float]:
    """``(||d_x v||_0^2, ||d_y v||_0^2)`` for nodal values on all vertices."""
    g = piecewise_gradient(mesh, values)
    area = mesh.signed_areas()
    return float(area @ g[:, 0] ** 2), float(area @ g[:, 1] ** 2)
