"""Horizontal strips: the partition of unity in y and the overlapping line-smoother blocks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import DofMap
from .mesh import Mesh

_MEMBER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StripDecomposition:
    """Strips ``i = 0 .. L+1`` of width ``2*width`` centred at ``y_min + i*width``.

    ``blocks[i]`` holds the interior DOFs supported in strip ``i`` (sorted).
    Strips 0 and L+1 extend the literal range ``1..L`` so that the hats sum
    to one on all of ``[y_min, y_max]``; either may have an empty block.
    """

    y_min: float
    y_max: float
    width: float
    L: int
    blocks: tuple[np.ndarray, ...]
    dof_y: np.ndarray

    @property
    def indices(self) -> range:
        return range(0, self.L + 2)

    def theta(self, i: int, y) -> np.ndarray:
        """Hat function of strip ``i`` evaluated at absolute y-coordinates."""
        rel = (np.asarray(y, dtype=float) - self.y_min) / self.width
        return np.clip(1.0 - np.abs(rel - i), 0.0, 1.0)

    def nonempty_blocks(self) -> list[np.ndarray]:
        return [b for b in self.blocks if b.size]

    def split(self, w: np.ndarray) -> list[np.ndarray]:
        """Nodal pieces ``I_h(theta_i w)`` for a DOF vector ``w``; they sum to ``w``."""
        return [self.theta(i, self.dof_y) * w for i in self.indices]

    def block_count(self) -> np.ndarray:
        """Number of blocks each DOF belongs to."""
        counts = np.zeros(self.dof_y.size, dtype=np.int64)
        for b in self.blocks:
            counts[b] += 1
        return counts


def theta(i: int, y, y_min: float, width: float) -> np.ndarray:
    rel = (np.asarray(y, dtype=float) - y_min) / width
    return np.clip(1.0 - np.abs(rel - i), 0.0, 1.0)


def strip_triangles(mesh: Mesh, y_min: float, width: float, i: int) -> np.ndarray:
    """Mask of triangles with at least one vertex in strip ``i``."""
    rel = (mesh.vertices[:, 1] - y_min) / width
    inside = (rel >= i - 1 - _MEMBER_TOL) & (rel <= i + 1 + _MEMBER_TOL)
    return inside[mesh.triangles].any(axis=1)


def build_strips(mesh: Mesh, dofs: DofMap | None = None, strip_width: float | None = None
                 ) -> StripDecomposition:
    """Overlapping blocks ``V_i = {v in V_h : supp v within the strip-i triangles}``."""
    dofs = DofMap.from_mesh(mesh) if dofs is None else dofs
    w = mesh.h_char if strip_width is None else float(strip_width)
    if not w > 0:
        raise ValueError(f"strip width must be positive, got {strip_width!r}")
    y_min, y_max = mesh.y_extent
    L = int(math.floor((y_max - y_min) / w + 1e-12))
    if L > 16 * mesh.n_vertices:
        raise ValueError(f"strip width {w!r} gives {L} strips for {mesh.n_vertices} vertices")

    tri = mesh.triangles
    n = mesh.n_vertices
    incident = np.bincount(tri.ravel(), minlength=n)
    rel = (mesh.vertices[:, 1] - y_min) / w
    is_dof = dofs.index >= 0

    blocks = []
    for i in range(L + 2):
        v_in = (rel >= i - 1 - _MEMBER_TOL) & (rel <= i + 1 + _MEMBER_TOL)
        in_T = v_in[tri].any(axis=1)
        hits = np.bincount(tri[in_T].ravel(), minlength=n)
        members = np.flatnonzero((hits == incident) & (incident > 0) & is_dof)
        blocks.append(np.sort(dofs.index[members]))

    covered = np.zeros(dofs.n, dtype=bool)
    for b in blocks:
        covered[b] = True
    if not covered.all():
        lost = np.flatnonzero(~covered)
        nearest = np.clip(np.rint(rel[dofs.vertices[lost]]).astype(int), 0, L + 1)
        for i in np.unique(nearest):
            blocks[i] = np.union1d(blocks[i], lost[nearest == i])

    if not any(b.size for b in blocks):
        raise ValueError("strip decomposition has no non-empty block")
    for b in blocks:
        b.setflags(write=False)
    return StripDecomposition(y_min, y_max, w, L, tuple(blocks),
                              mesh.vertices[dofs.vertices, 1].copy())
