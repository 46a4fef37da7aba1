"""Nodal transfer between nested P1 spaces and the coarse a-orthogonal projection."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DofMap
from .mesh import Hierarchy

__all__ = ["Hierarchy", "prolongation", "interp_IH", "injection", "CoarseCorrection",
           "coarse_correction"]


def prolongation(h: Hierarchy) -> sp.csr_matrix:
    """Matrix of the inclusion V_H -> V_h on interior DOFs.

    Coarse-vertex rows carry a single 1; midpoint rows carry 1/2 at each
    interior endpoint of the parent edge.
    """
    cd, fd = DofMap.from_mesh(h.coarse), DofMap.from_mesh(h.fine)
    nvc = h.coarse.n_vertices

    rows, cols, vals = [], [], []
    old = np.arange(nvc)
    keep = (fd.index[old] >= 0) & (cd.index[old] >= 0)
    rows.append(fd.index[old[keep]])
    cols.append(cd.index[old[keep]])
    vals.append(np.ones(keep.sum()))

    mid_dof = fd.index[h.midpoints]
    for end in (0, 1):
        c = cd.index[h.edges[:, end]]
        keep = (mid_dof >= 0) & (c >= 0)
        rows.append(mid_dof[keep])
        cols.append(c[keep])
        vals.append(np.full(keep.sum(), 0.5))

    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(fd.n, cd.n)).tocsr()
    P.sort_indices()
    return P


def injection(h: Hierarchy) -> sp.csr_matrix:
    """Matrix of I_H on interior DOFs: samples the fine vector at coarse vertices."""
    cd, fd = DofMap.from_mesh(h.coarse), DofMap.from_mesh(h.fine)
    rows = np.arange(cd.n)
    cols = fd.index[cd.vertices]
    return sp.csr_matrix((np.ones(cd.n), (rows, cols)), shape=(cd.n, fd.n))


def interp_IH(h: Hierarchy, v_fine: np.ndarray) -> np.ndarray:
    """Coarse nodal interpolant of a fine DOF vector (coarse DOF values)."""
    cd, fd = DofMap.from_mesh(h.coarse), DofMap.from_mesh(h.fine)
    return np.asarray(v_fine)[fd.index[cd.vertices]]


class CoarseCorrection:
    """a-orthogonal projection ``P_H = P A_H^{-1} P^T A_h`` onto the coarse space.

    The Galerkin matrix ``A_H = P^T A_h P`` is factorized once.
    """

    def __init__(self, A_h: sp.spmatrix, P: sp.spmatrix):
        self.A = sp.csr_matrix(A_h)
        self.P = sp.csr_matrix(P)
        self.PT = self.P.T.tocsr()
        self.A_H = (self.PT @ self.A @ self.P).tocsc()
        try:
            self._lu = spla.splu(self.A_H)
        except RuntimeError as exc:  # singular factor
            raise np.linalg.LinAlgError(f"coarse matrix factorization failed: {exc}") from exc

    def coarse_solve(self, r_H: np.ndarray) -> np.ndarray:
        return self._lu.solve(r_H)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.P @ self._lu.solve(self.PT @ (self.A @ v))

    def complement(self, v: np.ndarray) -> np.ndarray:
        """``(I - P_H) v``."""
        return v - self.apply(v)

    __call__ = apply


def coarse_correction(A_h, P) -> CoarseCorrection:
    return CoarseCorrection(A_h, P)
