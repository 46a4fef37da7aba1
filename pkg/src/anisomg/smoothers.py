"""
Point and overlapping block (line) Gauss-Seidel.

A sweep updates an iterate ``x`` for ``A x = b``.  Run on the error equation
(``b = 0``) the same sweep applies the error-reduction operator ``I - T``.
The A-adjoint of a forward sweep is the backward sweep, which is what
:meth:`Smoother.error_adjoint` uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .strips import StripDecomposition

KINDS = ("point-gs", "line-gs")
ORDERINGS = ("forward", "backward", "symmetric")


class SmootherError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class SmootherConfig:
    kind: str = "point-gs"
    sweeps: int = 1
    ordering: str = "forward"
    strips: StripDecomposition | None = None
    blocks: tuple | None = None  # explicit DOF blocks; overrides strips

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown smoother kind {self.kind!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.kind == "line-gs" and self.blocks is None:
            if self.strips is None or not self.strips.nonempty_blocks():
                raise ValueError("line-gs requires a non-empty strip decomposition")

    def block_list(self) -> list[np.ndarray]:
        if self.blocks is not None:
            return [np.asarray(b, dtype=np.int64) for b in self.blocks if len(b)]
        return self.strips.nonempty_blocks()

    def directions(self) -> list[str]:
        """Sequence of single sweeps, in application order."""
        one = {"forward": ["forward"], "backward": ["backward"],
               "symmetric": ["forward", "backward"]}[self.ordering]
        return one * self.sweeps


def _flip(directions: list[str]) -> list[str]:
    swap = {"forward": "backward", "backward": "forward"}
    return [swap[d] for d in reversed(directions)]


class _PointGS:
    def __init__(self, A: sp.csr_matrix):
        d = A.diagonal()
        if np.any(d == 0):
            raise SmootherError(f"zero diagonal entry at row {int(np.flatnonzero(d == 0)[0])}")
        self.A = A
        lower = sp.tril(A, format="csc")
        # natural ordering keeps the factor of a triangular matrix trivial
        self._lu = spla.splu(lower, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                             options={"SymmetricMode": True})

    def sweep(self, b, x, direction):
        r = b - self.A @ x
        trans = "N" if direction == "forward" else "T"
        return x + self._lu.solve(r, trans=trans)


class _BlockGS:
    """Multiplicative Schwarz over DOF blocks with exact block solves.

    Each block is reordered by reverse Cuthill-McKee and factorized as a
    banded Cholesky matrix; the sweep itself runs in one compiled loop.
    """

    def __init__(self, A: sp.csr_matrix, blocks: list[np.ndarray]):
        self.A = A
        A.sort_indices()
        dofs, ptr, bw, fac_ptr, facs = [], [0], [], [0], []
        for k, idx in enumerate(blocks):
            idx = np.asarray(idx, dtype=np.int64)
            sub = A[idx][:, idx].tocsr()
            perm = reverse_cuthill_mckee(sub, symmetric_mode=True)
            idx, sub = idx[perm], sub[perm][:, perm].tocoo()
            n = idx.size
            u = int(np.max(np.abs(sub.row - sub.col))) if sub.nnz else 0
            ab = np.zeros((u + 1, n))
            low = sub.row >= sub.col
            ab[sub.row[low] - sub.col[low], sub.col[low]] = sub.data[low]
            try:
                chol = sla.cholesky_banded(ab, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise SmootherError(f"factorization of block {k} failed: {exc}") from exc
            dofs.append(idx)
            ptr.append(ptr[-1] + n)
            bw.append(u)
            facs.append(chol.ravel())
            fac_ptr.append(fac_ptr[-1] + chol.size)
        self.blocks = [d.copy() for d in dofs]
        self._dofs = np.concatenate(dofs) if dofs else np.zeros(0, np.int64)
        self._ptr = np.asarray(ptr, dtype=np.int64)
        self._bw = np.asarray(bw, dtype=np.int64)
        self._fac_ptr = np.asarray(fac_ptr, dtype=np.int64)
        self._fac = np.concatenate(facs) if facs else np.zeros(0)
        self._buf = np.empty(int(np.diff(self._ptr).max(initial=1)))
        nb = len(dofs)
        self._order = {"forward": np.arange(nb, dtype=np.int64),
                       "backward": np.arange(nb - 1, -1, -1, dtype=np.int64)}

    def sweep(self, b, x, direction):
        x = np.array(x, dtype=float)
        _block_sweep(self.A.indptr, self.A.indices, self.A.data, np.asarray(b, dtype=float), x,
                     self._ptr, self._dofs, self._bw, self._fac_ptr, self._fac,
                     self._order[direction], self._buf)
        return x


@njit(cache=True)
def _block_sweep(indptr, indices, data, b, x, ptr, dofs, bw, fac_ptr, fac, order, r):
    for k in order:
        s = ptr[k]
        n = ptr[k + 1] - s
        u = bw[k]
        f0 = fac_ptr[k]
        for t in range(n):
            i = dofs[s + t]
            acc = b[i]
            for p in range(indptr[i], indptr[i + 1]):
                acc -= data[p] * x[indices[p]]
            r[t] = acc
        # banded lower factor: L[j + d, j] = fac[f0 + d*n + j]
        for j in range(n):
            r[j] /= fac[f0 + j]
            for d in range(1, min(u, n - 1 - j) + 1):
                r[j + d] -= fac[f0 + d * n + j] * r[j]
        for j in range(n - 1, -1, -1):
            acc = r[j]
            for d in range(1, min(u, n - 1 - j) + 1):
                acc -= fac[f0 + d * n + j] * r[j + d]
            r[j] = acc / fac[f0 + j]
        for t in range(n):
            x[dofs[s + t]] += r[t]


class Smoother:
    """A configured smoother with its factorizations cached for one matrix."""

    def __init__(self, config: SmootherConfig, A):
        self.config = config
        self.A = sp.csr_matrix(A)
        if config.kind == "point-gs":
            self._impl = _PointGS(self.A)
        else:
            self._impl = _BlockGS(self.A, config.block_list())
        self._dirs = config.directions()

    def apply(self, b, x):
        """Run the configured sweeps on ``A x = b`` starting from ``x``."""
        x = np.asarray(x, dtype=float)
        for d in self._dirs:
            x = self._impl.sweep(b, x, d)
        return x

    def error(self, e):
        """``(I - T) e``: the sweeps applied to the error equation."""
        e = np.asarray(e, dtype=float)
        zero = np.zeros_like(e)
        for d in self._dirs:
            e = self._impl.sweep(zero, e, d)
        return e

    def error_adjoint(self, e):
        """A-adjoint of :meth:`error`."""
        e = np.asarray(e, dtype=float)
        zero = np.zeros_like(e)
        for d in _flip(self._dirs):
            e = self._impl.sweep(zero, e, d)
        return e


def point_gs_apply(A, b, x, ordering: str = "forward"):
    """One Gauss-Seidel sweep in DOF order (``backward`` runs it in reverse)."""
    return Smoother(SmootherConfig("point-gs", ordering=ordering), A).apply(b, x)


def line_gs_apply(A, b, x, strips, ordering: str = "forward"):
    """One multiplicative Schwarz sweep over the strip blocks (or explicit blocks)."""
    if isinstance(strips, StripDecomposition):
        cfg = SmootherConfig("line-gs", ordering=ordering, strips=strips)
    else:
        cfg = SmootherConfig("line-gs", ordering=ordering, blocks=tuple(strips))
    return Smoother(cfg, A).apply(b, x)


def error_operator_apply(config: SmootherConfig, A, e):
    return Smoother(config, A).error(e)
