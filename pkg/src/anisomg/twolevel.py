"""
Two-level error propagation ``E = (I - T)(I - P_H)`` and its energy norm.

``estimate_rate`` runs power iteration on ``E^dagger E`` in the A-inner
product, where ``E^dagger = (I - P_H)(I - T)^dagger`` is the A-adjoint.  Its
dominant eigenvalue is ``||E||_a^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import DofMap, ProblemConfig, assemble_stiffness
from .mesh import Mesh, MeshSpec, build_rotated_uniform, refine_regular, refine_times
from .smoothers import Smoother, SmootherConfig
from .strips import build_strips
from .transfer import CoarseCorrection, prolongation


class DivergenceError(RuntimeError):
    pass


@dataclass
class RateReport:
    omega: float
    level: int
    h: float
    epsilon: float
    smoother: str
    rate: float
    iterations: int
    converged: bool

    @property
    def K_est(self) -> float | None:
        return 1.0 / (1.0 - self.rate) if self.rate < 1.0 else None


class TwoLevelOperator:
    """Fine stiffness, prolongation, coarse correction and smoother for one case.

    ``omega``, ``level``, ``h`` and ``epsilon`` are carried along for reports.
    """

    def __init__(self, A, P, smoother: SmootherConfig | Smoother, *, omega=0.0, level=0,
                 h=float("nan"), epsilon=float("nan")):
        self.coarse = CoarseCorrection(A, P)
        self.A = self.coarse.A
        self.P = self.coarse.P
        self.smoother = smoother if isinstance(smoother, Smoother) else Smoother(smoother, self.A)
        self.omega, self.level, self.h, self.epsilon = omega, level, h, epsilon

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_mesh(cls, coarse: Mesh, epsilon: float, kind: str = "line-gs", *,
                  ordering: str = "forward", sweeps: int = 1, strip_width: float | None = None,
                  level: int = 0) -> "TwoLevelOperator":
        """Refine ``coarse`` once and set up the two-level method on the pair."""
        fine, hier = refine_regular(coarse)
        dofs = DofMap.from_mesh(fine)
        A = assemble_stiffness(fine, ProblemConfig(epsilon), dofs)
        P = prolongation(hier)
        strips = build_strips(fine, dofs, strip_width) if kind == "line-gs" else None
        cfg = SmootherConfig(kind, sweeps=sweeps, ordering=ordering, strips=strips)
        op = cls(A, P, cfg, omega=fine.omega, level=level, h=fine.h_char, epsilon=epsilon)
        op.fine_mesh, op.hierarchy = fine, hier
        return op

    def apply_E(self, e):
        return self.smoother.error(self.coarse.complement(e))

    def apply_E_adjoint(self, v):
        return self.coarse.complement(self.smoother.error_adjoint(v))

    def energy(self, v) -> float:
        return float(v @ (self.A @ v))


def level_meshes(N0: int, omega: float, level: int, base: Mesh | None = None) -> Mesh:
    """Coarse mesh of refinement level ``level`` (its refinement has h = 2^-level h0)."""
    if level < 1:
        raise ValueError("level must be >= 1")
    base = build_rotated_uniform(MeshSpec(N0, omega)) if base is None else base
    coarse, _ = refine_times(base, level - 1)
    return coarse


def build_case(N0: int, omega: float, level: int, epsilon: float, kind: str, *,
               ordering: str = "forward", strip_width: float | None = None,
               base: Mesh | None = None) -> TwoLevelOperator:
    coarse = level_meshes(N0, omega, level, base)
    return TwoLevelOperator.from_mesh(coarse, epsilon, kind, ordering=ordering,
                                      strip_width=strip_width, level=level)


def estimate_rate(op: TwoLevelOperator, tol: float = 1e-8, max_iter: int = 2000,
                  seed: int = 42) -> RateReport:
    """Power iteration for ``||E||_a^2`` from a seeded uniform[-1, 1] start."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, op.n)
    x /= math.sqrt(op.energy(x))

    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = op.apply_E(x)
        q = op.energy(y)
        history.append(q)
        if q <= 0.0 or not np.isfinite(q):
            converged = q <= 0.0
            break
        if len(history) > 1 and abs(q - history[-2]) < tol * q:
            converged = True
            break
        z = op.apply_E_adjoint(y)
        nz = op.energy(z)
        if nz <= 0.0:
            converged = True
            break
        x = z / math.sqrt(nz)

    # Rayleigh quotients rise monotonically; the max guards against rounding wobble
    rate = max(history[-10:]) if history else 0.0
    return RateReport(omega=op.omega, level=op.level, h=op.h, epsilon=op.epsilon,
                      smoother=op.smoother.config.kind, rate=max(rate, 0.0),
                      iterations=it, converged=converged)


def solve(op: TwoLevelOperator, b, tol: float = 1e-10, max_iter: int = 500, x0=None):
    """Stationary two-level iteration: coarse correction, then smoothing.

    Returns ``(x, iterations, residual_history)``; the history holds relative
    residual norms starting with the initial one.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros(op.n) if x0 is None else np.array(x0, dtype=float)
    nb = float(np.linalg.norm(b))
    if nb == 0.0 and not x.any():
        return x, 0, [0.0]
    scale = nb if nb > 0 else 1.0
    r = b - op.A @ x
    history = [float(np.linalg.norm(r)) / scale]
    growth = 0
    it = 0
    while history[-1] >= tol and it < max_iter:
        it += 1
        x = x + op.P @ op.coarse.coarse_solve(op.P.T @ r)
        x = op.smoother.apply(b, x)
        r = b - op.A @ x
        history.append(float(np.linalg.norm(r)) / scale)
        growth = growth + 1 if history[-1] > history[-2] else 0
        if growth >= 10:
            raise DivergenceError(f"residual grew for 10 consecutive steps (iteration {it})")
    return x, it, history
