"""
Numerical checks of the identities and stability estimates behind the
two-level analysis, plus the lower-bound witness for point smoothers.

Every check returns a :class:`LemmaReport` with the worst constant it saw.
Exact identities compare against a relative tolerance; inequalities compare
against a bound, and the report always carries the measured constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import (DofMap, ProblemConfig, assemble_mass, assemble_stiffness,
                       directional_stiffness, element_gradients, piecewise_gradient)
from .mesh import Hierarchy, Mesh, MeshSpec, build_rotated_uniform, refine_regular, rotate
from .smoothers import SmootherConfig
from .strips import StripDecomposition
from .transfer import injection, prolongation
from .twolevel import TwoLevelOperator, estimate_rate


@dataclass
class LemmaReport:
    lemma: str
    mesh: str
    trials: int
    worst: float
    bound: float
    tol: float
    passed: bool
    kind: str = "inequality"  # or "identity"
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.lemma:<22} {self.mesh:<28} trials={self.trials:<5d} "
                f"worst={self.worst:.3e} bound={self.bound:.3e}")


def describe(mesh: Mesh) -> str:
    return f"nv={mesh.n_vertices} nt={mesh.n_triangles} omega={mesh.omega:.4f}"


def _inequality(lemma, mesh, trials, worst, bound, tol, **extra) -> LemmaReport:
    return LemmaReport(lemma, describe(mesh), trials, worst, bound, tol,
                       bool(worst <= bound * (1 + tol)), extra=extra)


def _identity(lemma, mesh, trials, worst, tol, **extra) -> LemmaReport:
    return LemmaReport(lemma, describe(mesh), trials, worst, tol, 0.0, bool(worst <= tol),
                       kind="identity", extra=extra)


# -- element-level identities -------------------------------------------------

def edge_deltas(mesh: Mesh) -> np.ndarray:
    """``delta_E^K y`` for every triangle and edge ``e = (e, e+1 mod 3)``, shape (nt, 3)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    y = p[..., 1]
    return (np.roll(y, -1, axis=1) - y) / (2.0 * area)[:, None]


def check_derivative_identity(mesh: Mesh, trials: int = 100, seed: int = 0,
                              tol: float = 1e-12) -> LemmaReport:
    """x-derivative from edge increments equals the P1 gradient on every triangle.

    With counterclockwise vertices the edge sum gives ``-dv/dx``.  The check
    runs on the three local unit vectors (which is complete, the relation
    being linear) and on ``trials`` random nodal vectors.
    """
    delta = edge_deltas(mesh)
    grads, _ = element_gradients(mesh)
    # value at the vertex opposite edge e is vertex e+2
    opposite = np.roll(np.eye(3), 2, axis=1)  # opposite[e, k] = 1 iff k == e+2
    from_edges = -np.einsum("te,ek->tk", delta, opposite)
    worst = float(np.max(np.abs(from_edges - grads[:, :, 0])
                         / np.abs(grads[:, :, 0]).max(axis=1, keepdims=True)))
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        v = rng.standard_normal(mesh.n_vertices)
        vloc = v[mesh.triangles]
        dx = np.einsum("tk,tk->t", grads[:, :, 0], vloc)
        rhs = -np.einsum("te,te->t", delta, vloc[:, [2, 0, 1]])
        scale = np.abs(grads[:, :, 0] * vloc).sum(axis=1) + 1e-300
        worst = max(worst, float(np.max(np.abs(dx - rhs) / scale)))
    return _identity("derivative-identity", mesh, trials, worst, tol)


def _local_six(h: Hierarchy) -> tuple[np.ndarray, np.ndarray]:
    """Per coarse triangle: fine vertex ids ``[a, b, c, m_ab, m_bc, m_ca]`` and child corners."""
    ft = h.fine.triangles
    ch = h.children
    a, b, c = h.coarse.triangles.T
    m_ab, m_ca = ft[ch[:, 0], 1], ft[ch[:, 0], 2]
    m_bc = ft[ch[:, 1], 2]
    six = np.column_stack([a, b, c, m_ab, m_bc, m_ca])
    return six, ch


def child_gradient_residuals(h: Hierarchy, values: np.ndarray) -> np.ndarray:
    """Per coarse triangle: ``d_x(I_H v)|_K - (sum_{l<4} d_x v|_{K_l} - d_x v|_{K_4}) / 2``,
    scaled by the largest child x-derivative magnitude.  ``values`` on all fine vertices."""
    nvc = h.coarse.n_vertices
    g_full = piecewise_gradient(h.fine, values)
    g_coarse = piecewise_gradient(h.coarse, np.asarray(values)[:nvc])[:, 0]
    gc = g_full[:, 0][h.children]
    rhs = 0.5 * (gc[:, 0] + gc[:, 1] + gc[:, 2] - gc[:, 3])
    # full gradient size: the x-parts alone can cancel or vanish
    scale = np.linalg.norm(g_full, axis=1)[h.children].max(axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    return (g_coarse - rhs) / scale


def check_prop41(h: Hierarchy, trials: int = 100, seed: int = 0, tol: float = 1e-12,
                 prolong=None) -> LemmaReport:
    """Coarse x-derivative as a signed combination of the four children's.

    The local unit-vector sweep uses ``prolong`` (a sparse fine-by-coarse
    matrix) when given, so a corrupted prolongation shows up here too.
    """
    six, _ = _local_six(h)
    nv = h.fine.n_vertices
    worst = 0.0
    # unit vectors on each of the six local positions, all coarse triangles at once
    grads_f, _ = element_gradients(h.fine)
    grads_c, _ = element_gradients(h.coarse)
    ft, ct = h.fine.triangles, h.coarse.triangles
    for pos in range(6):
        target = six[:, pos]
        # child derivative of the hat at ``target`` on each child
        d_child = np.zeros((six.shape[0], 4))
        size = np.zeros(six.shape[0])
        for l in range(4):
            tri = ft[h.children[:, l]]
            hit = (tri == target[:, None])[..., None]
            g = (grads_f[h.children[:, l]] * hit).sum(axis=1)
            d_child[:, l] = g[:, 0]
            size = np.maximum(size, np.linalg.norm(g, axis=1))
        hit_c = ct == target[:, None]
        d_coarse = (grads_c[:, :, 0] * hit_c).sum(axis=1)
        rhs = 0.5 * (d_child[:, 0] + d_child[:, 1] + d_child[:, 2] - d_child[:, 3])
        scale = np.where(size > 0, size, 1.0)
        worst = max(worst, float(np.max(np.abs(d_coarse - rhs) / scale)))

    rng = np.random.default_rng(seed)
    fd = DofMap.from_mesh(h.fine)
    for _ in range(trials):
        v = fd.to_vertices(rng.standard_normal(fd.n), nv)
        worst = max(worst, float(np.max(np.abs(child_gradient_residuals(h, v)))))

    if prolong is not None:
        # a coarse function must have all four children share its gradient
        cd = DofMap.from_mesh(h.coarse)
        for _ in range(max(trials, 3)):
            vH = rng.standard_normal(cd.n)
            vh = fd.to_vertices(prolong @ vH, nv)
            worst = max(worst, float(np.max(np.abs(child_gradient_residuals(h, vh)))))
            gH = piecewise_gradient(h.coarse, cd.to_vertices(vH, h.coarse.n_vertices))[:, 0]
            gh = piecewise_gradient(h.fine, vh)[:, 0][h.children]
            s = np.abs(gh).max() + 1e-300
            worst = max(worst, float(np.max(np.abs(gh - gH[:, None])) / s))
    return _identity("child-gradients", h.fine, trials, worst, tol)


def check_interpolation_identities(h: Hierarchy, trials: int = 100, seed: int = 0,
                                   tol: float = 1e-12, P=None) -> LemmaReport:
    """``I_H (P v_H) = v_H`` for random coarse vectors (``P`` defaults to the true one)."""
    P = prolongation(h) if P is None else P
    cd, fd = DofMap.from_mesh(h.coarse), DofMap.from_mesh(h.fine)
    pick = fd.index[cd.vertices]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(max(trials, 1)):
        vH = rng.standard_normal(cd.n)
        worst = max(worst, float(np.max(np.abs((P @ vH)[pick] - vH))) / np.abs(vH).max())
    return _identity("I_H-P", h.fine, trials, worst, tol)


def check_partition_identity(mesh: Mesh, strips: StripDecomposition, trials: int = 100,
                             seed: int = 0, tol: float = 1e-12) -> LemmaReport:
    """``sum_i I_h(theta_i w) = w`` nodally, on DOF unit vectors and random ``w``."""
    n = strips.dof_y.size
    total = sum(strips.theta(i, strips.dof_y) for i in strips.indices)
    worst = float(np.abs(total - 1.0).max()) if n else 0.0
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        w = rng.standard_normal(n)
        worst = max(worst, float(np.abs(sum(strips.split(w)) - w).max() / np.abs(w).max()))
    return _identity("partition-of-unity", mesh, trials, worst, tol)


def check_v0(h: Hierarchy, tol: float = 1e-12) -> LemmaReport:
    """The lower-bound witness vanishes at every coarse vertex."""
    fd = DofMap.from_mesh(h.fine)
    v0 = build_v0(h.fine, fd)
    pick = fd.index[DofMap.from_mesh(h.coarse).vertices]
    worst = float(np.abs(v0[pick]).max()) if pick.size else 0.0
    return _identity("I_H-v0", h.fine, 0, worst, tol, support=int(np.count_nonzero(v0)))


def check_galerkin(h: Hierarchy, epsilon: float, tol: float = 1e-12) -> LemmaReport:
    """``P^T A_h P`` against the directly assembled coarse stiffness matrix."""
    cfg = ProblemConfig(epsilon)
    P = prolongation(h)
    Ah = assemble_stiffness(h.fine, cfg)
    AH = assemble_stiffness(h.coarse, cfg)
    diff = (P.T @ Ah @ P - AH).tocsr()
    scale = abs(AH).max()
    worst = float(abs(diff).max() / scale) if diff.nnz else 0.0
    return _identity("galerkin", h.coarse, 0, worst, tol, epsilon=epsilon)


# -- coarse interpolant stability ------------------------------------------------

def coarse_interp_values(h: Hierarchy, v_fine_vertices: np.ndarray) -> np.ndarray:
    return np.asarray(v_fine_vertices)[: h.coarse.n_vertices]


def interp_ratios(h: Hierarchy, v: np.ndarray) -> tuple[float, float]:
    """``||d(I_H v)||^2 / ||dv||^2`` for x and y; nan where the denominator vanishes."""
    gf = piecewise_gradient(h.fine, v)
    gc = piecewise_gradient(h.coarse, coarse_interp_values(h, v))
    af, ac = h.fine.signed_areas(), h.coarse.signed_areas()
    out = []
    for d in (0, 1):
        den = float(af @ gf[:, d] ** 2)
        num = float(ac @ gc[:, d] ** 2)
        out.append(num / den if den > 1e-28 else float("nan"))
    return out[0], out[1]


def directional_matrices(mesh: Mesh, dofs: DofMap | None = None):
    """Interior-DOF matrices of ``||d_x v||^2`` and ``||d_y v||^2``."""
    return directional_stiffness(mesh, 0, dofs), directional_stiffness(mesh, 1, dofs)


def interp_dense_bound(h: Hierarchy) -> tuple[float, float]:
    """Largest generalized eigenvalue of ``(R^T Dx_H R, Dx_h)`` and likewise for y.

    ``R`` samples fine DOFs at coarse vertices.  Dense; meant for small meshes.
    """
    R = injection(h).toarray()
    tops = []
    for DH, Dh in zip(directional_matrices(h.coarse), directional_matrices(h.fine)):
        num = R.T @ DH.toarray() @ R
        ev = sla.eigh(num, Dh.toarray(), eigvals_only=True)
        tops.append(float(ev[-1]))
    return tops[0], tops[1]


def check_lemma42(h: Hierarchy, trials: int = 1000, seed: int = 0, bound: float = 4.0,
                  tol: float = 1e-10) -> LemmaReport:
    """Coarse interpolant is stable in each directional seminorm with constant 4.

    Also records the approximation ratio ``||v - I_H v||_0 / (h |v|_1)`` over
    the same random vectors.
    """
    fd = DofMap.from_mesh(h.fine)
    P = prolongation(h)
    M = assemble_mass(h.fine, fd)
    K1 = assemble_stiffness(h.fine, ProblemConfig(1.0), fd)
    pick = fd.index[DofMap.from_mesh(h.coarse).vertices]
    rng = np.random.default_rng(seed)
    worst_x = worst_y = 0.0
    approx = []
    for _ in range(trials):
        u = rng.standard_normal(fd.n)
        rx, ry = interp_ratios(h, fd.to_vertices(u, h.fine.n_vertices))
        if not math.isnan(rx):
            worst_x = max(worst_x, rx)
        if not math.isnan(ry):
            worst_y = max(worst_y, ry)
        e = u - P @ u[pick]
        approx.append(math.sqrt(e @ (M @ e)) / (h.fine.h_char * math.sqrt(u @ (K1 @ u))))
    worst = max(worst_x, worst_y)
    return _inequality("interp-stability", h.fine, trials, worst, bound, tol, worst_x=worst_x,
                       worst_y=worst_y, approx_ratio=max(approx) if approx else float("nan"))


def smooth_approximation_ratio(h: Hierarchy, func=None) -> float:
    """``||v - I_H v||_0 / (h |v|_1)`` for the fine interpolant of a smooth function.

    The default function ``cos(pi x'/2) cos(pi y'/2)`` (pre-rotation
    coordinates) vanishes on the boundary of every rotated square.
    """
    fine = h.fine
    if func is None:
        def func(x, y):
            return np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)
    pre = rotate(fine.vertices, -fine.omega)
    fd = DofMap.from_mesh(fine)
    u = func(pre[fd.vertices, 0], pre[fd.vertices, 1])
    pick = fd.index[DofMap.from_mesh(h.coarse).vertices]
    e = u - prolongation(h) @ u[pick]
    M = assemble_mass(fine, fd)
    K1 = assemble_stiffness(fine, ProblemConfig(1.0), fd)
    return math.sqrt(e @ (M @ e)) / (fine.h_char * math.sqrt(u @ (K1 @ u)))


# -- fine-grid partition-of-unity stability ----------------------------------------

def theta_sq_integrals(mesh: Mesh, strips: StripDecomposition, i: int) -> np.ndarray:
    """Exact ``int_K theta_i(y)^2 dA`` for every triangle.

    Integrates ``theta_i^2(y) * width_K(y)`` in y.  Between consecutive
    breakpoints (vertex heights and the hat's kinks) the integrand is a cubic,
    so Simpson's rule on each piece is exact.
    """
    y = np.sort(mesh.vertices[mesh.triangles, 1], axis=1)
    ya, yb, yc = y[:, 0], y[:, 1], y[:, 2]
    area = mesh.signed_areas()
    height = yc - ya
    wmax = 2.0 * area / height

    def width(t):
        up = np.where(yb > ya, wmax * (t - ya) / np.where(yb > ya, yb - ya, 1.0), wmax)
        down = np.where(yc > yb, wmax * (yc - t) / np.where(yc > yb, yc - yb, 1.0), wmax)
        return np.clip(np.where(t <= yb, up, down), 0.0, None)

    kinks = strips.y_min + strips.width * np.array([i - 1, i, i + 1], dtype=float)
    pts = np.concatenate([y, np.clip(np.broadcast_to(kinks, (y.shape[0], 3)),
                                     ya[:, None], yc[:, None])], axis=1)
    pts.sort(axis=1)
    total = np.zeros(y.shape[0])
    for k in range(pts.shape[1] - 1):
        lo, hi = pts[:, k], pts[:, k + 1]
        mid = 0.5 * (lo + hi)
        f = [strips.theta(i, t) ** 2 * width(t) for t in (lo, mid, hi)]
        total += (hi - lo) / 6.0 * (f[0] + 4.0 * f[1] + f[2])
    return total


def strip_ratios(mesh: Mesh, strips: StripDecomposition, w_vertices: np.ndarray,
                   skip_rel: float = 1e-12) -> np.ndarray:
    """Per strip: ``||d_x I_h(theta_i w)||^2 / ||d_x (theta_i w)||^2`` (nan if both vanish)."""
    gx = piecewise_gradient(mesh, w_vertices)[:, 0]
    area = mesh.signed_areas()
    y = mesh.vertices[:, 1]
    total = float(area @ gx**2)
    out = np.full(strips.L + 2, np.nan)
    for i in strips.indices:
        th = strips.theta(i, y)
        if not th.any():
            continue
        num_g = piecewise_gradient(mesh, th * w_vertices)[:, 0]
        num = float(area @ num_g**2)
        den = float(theta_sq_integrals(mesh, strips, i) @ gx**2)
        if den > skip_rel * total:
            out[i] = num / den
        elif num <= skip_rel * total:
            out[i] = 0.0
    return out


def random_fine_only(h: Hierarchy, rng) -> np.ndarray:
    """Random values on interior midpoint vertices, zero at coarse vertices and the boundary."""
    w = np.zeros(h.fine.n_vertices)
    mids = h.midpoints[~h.fine.boundary[h.midpoints]]
    w[mids] = rng.standard_normal(mids.size)
    return w


def check_lemma56(h: Hierarchy, strips: StripDecomposition, trials: int = 200, seed: int = 0,
                  bound: float = 32.0) -> LemmaReport:
    """Partition-of-unity pieces of a function vanishing at coarse vertices are x-stable."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        r = strip_ratios(h.fine, strips, random_fine_only(h, rng))
        if np.isfinite(r).any():
            worst = max(worst, float(np.nanmax(r)))
    return _inequality("strip-stability", h.fine, trials, worst, bound, 0.0)


def check_decomposition_stability(h: Hierarchy, strips: StripDecomposition, trials: int = 200,
                                  seed: int = 0, l2_range=(1 / 8, 8.0), dx_bound: float = 64.0,
                                  tol: float = 1e-12) -> LemmaReport:
    """``w = v - I_H v`` split as ``w_i = I_h(theta_i w)``: L2 two-sided, d_x one-sided."""
    fine = h.fine
    fd = DofMap.from_mesh(fine)
    P = prolongation(h)
    M = assemble_mass(fine, fd)
    Dx = directional_matrices(fine, fd)[0]
    pick = fd.index[DofMap.from_mesh(h.coarse).vertices]
    rng = np.random.default_rng(seed)
    l2_lo, l2_hi, dx_hi, split_err = math.inf, 0.0, 0.0, 0.0
    for _ in range(trials):
        v = rng.standard_normal(fd.n)
        w = v - P @ v[pick]
        pieces = strips.split(w)
        split_err = max(split_err, float(np.abs(sum(pieces) - w).max() / np.abs(w).max()))
        ww = float(w @ (M @ w))
        if ww < 1e-28:
            continue
        l2 = sum(float(p @ (M @ p)) for p in pieces) / ww
        dx = sum(float(p @ (Dx @ p)) for p in pieces) / float(w @ (Dx @ w))
        l2_lo, l2_hi, dx_hi = min(l2_lo, l2), max(l2_hi, l2), max(dx_hi, dx)
    ok = (split_err <= tol and (trials == 0 or (l2_lo >= l2_range[0] and l2_hi <= l2_range[1]
                                                 and dx_hi <= dx_bound)))
    rep = LemmaReport("decomposition", describe(fine), trials, dx_hi, dx_bound, tol, bool(ok),
                      extra={"l2_min": l2_lo, "l2_max": l2_hi, "split_err": split_err})
    return rep


# -- lower-bound witness for point smoothers ----------------------------------------------

def build_v0(fine: Mesh, dofs: DofMap | None = None) -> np.ndarray:
    """Tent ``1 - |x|`` on the first fine-only vertex row above ``y = 0``, zero elsewhere.

    ``fine`` must be an axis-aligned uniform mesh obtained by refining a
    generated mesh, so that even rows (counted from ``y = -1``) carry the
    coarse vertices.
    """
    if abs(fine.omega) > 0 or not _axis_aligned(fine):
        raise ValueError("build_v0 needs an axis-aligned (omega = 0) uniform mesh")
    dofs = DofMap.from_mesh(fine) if dofs is None else dofs
    s = fine.h_char / math.sqrt(2.0)
    x, y = fine.vertices[:, 0], fine.vertices[:, 1]
    row = np.rint((y + 1.0) / s).astype(np.int64)
    candidates = np.unique(row[(row % 2 == 1) & (y > 0.5 * s * 1e-6)])
    r = int(candidates.min())
    on_row = row == r
    v = np.where(on_row, 1.0 - np.abs(x), 0.0)
    return dofs.restrict(v)


def _axis_aligned(mesh: Mesh, tol: float = 1e-9) -> bool:
    s = mesh.h_char / math.sqrt(2.0)
    g = (mesh.vertices + 1.0) / s
    return bool(np.all(np.abs(g - np.rint(g)) < tol))


@dataclass
class LowerBoundRow:
    epsilon: float
    level: int
    h: float
    R: float
    R_scaled: float
    measured_rate: float = float("nan")
    v0_l2_over_h: float = float("nan")
    v0_a_over_scale: float = float("nan")


def l2_projection(h: Hierarchy, M, P):
    """Callable applying ``Q_H v = P (P^T M P)^{-1} P^T M v``."""
    MH = (P.T @ M @ P).tocsc()
    lu = spla.splu(MH)

    def Q(v):
        return P @ lu.solve(P.T @ (M @ v))
    return Q


def check_lower_bound(N0: int = 4, epsilons=(1.0, 1e-2, 1e-4, 1e-6, 1e-8), levels=(2, 3, 4, 5),
                      rates: bool = False, rate_kwargs: dict | None = None) -> list[LowerBoundRow]:
    """Witness ratio ``R = h^-2 ||(I - Q_H) v0||^2 / ||v0||_a^2`` and ``R (eps + h^2)``.

    With ``rates=True`` the point Gauss-Seidel two-level rate is measured for
    each row as well.
    """
    rows = []
    base = build_rotated_uniform(MeshSpec(N0, 0.0))
    coarse = base
    for lev in range(1, max(levels) + 1):
        if lev > 1:
            coarse, _ = refine_regular(coarse)
        if lev not in levels:
            continue
        fine, hier = refine_regular(coarse)
        fd = DofMap.from_mesh(fine)
        P = prolongation(hier)
        M = assemble_mass(fine, fd)
        Q = l2_projection(hier, M, P)
        v0 = build_v0(fine, fd)
        e = v0 - Q(v0)
        l2_perp = float(e @ (M @ e))
        l2 = float(v0 @ (M @ v0))
        Dx, Dy = directional_matrices(fine, fd)
        ax, ay = float(v0 @ (Dx @ v0)), float(v0 @ (Dy @ v0))
        hh = fine.h_char
        for eps in epsilons:
            energy = ax + eps * ay
            R = l2_perp / (hh**2 * energy)
            row = LowerBoundRow(eps, lev, hh, R, R * (eps + hh**2),
                                v0_l2_over_h=l2 / hh, v0_a_over_scale=energy / (hh + eps / hh))
            if rates:
                A = assemble_stiffness(fine, ProblemConfig(eps), fd)
                op = TwoLevelOperator(A, P, SmootherConfig("point-gs"), omega=0.0, level=lev,
                                      h=hh, epsilon=eps)
                row.measured_rate = estimate_rate(op, **(rate_kwargs or {})).rate
            rows.append(row)
    return rows
