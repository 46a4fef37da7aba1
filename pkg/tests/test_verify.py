import math

import numpy as np
import pytest
from shapely.geometry import Polygon, box
from shapely.geometry.polygon import orient

from anisomg.assembly import DofMap, assemble_mass
from anisomg.mesh import MeshSpec, build_rotated_uniform, jitter_interior, refine_regular
from anisomg.strips import build_strips
from anisomg.transfer import prolongation
from anisomg import verify as V

from .conftest import OMEGAS


def _theta_sq_oracle(mesh, strips, i, pieces=64):
    """``int_K theta_i^2`` by clipping each triangle to thin horizontal slabs.

    On a slab the integrand is ``theta_i(y)^2`` times the clipped area; the
    slab integral uses the clipped polygon's exact moments up to order two.
    """
    lo = strips.y_min + (i - 1) * strips.width
    out = np.zeros(mesh.n_triangles)
    edges = lo + strips.width * np.linspace(0, 2, 2 * pieces + 1)
    for k, tri in enumerate(mesh.triangles):
        poly = Polygon(mesh.vertices[tri])
        x0, y0, x1, y1 = poly.bounds
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= y0 or a >= y1:
                continue
            part = poly.intersection(box(x0 - 1, a, x1 + 1, b))
            if part.is_empty or part.area == 0:
                continue
            out[k] += _poly_theta_sq(np.asarray(orient(part, 1.0).exterior.coords), strips, i)
    return out


def _poly_theta_sq(coords, strips, i):
    """Exact integral of ``theta_i(y)^2`` over a polygon on which it is one quadratic."""
    x, y = coords[:-1, 0], coords[:-1, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2
    my = ((y + yn) * cross).sum() / 6
    myy = ((y * y + y * yn + yn * yn) * cross).sum() / 12
    ymid = y.mean()
    c = (ymid - strips.y_min) / strips.width - i
    s = 1.0 / strips.width
    # theta = 1 - sgn * (c + s (y - ymid)) on one side of the apex
    sgn = 1.0 if c >= 0 else -1.0
    a0 = 1 - sgn * (c - s * ymid)
    a1 = -sgn * s
    return a0 * a0 * area + 2 * a0 * a1 * my + a1 * a1 * myy


@pytest.mark.parametrize("omega", [0.0, math.pi / 6])
def test_theta_sq_against_polygon_clipping(omega):
    m = build_rotated_uniform(MeshSpec(4, omega))
    s = build_strips(m)
    for i in (0, 2, s.L + 1):
        got = V.theta_sq_integrals(m, s, i)
        want = _theta_sq_oracle(m, s, i)
        assert np.abs(got - want).max() < 1e-12


def test_theta_sq_sums_to_area_weighted():
    m = build_rotated_uniform(MeshSpec(4, 0.4))
    s = build_strips(m)
    # sum_i theta_i^2 <= 1, with sum_i theta_i = 1 giving the lower bound 1/2
    tot = sum(V.theta_sq_integrals(m, s, i) for i in s.indices)
    assert np.all(tot <= m.signed_areas() * (1 + 1e-12))
    assert np.all(tot >= 0.5 * m.signed_areas() * (1 - 1e-12))


@pytest.mark.parametrize("n", [4, 8])
@pytest.mark.parametrize("omega", OMEGAS)
def test_identities(hierarchies, n, omega):
    _, fine, h = hierarchies[n, omega]
    s = build_strips(fine)
    for rep in (V.check_derivative_identity(fine, 20, 1), V.check_prop41(h, 20, 1),
                V.check_interpolation_identities(h, 20, 1),
                V.check_partition_identity(fine, s, 20, 1),
                V.check_galerkin(h, 1e-4)):
        assert rep.passed, rep.line()
        assert rep.kind == "identity"


def test_child_gradients_coarse_functions_and_hand_case(hierarchies, rng):
    coarse, fine, h = hierarchies[4, math.pi / 6]
    P = prolongation(h)
    assert V.check_prop41(h, 3, 0, prolong=P).passed
    # a single midpoint hat: one coarse triangle by hand
    v = np.zeros(fine.n_vertices)
    m = int(h.midpoints[~fine.boundary[h.midpoints]][0])
    v[m] = 1.0
    assert np.abs(V.child_gradient_residuals(h, v)).max() < 1e-12


def test_child_gradients_detect_broken_prolongation(hierarchies):
    _, _, h = hierarchies[4, 0.0]
    P = prolongation(h).tolil()
    P[P.shape[0] // 2, 0] = 0.3
    assert not V.check_prop41(h, 0, 0, prolong=P.tocsr()).passed


def test_interp_stability(hierarchies):
    _, _, h8 = hierarchies[8, 0.0]
    rep = V.check_lemma42(h8, 200, 3)
    assert rep.passed and rep.worst <= 4.0
    _, _, h4 = hierarchies[4, math.pi / 6]
    tx, ty = V.interp_dense_bound(h4)
    assert max(tx, ty) <= 4 * (1 + 1e-10)


def test_interp_ratio_one_on_coarse_functions(hierarchies, rng):
    coarse, fine, h = hierarchies[4, math.pi / 4]
    P = prolongation(h)
    fd = DofMap.from_mesh(fine)
    v = fd.to_vertices(P @ rng.standard_normal(P.shape[1]), fine.n_vertices)
    rx, ry = V.interp_ratios(h, v)
    assert rx == pytest.approx(1.0, rel=1e-12) and ry == pytest.approx(1.0, rel=1e-12)


def test_approximation_ratio_stable():
    random_ratio, smooth = [], []
    for n in (4, 8, 16):
        _, h = refine_regular(build_rotated_uniform(MeshSpec(n, math.pi / 6)))
        random_ratio.append(V.check_lemma42(h, 30, 0).extra["approx_ratio"])
        smooth.append(V.smooth_approximation_ratio(h))
    drift = np.abs(np.diff(random_ratio)) / np.array(random_ratio[:-1])
    assert drift.max() < 0.25
    assert all(b <= a * (1 + 1e-12) for a, b in zip(smooth, smooth[1:]))


def test_strip_stability_bounded_across_levels():
    worst = []
    for n in (4, 8, 16):
        fine, h = refine_regular(build_rotated_uniform(MeshSpec(n, math.pi / 4)))
        rep = V.check_lemma56(h, build_strips(fine), 20, 0)
        assert rep.passed
        worst.append(rep.worst)
    assert max(abs(b - a) / a for a, b in zip(worst, worst[1:])) < 0.5


def test_strip_ratios_zero_function(hierarchies):
    _, fine, h = hierarchies[4, 0.0]
    r = V.strip_ratios(fine, build_strips(fine), np.zeros(fine.n_vertices))
    assert np.all(np.isnan(r) | (r == 0))


def test_decomposition_stability(hierarchies):
    _, fine, h = hierarchies[8, math.pi / 6]
    rep = V.check_decomposition_stability(h, build_strips(fine), 50, 0)
    assert rep.passed
    assert 1 / 8 <= rep.extra["l2_min"] <= rep.extra["l2_max"] <= 8
    assert rep.extra["split_err"] < 1e-14


def test_v0_and_projection(hierarchies):
    coarse, fine, h = hierarchies[4, 0.0]
    assert V.check_v0(h).passed
    fd = DofMap.from_mesh(fine)
    v0 = V.build_v0(fine, fd)
    y = fine.vertices[fd.vertices, 1]
    assert np.unique(y[v0 != 0]).size == 1 and y[v0 != 0][0] > 0
    M = assemble_mass(fine, fd)
    P = prolongation(h)
    Q = V.l2_projection(h, M, P)
    vH = np.random.default_rng(0).standard_normal(P.shape[1])
    assert np.abs(Q(P @ vH) - P @ vH).max() < 1e-10
    with pytest.raises(ValueError):
        V.build_v0(hierarchies[4, math.pi / 6][1])
    with pytest.raises(ValueError):
        V.build_v0(jitter_interior(fine, 0.1, 1))


def test_lower_bound_rows():
    rows = V.check_lower_bound(4, (1.0, 1e-4), (2, 3))
    assert [(r.epsilon, r.level) for r in rows] == [(1.0, 2), (1e-4, 2), (1.0, 3), (1e-4, 3)]
    assert all(np.isfinite(r.R_scaled) and r.R_scaled > 0 for r in rows)


def test_report_line_and_pass_rule():
    m = build_rotated_uniform(MeshSpec(2, 0.0))
    assert V._inequality("x", m, 1, 4.0 * (1 + 1e-11), 4.0, 1e-10).passed
    assert not V._inequality("x", m, 1, 4.0 * (1 + 1e-9), 4.0, 1e-10).passed
    assert V._identity("y", m, 1, 0.0, 1e-12).line().startswith("PASS")
