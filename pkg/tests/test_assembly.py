import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisomg.assembly import (DofMap, ProblemConfig, assemble_mass, assemble_stiffness,
                              delta_E_y, directional_seminorms, dx_from_edges,
                              element_gradients, energy_norm, mass_full)
from anisomg.mesh import Mesh, MeshError, MeshSpec, build_rotated_uniform

from .conftest import OMEGAS


def _interior_node(m):
    """An interior vertex whose neighbours are all interior."""
    return int(np.flatnonzero(np.all(np.abs(m.vertices) < 0.6, axis=1))[0])


def test_five_point_stencil():
    m = build_rotated_uniform(MeshSpec(8, 0.0))
    dofs = DofMap.from_mesh(m)
    for eps in (1.0, 0.3):
        A = assemble_stiffness(m, ProblemConfig(eps), dofs).toarray()
        v = _interior_node(m)
        row = A[dofs.index[v]]
        assert row[dofs.index[v]] == pytest.approx(2 * (1 + eps))
        x, y = m.vertices[v]
        s = 0.25
        for (dx, dy), want in {(s, 0): -1.0, (-s, 0): -1.0, (0, s): -eps, (0, -s): -eps,
                               (s, s): 0.0, (-s, -s): 0.0}.items():
            nb = int(np.argmin(np.hypot(m.vertices[:, 0] - x - dx, m.vertices[:, 1] - y - dy)))
            assert row[dofs.index[nb]] == pytest.approx(want, abs=1e-14)
        assert np.count_nonzero(np.abs(row) > 1e-14) == 5


def test_laplacian_rotation_invariant():
    a = build_rotated_uniform(MeshSpec(4, 0.0))
    b = build_rotated_uniform(MeshSpec(4, math.pi / 6))
    Aa = assemble_stiffness(a, ProblemConfig(1.0)).toarray()
    Ab = assemble_stiffness(b, ProblemConfig(1.0)).toarray()
    # same vertex numbering, so the relabelling is the identity
    assert np.abs(Aa - Ab).max() < 1e-12


def test_symmetric_positive_definite():
    for w in OMEGAS:
        m = build_rotated_uniform(MeshSpec(8, w))
        for eps in (1.0, 1e-6):
            A = assemble_stiffness(m, ProblemConfig(eps)).toarray()
            assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
            assert np.linalg.eigvalsh(A).min() > 0
        M = assemble_mass(m).toarray()
        assert np.abs(M - M.T).max() <= 1e-15
        assert np.linalg.eigvalsh(M).min() > 0


def test_mass_row_sums_total_area():
    m = build_rotated_uniform(MeshSpec(4, 0.3))
    assert mass_full(m).sum() == pytest.approx(4.0, rel=1e-14)


def test_reference_element_mass():
    m = Mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]), np.ones(3, bool), 1.0)
    M = mass_full(m).toarray()
    assert np.allclose(np.diag(M), 1 / 12) and M[0, 1] == pytest.approx(1 / 24)


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        ProblemConfig(0.0)


def test_degenerate_triangle_rejected():
    m = Mesh(np.array([[0.0, 0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]), np.ones(3, bool), 1.0)
    with pytest.raises(MeshError):
        element_gradients(m)
    with pytest.raises(MeshError):
        delta_E_y(m.vertices, 0)


def test_delta_reference_triangle():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert delta_E_y(tri, 1) == pytest.approx(1.0)


_tri = st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6)


@given(_tri, st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_derivative_identity_random_triangles(coords, values):
    p = np.array(coords).reshape(3, 2)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if abs(area) < 1e-3:
        return
    if area < 0:
        p = p[[0, 2, 1]]
    assert sum(delta_E_y(p, e) for e in range(3)) == pytest.approx(0.0, abs=1e-12)
    m = Mesh(p, np.array([[0, 1, 2]]), np.ones(3, bool), 1.0)
    g, _ = element_gradients(m)
    dx = float(g[0, :, 0] @ np.array(values))
    scale = np.abs(g[0, :, 0] * values).sum() + 1e-300
    assert abs(dx_from_edges(p, values) - dx) <= 1e-12 * scale


def test_energy_norm():
    assert energy_norm(np.eye(2), np.zeros(2)) == 0.0
    assert energy_norm(np.eye(2), np.array([3.0, 4.0])) == pytest.approx(5.0)
    m = build_rotated_uniform(MeshSpec(4, 0.2))
    A = assemble_stiffness(m, ProblemConfig(1e-3))
    v = np.random.default_rng(0).standard_normal(A.shape[0])
    assert energy_norm(A, v) ** 2 == pytest.approx(v @ A.toarray() @ v, rel=1e-12)
    with pytest.raises(ValueError):
        energy_norm(-np.eye(2), np.ones(2))


def test_directional_seminorms_sum_to_energy():
    m = build_rotated_uniform(MeshSpec(4, math.pi / 4))
    dofs = DofMap.from_mesh(m)
    u = np.random.default_rng(1).standard_normal(dofs.n)
    gx, gy = directional_seminorms(m, dofs.to_vertices(u))
    A = assemble_stiffness(m, ProblemConfig(0.01), dofs)
    assert gx + 0.01 * gy == pytest.approx(u @ (A @ u), rel=1e-12)
