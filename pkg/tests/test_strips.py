import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisomg.assembly import DofMap
from anisomg.mesh import Mesh, MeshSpec, build_rotated_uniform, jitter_interior, refine_regular
from anisomg.strips import build_strips, strip_triangles, theta

from .conftest import OMEGAS


@pytest.mark.parametrize("n", [4, 8])
@pytest.mark.parametrize("omega", OMEGAS)
def test_blocks_cover_and_overlap(hierarchies, n, omega):
    _, fine, _ = hierarchies[n, omega]
    dofs = DofMap.from_mesh(fine)
    s = build_strips(fine, dofs)
    count = s.block_count()
    assert count.min() >= 1 and count.max() <= 3
    y = fine.vertices[dofs.vertices, 1]
    w = s.width
    for i, b in enumerate(s.blocks):
        rel = (y[b] - s.y_min) / w
        assert np.all(rel >= i - 2 - 1e-9) and np.all(rel <= i + 2 + 1e-9)
    per_tri = sum(strip_triangles(fine, s.y_min, w, i).astype(int) for i in s.indices)
    assert per_tri.max() <= 4


def test_support_containment(hierarchies):
    _, fine, _ = hierarchies[4, math.pi / 6]
    dofs = DofMap.from_mesh(fine)
    s = build_strips(fine, dofs)
    for i, b in enumerate(s.blocks):
        T = strip_triangles(fine, s.y_min, s.width, i)
        for d in b:
            touching = np.any(fine.triangles == dofs.vertices[d], axis=1)
            assert np.all(T[touching])


def test_axis_aligned_strips_are_rows(hierarchies):
    _, fine, _ = hierarchies[4, 0.0]
    dofs = DofMap.from_mesh(fine)
    s = build_strips(fine, dofs)
    y = fine.vertices[dofs.vertices, 1]
    for b in s.nonempty_blocks():
        rows = np.unique(np.round(y[b], 12))
        for r in rows:
            # every interior DOF of a row present in the block is the whole row
            assert np.count_nonzero(np.isclose(y[b], r)) == np.count_nonzero(np.isclose(y, r))


def test_L_matches_floor(hierarchies):
    _, fine, _ = hierarchies[4, math.pi / 4]
    s = build_strips(fine)
    assert s.L == math.floor((s.y_max - s.y_min) / fine.h_char + 1e-12)


def test_theta_values():
    assert theta(3, 3 * 0.5, 0.0, 0.5) == pytest.approx(1.0)
    assert theta(3, 2 * 0.5, 0.0, 0.5) == 0.0
    assert theta(3, 4 * 0.5, 0.0, 0.5) == 0.0


@given(st.integers(0, 2**31))
def test_partition_of_unity_random(seed):
    coarse = build_rotated_uniform(MeshSpec(4, math.pi / 6))
    s = build_strips(coarse)
    y = np.random.default_rng(seed).uniform(s.y_min, s.y_max, 1000)
    total = sum(s.theta(i, y) for i in s.indices)
    assert np.abs(total - 1).max() < 1e-14
    w = np.random.default_rng(seed).standard_normal(s.dof_y.size)
    assert np.abs(sum(s.split(w)) - w).max() < 1e-14 * np.abs(w).max()


def test_jittered_mesh_fully_covered():
    m, _ = refine_regular(jitter_interior(build_rotated_uniform(MeshSpec(8, 0.0)), 0.3, 7))
    s = build_strips(m)
    assert s.block_count().min() >= 1


def test_bad_width():
    m = build_rotated_uniform(MeshSpec(2, 0.0))
    with pytest.raises(ValueError):
        build_strips(m, strip_width=0.0)
    one = Mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]), np.ones(3, bool), 1.0)
    with pytest.raises(ValueError):
        build_strips(one)


def test_absurdly_thin_strips_rejected():
    m = build_rotated_uniform(MeshSpec(2, 0.0))
    with pytest.raises(ValueError):
        build_strips(m, strip_width=1e-9)
