import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddstress.core import (
    InvalidArgument,
    SolverConfig,
    StressDataset,
    SymTensorField,
    VectorField,
    build_mesh,
    inner_vector,
    lp_norm_tensor,
    lp_norm_vector,
    rigid_basis,
    vector_mass_matrix,
)
from ddstress.operators import build_operators, sym_grad

from oracles import dense_mass


def test_smallest_mesh():
    m = build_mesh(1, 1, 1.0, 1.0)
    assert m.n_nodes == 4 and m.n_triangles == 2
    np.testing.assert_allclose(m.areas, [0.5, 0.5], rtol=0, atol=1e-15)


def test_mesh_counts():
    m = build_mesh(2, 3, 2.0, 3.0)
    assert m.n_nodes == 12 and m.n_triangles == 12
    assert math.isclose(m.areas.sum(), 6.0, rel_tol=1e-12)


def test_uniform_split():
    m = build_mesh(4, 4)
    np.testing.assert_allclose(m.areas, 1 / 32, rtol=1e-14)


def test_diagonal_orientation():
    m = build_mesh(1, 1)
    # lower-left (0) to upper-right (3) is shared by both triangles
    assert all({0, 3} <= set(t) for t in m.triangles.tolist())


@pytest.mark.parametrize("nx", range(1, 9))
@pytest.mark.parametrize("ny", range(1, 9))
def test_total_area(nx, ny):
    m = build_mesh(nx, ny, 1.7, 0.3)
    assert np.all(m.areas > 0)
    assert abs(m.areas.sum() - 1.7 * 0.3) <= 1e-12 * 1.7 * 0.3
    assert m.triangles.min() == 0 and m.triangles.max() == m.n_nodes - 1


def test_mesh_connected_and_boundary():
    m = build_mesh(3, 2)
    assert len(np.unique(m.triangles)) == m.n_nodes
    assert len(m.boundary_nodes) == 2 * (3 + 2)
    assert len(m.interior_nodes) == 2 * 1


@pytest.mark.parametrize("args", [(0, 1, 1.0, 1.0), (1, -1, 1.0, 1.0), (1, 1, 0.0, 1.0), (1, 1, 1.0, -2.0), (1.5, 1, 1, 1)])
def test_bad_mesh(args):
    with pytest.raises(InvalidArgument):
        build_mesh(*args)


def test_fields_validate():
    m = build_mesh(1, 1)
    with pytest.raises(InvalidArgument):
        VectorField(m, np.zeros((3, 2)))
    with pytest.raises(InvalidArgument):
        SymTensorField(m, np.zeros((3, 3)))
    with pytest.raises(InvalidArgument):
        VectorField(m, [[np.nan, 0]] * 4)
    f = VectorField.zeros(m)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_lp_norm_tensor_trivial():
    m = build_mesh(3, 3)
    assert lp_norm_tensor(SymTensorField.zeros(m), 2) == 0.0
    assert math.isclose(lp_norm_tensor(SymTensorField.constant(m, 1, 1, 0), 2), math.sqrt(2), rel_tol=1e-14)
    assert math.isclose(lp_norm_tensor(SymTensorField.constant(m, 0, 0, 3), math.inf), 3 * math.sqrt(2))


def test_lp_norm_tensor_matches_extended_precision():
    rng = np.random.default_rng(3)
    m = build_mesh(2, 2, 1.3, 0.7)
    s = SymTensorField(m, rng.standard_normal((m.n_triangles, 3)))
    mpmath.mp.dps = 40
    acc = mpmath.mpf(0)
    for a, (xx, yy, xy) in zip(m.areas, s.values):
        fro = mpmath.sqrt(mpmath.mpf(xx) ** 2 + mpmath.mpf(yy) ** 2 + 2 * mpmath.mpf(xy) ** 2)
        acc += mpmath.mpf(a) * fro**3
    expected = float(acc ** (mpmath.mpf(1) / 3))
    assert math.isclose(lp_norm_tensor(s, 3), expected, rel_tol=1e-13)


def test_lp_norm_bad_p():
    m = build_mesh(1, 1)
    with pytest.raises(InvalidArgument):
        lp_norm_tensor(SymTensorField.zeros(m), 0.5)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-1e3, 1e3, allow_nan=False), seed=st.integers(0, 2**32 - 1),
       p=st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]))
def test_norm_homogeneity(alpha, seed, p):
    rng = np.random.default_rng(seed)
    m = build_mesh(3, 2)
    s = SymTensorField(m, rng.standard_normal((m.n_triangles, 3)))
    f = VectorField(m, rng.standard_normal((m.n_nodes, 2)))
    assert math.isclose(lp_norm_tensor(alpha * s, p), abs(alpha) * lp_norm_tensor(s, p), rel_tol=1e-12, abs_tol=1e-300)
    assert math.isclose(lp_norm_vector(alpha * f, p), abs(alpha) * lp_norm_vector(f, p), rel_tol=1e-12, abs_tol=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3))
def test_frobenius_convention(e):
    m = build_mesh(1, 1)
    s = SymTensorField.constant(m, *e)
    full = np.array([[e[0], e[2]], [e[2], e[1]]])
    top = np.abs(full).max() or 1.0
    np.testing.assert_allclose(s.pointwise_norm(), top * np.linalg.norm(full / top, "fro"), rtol=1e-14, atol=0)


def test_inner_vector_trivial():
    m = build_mesh(2, 2)
    z = VectorField.zeros(m)
    one = VectorField.from_function(m, lambda x, y: (1.0, 0.0))
    assert lp_norm_vector(z, 2) == 0.0
    assert inner_vector(z, one) == 0.0
    assert math.isclose(inner_vector(one, one), 1.0, rel_tol=1e-14)


def test_inner_vector_dense_oracle():
    rng = np.random.default_rng(7)
    m = build_mesh(2, 2, 1.5, 1.0)
    f = VectorField(m, rng.standard_normal((m.n_nodes, 2)))
    w = VectorField(m, rng.standard_normal((m.n_nodes, 2)))
    M = dense_mass(m)
    assert math.isclose(inner_vector(f, w), f.flat @ M @ w.flat, rel_tol=1e-12)
    assert math.isclose(inner_vector(f, w), inner_vector(w, f), rel_tol=1e-14)
    np.testing.assert_allclose(vector_mass_matrix(m).toarray(), M, atol=1e-14)
    # the L2 norm is exact for P1 fields
    assert math.isclose(lp_norm_vector(f, 2) ** 2, f.flat @ M @ f.flat, rel_tol=1e-12)


def test_inner_vector_mesh_mismatch():
    a, b = build_mesh(1, 1), build_mesh(1, 1)
    with pytest.raises(InvalidArgument):
        inner_vector(VectorField.zeros(a), VectorField.zeros(b))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_rigid_basis_orthonormal_and_kernel(n):
    m = build_mesh(n, n)
    R = rigid_basis(m)
    gram = np.array([[inner_vector(a, b) for b in R] for a in R])
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)
    bundle = build_operators(m)
    for r in R:
        assert np.abs(sym_grad(bundle, r).values).max() < 1e-12


def test_rigid_span_reproduces_rigid_field():
    m = build_mesh(4, 4, 2.0, 1.0)
    R = rigid_basis(m)
    rng = np.random.default_rng(0)
    a, b1, b2 = rng.standard_normal(3)
    w = VectorField.from_function(m, lambda x, y: (-a * y + b1, a * x + b2))
    proj = sum((inner_vector(w, r) * r for r in R), VectorField.zeros(m))
    np.testing.assert_allclose(proj.values, w.values, atol=1e-12)


def test_dataset_validation():
    with pytest.raises(InvalidArgument):
        StressDataset([[1, 0, 0], [1, 0, 0]])
    with pytest.raises(InvalidArgument):
        StressDataset(np.zeros((0, 3)))
    d = StressDataset([[1, 2, 3], [0, 0, 0]])
    np.testing.assert_array_equal(d.matrices()[0], [[1, 3], [3, 2]])
    assert len(d) == 2


def test_solver_config():
    c = SolverConfig(p=3.0)
    assert abs(1 / c.p + 1 / c.q - 1) <= 1e-15
    for bad in (1.0, 0.5, math.inf):
        with pytest.raises(InvalidArgument):
            SolverConfig(p=bad)
    with pytest.raises(InvalidArgument):
        SolverConfig(tie_tol=-1)
