import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import make_system

from alsp.problems import ProblemSpec, generate
from alsp.sparse import DimensionError
from alsp.system import (
    ALConfig,
    QMode,
    ShiftedOperator,
    SplitOperator,
    WeightedNorm,
    apply_A,
    apply_M,
    apply_N,
    residual,
)


def scalar_system():
    return make_system([[2.0]], [[3.0]], [0.0], [0.0])


def test_apply_A_scalar():
    s = scalar_system()
    assert np.array_equal(apply_A(s, [1.0, 1.0]), [5.0, -3.0])
    assert np.array_equal(apply_A(s, [0.0, 0.0]), [0.0, 0.0])


def test_apply_A_matches_dense():
    p = generate(ProblemSpec("random", n=7, m=4, seed=2))
    z = np.random.default_rng(0).standard_normal(11)
    assert np.max(np.abs(apply_A(p.system, z) - p.system.dense_A() @ z)) <= 1e-14 * np.linalg.norm(z) * 10


def test_apply_M_N_scalar():
    s = scalar_system()
    M = ShiftedOperator(s, 0.5, QMode.identity())
    N = SplitOperator(s, 0.5)
    assert np.allclose(apply_M(M, [1.0, 1.0]), [5.0, -2.5], atol=0)
    assert np.allclose(apply_N(N, [1.0, 1.0]), [0.0, 0.5], atol=0)
    assert np.array_equal(apply_N(N, [4.0, 0.0]), [0.0, 0.0])


def test_dense_forms_agree():
    p = generate(ProblemSpec("random", n=6, m=3, seed=5))
    q = QMode.diagonal([1.0, 2.0, 0.5])
    M = ShiftedOperator(p.system, 0.3, q)
    z = np.random.default_rng(3).standard_normal(9)
    assert np.allclose(M.dense() @ z, M.apply(z), rtol=1e-14, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.booleans())
def test_splitting_identity(seed, omega, diag_q):
    rng = np.random.default_rng(seed)
    p = generate(ProblemSpec("random", n=8, m=3, rank=2, seed=seed % 50))
    q = QMode.diagonal(rng.uniform(0.5, 2.0, 3)) if diag_q else QMode.identity()
    z = rng.standard_normal(11)
    lhs = ShiftedOperator(p.system, omega, q).apply(z) - SplitOperator(p.system, omega, q).apply(z)
    rhs = apply_A(p.system, z)
    scale = np.linalg.norm(ShiftedOperator(p.system, omega, q).apply(z)) + np.linalg.norm(rhs)
    assert np.linalg.norm(lhs - rhs) <= 1e-14 * scale


def test_residual_at_reference(stokes4):
    r = residual(stokes4.system, stokes4.reference_solution)
    assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(stokes4.system.rhs)


def norms():
    q = QMode.diagonal([0.5, 2.0, 3.0])
    return [
        WeightedNorm.euclidean(),
        WeightedNorm.p_beta(0.7, QMode.identity(), 2),
        WeightedNorm.p_beta(2.0, q, 2),
    ]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100))
def test_norm_axioms(seed, c):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    for nrm in norms():
        assert nrm(np.zeros(5)) == 0
        assert nrm(x) > 0
        assert nrm(c * x) == pytest.approx(abs(c) * nrm(x), rel=1e-12, abs=1e-300)
        assert nrm(x + y) <= nrm(x) + nrm(y) + 1e-12


def test_q_norm_axioms():
    nrm = WeightedNorm.q_norm(QMode.diagonal([4.0, 1.0]))
    assert nrm([1.0, 0.0]) == pytest.approx(2.0)
    assert nrm([0.0, 0.0]) == 0.0


def test_matrix_norm_matches_definition():
    nrm = WeightedNorm.p_beta(3.0, QMode.diagonal([2.0]), 2)
    a = np.random.default_rng(1).standard_normal((3, 3))
    w = np.sqrt(nrm.weights(3))
    assert nrm.matrix_norm(a) == pytest.approx(np.linalg.norm(np.diag(w) @ a @ np.diag(1 / w), 2))


def test_config_validation():
    with pytest.raises(ValueError):
        ALConfig(omega=0)
    with pytest.raises(ValueError):
        ALConfig(delta=1.0)
    with pytest.raises(ValueError):
        QMode.diagonal([1.0, 0.0])
    with pytest.raises(ValueError):
        ALConfig(tol=0)


def test_system_dimension_checks():
    with pytest.raises(DimensionError):
        make_system(np.eye(2), [[1.0], [0.0]], [1.0], [0.0])
    with pytest.raises(DimensionError):
        make_system(np.eye(1), [[1.0, 2.0]])
    s = make_system(np.eye(2), [[1.0], [0.0]])
    with pytest.raises(DimensionError):
        apply_A(s, np.ones(2))
