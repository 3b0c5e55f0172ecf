import numpy as np
import pytest

from alsp.dense import SingularMatrixError, TooLargeError, check_dense, dense_cap, dense_lu, lu_solve


def test_identity():
    b = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(lu_solve(dense_lu(np.eye(3)), b), b)


def test_permutation():
    x = lu_solve(dense_lu([[0.0, 1.0], [1.0, 0.0]]), [1.0, 2.0])
    assert np.allclose(x, [2.0, 1.0], atol=0)


@pytest.mark.parametrize("seed", range(5))
def test_residual_bound(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((10, 10))
    b = rng.standard_normal(10)
    f = dense_lu(a)
    x = lu_solve(f, b)
    norm_inf = np.abs(a).sum(axis=1).max()
    assert np.linalg.norm(a @ x - b) <= 1e-10 * (norm_inf * np.linalg.norm(x) + np.linalg.norm(b))
    P, L, U = f.factors()
    assert np.linalg.norm(P @ a - L @ U) <= 1e-10 * np.linalg.norm(a)


def test_singular_reports_index():
    a = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularMatrixError) as info:
        dense_lu(a)
    assert info.value.index in (1, 2)
    assert "pivot" in str(info.value)


def test_dense_cap(monkeypatch):
    monkeypatch.setenv("ALSP_DENSE_CAP", "5")
    assert dense_cap() == 5
    with pytest.raises(TooLargeError, match="cap of 5"):
        check_dense(6)
    check_dense(5)
