import json
import math

import numpy as np
import pytest
import scipy.linalg as sla
from conftest import make_system

from alsp.analysis import (
    AnalysisError,
    bb2_condition,
    compute_eta,
    generalized_mu,
    greedy_match,
    index_check,
    index_one,
    iteration_matrix_spectrum,
    lambda1,
    nm_matrix,
    nm_norm,
    nm_norm_closed_form,
    residual_block_decomposition,
    spalbb_condition,
    spalbb_condition_matrix,
    theorem_conditions,
    to_json,
)
from alsp.dense import TooLargeError
from alsp.problems import ProblemSpec, generate
from alsp.spal import gmres_inner, spal_exact, spal_inexact
from alsp.system import ALConfig, QMode

E1 = [[1.0], [0.0]]


def test_eta_toys():
    assert compute_eta(make_system(np.eye(2), E1)) == pytest.approx(1.0, abs=1e-12)
    assert compute_eta(make_system(np.diag([-1.0, 1.0]), E1)) == pytest.approx(-1.0, abs=1e-12)


def test_eta_sampling_oracle():
    s = generate(ProblemSpec("random", n=6, m=2, seed=4)).system
    G, B = s.G.to_dense(), s.B.to_dense()
    H, K = (G + G.T) / 2, B @ B.T
    X = np.random.default_rng(0).standard_normal((6, 20000))
    ratios = np.einsum("ij,ij->j", X, H @ X) / np.einsum("ij,ij->j", X, K @ X)
    eta = compute_eta(s)
    assert eta <= ratios.min() + 1e-12
    assert ratios.min() - eta < 0.5


def test_eta_rejects_indefinite_on_null():
    s = make_system(np.diag([1.0, -1.0]), E1)
    with pytest.raises(AnalysisError, match="Null"):
        compute_eta(s)


def test_mu_matches_qz():
    for seed in range(3):
        s = generate(ProblemSpec("random", n=8, m=4, rank=3, seed=seed)).system
        G, B = s.G.to_dense(), s.B.to_dense()
        alpha, beta = sla.eig(G, B @ B.T, homogeneous_eigvals=True)[0]
        # keep the s eigenvalues farthest from infinity
        w = np.abs(beta) / (np.abs(alpha) + np.abs(beta))
        keep = np.argsort(-w)[:3]
        mu_qz = alpha[keep] / beta[keep]
        err, _ = greedy_match(generalized_mu(s), mu_qz)
        assert err <= 1e-8 * max(1.0, np.abs(mu_qz).max())


def test_spectrum_examples():
    c = iteration_matrix_spectrum(make_system(np.eye(2), E1), ALConfig(omega=1.0))
    assert np.allclose(np.sort(c.eigenvalues.real), [0, 0, 0.5], atol=1e-14)
    assert c.rho_T == pytest.approx(0.5) and c.v_T == pytest.approx(0.5)
    c = iteration_matrix_spectrum(make_system(np.eye(2), np.eye(2)), ALConfig(omega=1.0))
    assert np.allclose(np.sort(c.eigenvalues.real), [0, 0, 0.5, 0.5], atol=1e-14)
    c = iteration_matrix_spectrum(make_system(np.eye(2), [[1.0, 1.0], [0.0, 0.0]]), ALConfig(omega=1.0))
    assert np.sum(np.abs(c.eigenvalues - 1) < 1e-10) == 1
    assert c.matches


@pytest.mark.parametrize("seed", range(6))
def test_spectrum_law(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    rank = int(rng.integers(1, m + 1))
    s = generate(ProblemSpec("random", n=12, m=m, rank=rank, seed=seed)).system
    c = iteration_matrix_spectrum(s, ALConfig(omega=float(rng.uniform(0.1, 3.0))))
    assert c.s_rank == rank
    assert c.matches
    assert np.allclose(np.sort_complex(c.mu), np.sort_complex(c.mu_from_T), rtol=1e-6)


def test_index():
    assert index_check(make_system(np.eye(2), E1), ALConfig())
    assert index_check(make_system(np.eye(2), [[1.0, 1.0], [0.0, 0.0]]), ALConfig())
    assert index_one(np.eye(3))
    assert not index_one(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_nm_norm_toy():
    toy = make_system(np.eye(2), E1)
    cfg = ALConfig(omega=1.0, beta=1.0)
    X = nm_matrix(toy, cfg)
    assert np.allclose(X[2], [0.5, 0.0, 0.5], atol=1e-15)
    assert not np.any(X[:2])
    assert nm_norm(toy, cfg) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_nm_norm_empty_block():
    s = generate(ProblemSpec("bb1")).system
    assert nm_norm(s, ALConfig()) == 0.0


@pytest.mark.parametrize("q", [QMode.identity(), QMode.diagonal([0.3, 1.0, 4.0])])
@pytest.mark.parametrize("beta", [0.1, 1.0, 3.0])
def test_nm_norm_closed_form(q, beta):
    s = generate(ProblemSpec("random", n=7, m=3, seed=2)).system
    cfg = ALConfig(omega=0.6, q=q, beta=beta)
    assert abs(nm_norm(s, cfg) - nm_norm_closed_form(s, cfg)) <= 1e-10


def test_nm_norm_below_one():
    s = generate(ProblemSpec("random", n=10, m=4, seed=6)).system
    beta = 1.0
    lam = lambda1(s, ALConfig(omega=1.0))
    omega = 0.9 * math.sqrt(lam / beta)
    if omega ** 2 * beta >= lambda1(s, ALConfig(omega=omega)):
        omega *= 0.5
    assert nm_norm(s, ALConfig(omega=omega, beta=beta)) < 1


def test_nm_norm_reduced_rank_deficient(stokes4):
    cfg = ALConfig(omega=0.1)
    assert nm_norm(stokes4.system, cfg) == pytest.approx(1.0, abs=1e-10)
    assert nm_norm(stokes4.system, cfg, reduced=True) < 1


def test_nm_norm_monotone_in_delta():
    s = generate(ProblemSpec("random", n=10, m=4, seed=1)).system
    vals = [nm_norm(s, ALConfig(omega=0.5), beta=d) for d in (0.01, 0.1, 0.3)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_rho_monotone_in_omega(stokes4):
    rhos = [iteration_matrix_spectrum(stokes4.system, ALConfig(omega=w)).v_T for w in (1e-3, 1e-2, 1e-1, 1.0, 10.0)]
    assert all(b >= a - 1e-10 for a, b in zip(rhos, rhos[1:]))


def test_theorem_conditions_toys(stokes4):
    r = theorem_conditions(make_system(np.eye(2), E1), ALConfig(omega=1.0, beta=1.0))
    assert r.eta == pytest.approx(1.0)
    assert r.omega_max_exact == math.inf
    assert r.delta_max_inexact == pytest.approx((1 - math.sqrt(0.5)) / 2, abs=1e-10)
    assert r.rho_T == pytest.approx(0.5)
    r = theorem_conditions(make_system(np.diag([-1.0, 1.0]), E1), ALConfig(omega=0.25))
    assert r.omega_max_exact == pytest.approx(0.5)
    assert r.exact_converges
    r = theorem_conditions(stokes4.system, ALConfig(omega=0.1))
    assert r.omega_max_exact == math.inf
    assert not r.full_rank and r.index_le_1 and r.v_T < 1 and r.exact_converges


def test_divergence_beyond_omega_max():
    s = make_system(np.diag([-1.0, 1.0]), E1, [1.0, 1.0], [0.0])
    r = theorem_conditions(s, ALConfig(omega=0.8))
    assert r.rho_T > 1 and not r.exact_converges
    _, rep = spal_exact(s, ALConfig(omega=0.8, maxit=500))
    assert not rep.converged


def test_q_structure_flag(stokes4):
    q = QMode.diagonal(np.linspace(1, 2, 16))
    r = theorem_conditions(stokes4.system, ALConfig(omega=0.1, q=q))
    assert r.q_structure == "structure unverified"


def test_bb2_condition_examples():
    r = bb2_condition(np.eye(3))
    assert r.condition_holds and max(abs(t) for t in r.theta) <= 1e-15
    r = bb2_condition([[2.0, 0.1], [-0.1, 2.0]])
    assert r.w_min == pytest.approx(2.005) and r.ratio == pytest.approx(2.005)
    assert r.condition_holds and all(t < 1 for t in r.theta)
    r = bb2_condition([[1.0, 2.0], [-2.0, 1.0]])
    assert r.ratio == pytest.approx(5.0) and r.w_min == pytest.approx(5.0) and r.condition_holds
    with pytest.raises(AnalysisError):
        bb2_condition([[-1.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("seed", range(10))
def test_bb2_condition_theta(seed):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((5, 5))
    K = rng.standard_normal((5, 5))
    A = 3 * np.eye(5) + 0.3 * F @ F.T + 0.3 * (K - K.T)
    r = bb2_condition(A)
    assert r.condition_holds == (r.ratio < 2 * r.w_min)
    if r.condition_holds:
        assert all(t < 1 for t in r.theta)


@pytest.mark.parametrize("w", [0.5, 1.0, 2.0])
def test_spalbb_condition_two_by_two(w):
    assert spalbb_condition_matrix([[1.0, 1.0], [-1.0, w]]).holds


def test_spalbb_condition_scaled_identity(stokes4):
    r = spalbb_condition_matrix(2 * np.eye(3))
    assert r.lhs == pytest.approx(2.0) and r.rhs == pytest.approx(4.0) and r.holds
    r = spalbb_condition(stokes4.system, ALConfig(omega=1e-3))
    assert np.isfinite(r.lhs) and np.isfinite(r.rhs)


def test_block_decomposition_full_rank():
    s = generate(ProblemSpec("random", n=6, m=3, seed=1)).system
    rep = residual_block_decomposition(s, [np.ones(9)])
    assert rep.s == 3 and rep.residual_null_component == [0.0]


def test_block_decomposition_stokes(stokes4):
    s = stokes4.system
    res = []
    spal_inexact(s, ALConfig(omega=0.1, delta=0.2), gmres_inner(), callback=lambda k, z, r: res.append(r))
    rep = residual_block_decomposition(s, res)
    r0 = np.linalg.norm(res[0])
    assert rep.s == 15 and not rep.rank_ambiguous
    assert max(rep.residual_null_component[1:]) <= 1e-10 * r0
    assert len(rep.residual_range_component) == len(rep.residual_null_component)


def test_block_decomposition_inconsistent(stokes4):
    s = stokes4.system
    v = np.ones(s.m) / np.sqrt(s.m)
    bad = s.with_rhs(s.f, s.g + 0.3 * v)
    res = []
    spal_exact(bad, ALConfig(omega=0.1, maxit=15), callback=lambda k, z, r: res.append(r))
    rep = residual_block_decomposition(bad, res)
    assert np.allclose(rep.residual_null_component, 0.3, rtol=1e-10)


def test_dense_cap_refusal(monkeypatch, stokes8):
    monkeypatch.setenv("ALSP_DENSE_CAP", "100")
    with pytest.raises(TooLargeError, match="100"):
        compute_eta(stokes8.system)


def test_json_encoding():
    r = theorem_conditions(make_system(np.eye(2), E1), ALConfig())
    data = json.loads(to_json(r))
    assert data["omega_max_exact"] == "inf"
    assert data["mu_list"] == [[1.0, 0.0]]
