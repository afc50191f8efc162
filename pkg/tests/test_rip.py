import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aware.errors import ContractError
from aware.rip import (
    b_ratio_experiment,
    b_ratio_vectors,
    estimate_rip_constant,
    exact_rip_constant,
    fold_to_domain,
    index_tuples,
    omp_recover,
    product_matrix,
    random_weighted_counts,
    recovery_rate,
    rip_sweep,
    sample_embedding_matrix,
)


def test_embedding_matrix_entries():
    W = sample_embedding_matrix(64, 6, "rademacher", seed=0)
    assert np.allclose(np.abs(W), 1 / 8)
    assert np.allclose(np.linalg.norm(W, axis=0), 1.0)
    assert np.array_equal(W, sample_embedding_matrix(64, 6, "rademacher", seed=0))
    G = sample_embedding_matrix(4000, 3, "gaussian", seed=1)
    assert np.allclose(np.linalg.norm(G, axis=0), 1.0, atol=0.05)
    with pytest.raises(ContractError):
        sample_embedding_matrix(4, 2, "uniform")


def test_index_tuples_counts():
    assert len(index_tuples(6, 2, "full")) == 36
    assert len(index_tuples(6, 2, "multiset")) == 21
    assert len(index_tuples(6, 2, "distinct")) == 15
    assert index_tuples(3, 2, "distinct") == [(0, 1), (0, 2), (1, 2)]


def test_product_matrix_unit_columns():
    W = sample_embedding_matrix(32, 5, seed=2)
    for domain in ("full", "multiset", "distinct"):
        M = product_matrix(W, 2, domain)
        assert np.allclose(np.linalg.norm(M, axis=0), 1.0)


def test_full_domain_duplicates_columns():
    W = sample_embedding_matrix(16, 3, seed=3)
    M = product_matrix(W, 2, "full")
    assert np.array_equal(M[:, 1], M[:, 3])  # (0, 1) and (1, 0)
    # Rademacher squares are the constant column, shared by every (a, a)
    assert np.allclose(M[:, 0], M[:, 4])
    assert exact_rip_constant(M, 2) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20)
@given(st.integers(0, 1000))
def test_fold_preserves_products(seed):
    rng = np.random.default_rng(seed)
    W = sample_embedding_matrix(8, 4, seed=seed)
    x = rng.standard_normal(16)
    full = product_matrix(W, 2, "full") @ x
    assert np.allclose(full, product_matrix(W, 2, "multiset") @ fold_to_domain(x, 4, 2, "multiset"))
    assert np.array_equal(fold_to_domain(x, 4, 2, "full"), x)


def test_rip_identity_and_orthonormal():
    assert estimate_rip_constant(np.eye(10), 3, trials=50).measured_epsilon == pytest.approx(0.0, abs=1e-15)
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((12, 5)))
    assert estimate_rip_constant(Q, 1, trials=50).measured_epsilon == pytest.approx(0.0, abs=1e-14)
    assert exact_rip_constant(Q, 3) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ContractError):
        estimate_rip_constant(np.eye(3), 4)


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_sampled_constant_is_a_lower_bound(seed, s):
    M = product_matrix(sample_embedding_matrix(16, 5, seed=seed), 2, "distinct")
    sampled = estimate_rip_constant(M, s, trials=100, seed=seed).measured_epsilon
    assert sampled <= exact_rip_constant(M, s) + 1e-12


def test_exact_constant_by_brute_force():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((6, 5)) / np.sqrt(6)
    worst = 0.0
    for S in itertools.combinations(range(5), 2):
        sv = np.linalg.svd(M[:, S], compute_uv=False)
        worst = max(worst, sv[0] - 1, 1 - sv[-1])
    assert exact_rip_constant(M, 2) == pytest.approx(worst, abs=1e-12)


# -- OMP ---------------------------------------------------------------------


def test_omp_identity():
    x = np.zeros(10)
    x[[1, 4, 7]] = [2.0, -1.0, 0.5]
    res = omp_recover(np.eye(10), x, 3, x_true=x)
    assert res.support_correct and res.relative_l2_error == 0.0
    assert res.support == (1, 4, 7)


def test_omp_zero_signal():
    res = omp_recover(np.eye(4), np.zeros(4), 0, x_true=np.zeros(4))
    assert res.support_correct and not res.x.any() and res.iterations == 0
    assert omp_recover(np.eye(4), np.zeros(4), 2).iterations == 0


def test_omp_rank_deficient_selection():
    # y has a part outside the column span, so the second pick duplicates the first
    M = np.array([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(np.linalg.LinAlgError):
        omp_recover(M, np.array([1.0, 0.5]), 2)


def test_omp_on_walk_products():
    M = product_matrix(sample_embedding_matrix(1024, 6, seed=5), 2, "distinct")
    x = random_weighted_counts(np.random.default_rng(5), M.shape[1], 4)
    res = omp_recover(M, M @ x, 4, x_true=x)
    assert res.support_correct and res.relative_l2_error <= 1e-6


def test_omp_matches_sklearn():
    sk = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(6)
    for t in range(10):
        M = rng.standard_normal((40, 60))
        M /= np.linalg.norm(M, axis=0)
        x = np.zeros(60)
        x[rng.choice(60, 5, replace=False)] = rng.standard_normal(5)
        ours = omp_recover(M, M @ x, 5).x
        theirs = sk.orthogonal_mp(M, M @ x, n_nonzero_coefs=5)
        assert np.allclose(ours, theirs, atol=1e-10)


def test_recovery_rate_is_high_at_large_r():
    assert recovery_rate(1024, 6, 2, 4, trials=20) >= 0.95


def test_rip_sweep_rows():
    rows = rip_sweep(rs=(64, 256), matrices=3, vectors=30, recovery_trials=5)
    assert [r["r"] for r in rows] == [64, 256]
    assert set(rows[0]) == {"family", "r", "K", "n", "s", "trials", "measured_epsilon", "recovery_rate"}
    assert rows == rip_sweep(rs=(64, 256), matrices=3, vectors=30, recovery_trials=5)


# -- B-ratio -----------------------------------------------------------------


def test_b_ratio_example():
    res = b_ratio_experiment(2, 50, 10.0, 0.1)
    assert res.B0 == pytest.approx(10.0, abs=1e-12)
    assert res.Bmin_upper == pytest.approx(2.00240, abs=1e-5)
    assert res.ratio == pytest.approx(0.200240, abs=1e-6)
    expected = math.sqrt(2 / 50 + (1 - 2 / 50) * (0.1 / 10) ** 2)
    assert abs(res.ratio - expected) <= 1e-9 and abs(res.bound - expected) <= 1e-9


def test_b_ratio_edge_cases():
    same = b_ratio_experiment(3, 10, 2.0, 2.0)
    assert same.ratio == pytest.approx(1.0) and same.bound == pytest.approx(1.0)
    full = b_ratio_experiment(5, 5, 10.0, 0.01)
    assert full.bound == pytest.approx(1.0)
    for bad in ((0, 5, 1, 1), (6, 5, 1, 1), (2, 5, -1, 1), (2, 5, 1, 0)):
        with pytest.raises(ContractError):
            b_ratio_experiment(*bad)


@given(st.integers(1, 200), st.integers(1, 200), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3),
       st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_b_ratio_closed_form_matches_vectors(rho, s, U, u, b, c):
    rho = min(rho, s)
    closed = b_ratio_experiment(rho, s, U, u, b, c)
    direct = b_ratio_vectors(rho, s, U, u, b, c)
    assert closed.ratio <= closed.bound * (1 + 1e-12)
    assert closed.B0 == pytest.approx(direct.B0, rel=1e-12)
    assert closed.Bmin_upper == pytest.approx(direct.Bmin_upper, rel=1e-12)
