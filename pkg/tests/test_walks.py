from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aware.errors import BudgetError, ContractError
from aware.graph import AttributeSchema, graph_from_edges
from aware.model import AwareConfig, AwareParams, forward, init_params
from aware.synthetic import walk_twin_graphs
from aware.verify import SIMPLE, degree_multiset, isomorphic, random_params, twin_graphs_report
from aware.walks import (
    column_product,
    enumerate_walks,
    general_column_product,
    ngram_recursion,
    ngram_reference,
    value_table,
    verify_general_identity,
    verify_vertex_expansion,
    verify_walk_identity,
    walk_count,
    walk_statistics,
    walk_weight,
)
from strategies import graphs


def test_enumeration_examples(path2, triangle):
    assert enumerate_walks(path2, 2) == [(0, 1), (1, 0)]
    assert len(enumerate_walks(triangle, 2)) == 6
    assert len(enumerate_walks(triangle, 3)) == 12
    assert enumerate_walks(graph_from_edges(3, []), 2) == []
    with pytest.raises(ContractError):
        enumerate_walks(path2, 0)


def test_enumeration_budget():
    K6 = graph_from_edges(6, [(i, j) for i in range(6) for j in range(i + 1, 6)])
    with pytest.raises(BudgetError):
        enumerate_walks(K6, 8, budget=1000)


def test_statistics_examples(path2, triangle):
    assert walk_statistics(path2, 2).counts == {((0,), (1,)): 1, ((1,), (0,)): 1}
    assert walk_statistics(triangle, 2).counts == {((0,), (0,)): 6}
    assert walk_statistics(triangle, 3).counts == {((0,), (0,), (0,)): 12}


@settings(max_examples=30)
@given(graphs(max_m=6, max_k=3), st.integers(1, 5))
def test_count_conservation(g, n):
    stats = walk_statistics(g, n, per_vertex=True)
    A = g.adjacency
    expected = np.ones(g.vertex_count) @ np.linalg.matrix_power(A, n - 1) @ np.ones(g.vertex_count)
    assert stats.total() == int(round(expected)) == walk_count(g, n)
    merged = {}
    for per in stats.per_vertex.values():
        for v, k in per.items():
            merged[v] = merged.get(v, 0) + k
    assert merged == stats.counts


def test_column_product_examples():
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(column_product(W, 1), W)
    assert column_product(W, 2).T.tolist() == [[1, 9], [2, 12], [2, 12], [4, 16]]
    schema = AttributeSchema((2,))
    assert np.array_equal(general_column_product(W, np.eye(2), 1.0, schema, 3), column_product(W, 3))
    with pytest.raises(BudgetError):
        column_product(np.ones((2, 10)), 7, budget=10**6)


def test_value_table_multi_attribute():
    schema = AttributeSchema((2, 3))
    W = np.arange(10.0).reshape(2, 5)
    T = value_table(W, schema)
    assert T.shape == (2, 6)
    assert np.array_equal(T[:, 4], W[:, 1] + W[:, 2 + 1])  # u = (1, 1)


def test_walk_weight_examples():
    schema = AttributeSchema((2,))
    cfg = replace(SIMPLE, T=3)
    p = init_params(cfg, schema, 0)
    assert walk_weight(((0,),), p, cfg, schema) == 1.0
    zero = AwareParams(p.W, None, np.zeros_like(p.W_w), None, p.predictor)
    assert walk_weight(((0,), (1,), (0,)), zero, cfg, schema) == pytest.approx(0.25)
    flat = replace(cfg, use_ww=False)
    assert walk_weight(((0,), (1,), (1,)), p, flat, schema) == 1.0
    with pytest.raises(ContractError):
        walk_weight(((0,), (1,)), p, replace(cfg, score_mode="softmax"), schema)


def test_ngram_examples(path2):
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert ngram_reference(path2, W, 2).tolist() == [4, 24]
    assert ngram_recursion(path2, W, 2)[1].tolist() == [4, 24]
    assert ngram_reference(path2, W, 1).tolist() == [3, 7]
    assert not ngram_reference(graph_from_edges(2, [], [0, 1], 0, path2.schema), W, 3).any()


# -- identities on hand-picked cases -----------------------------------------


def test_single_vertex_is_exact():
    g = graph_from_edges(1, [], [1], 0, AttributeSchema((3,)))
    p = random_params(SIMPLE, g.schema, 0)
    assert verify_walk_identity(g, p, SIMPLE, 1) == 0.0
    assert verify_vertex_expansion(g, p, SIMPLE, 1) == 0.0


def test_unit_scores_match_ngram():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)], [0, 1, 1, 2], 0, AttributeSchema((3,)))
    cfg = replace(SIMPLE, use_ww=False)
    p = init_params(cfg, g.schema, 3)
    for n in range(1, 5):
        assert verify_walk_identity(g, p, cfg, n) <= 1e-12
        f_n = forward(g, p, replace(cfg, T=n))[1].f_per_level[n - 1]
        assert np.allclose(f_n, ngram_reference(g, p.W, n), rtol=1e-12)


def test_identity_requires_simplified_setting(path2):
    full = AwareConfig(T=3, r=4, r_prime=4, score_mode="pairwise")
    p = init_params(full, path2.schema, 0)
    with pytest.raises(ContractError):
        verify_walk_identity(path2, p, full, 2)
    with pytest.raises(ContractError):
        verify_vertex_expansion(path2, p, replace(full, score_mode="softmax"), 2)


def test_isolated_vertex_expansion_is_zero():
    g = graph_from_edges(3, [(0, 1)], [0, 1, 1], 0, AttributeSchema((2,)))
    p = random_params(SIMPLE, g.schema, 1)
    _, trace = forward(g, p, SIMPLE)
    assert not trace.F_seq[2][:, 2].any()
    assert verify_vertex_expansion(g, p, SIMPLE, 3) <= 1e-12


def test_general_single_vertex():
    cfg = AwareConfig(T=2, r=4, r_prime=3, L=1, alpha=0.1, score_mode="pairwise")
    g = graph_from_edges(1, [], [[1, 0]], 0, AttributeSchema((2, 2)))
    p = random_params(cfg, g.schema, 2)
    _, trace = forward(g, p, cfg)
    z = p.W_v @ p.W @ g.onehot[:, 0]
    assert np.allclose(trace.F_seq[0][:, 0], np.where(z >= 0, z, 0.1 * z), rtol=1e-15)
    assert verify_general_identity(g, p, cfg, 1) <= 1e-14


@settings(max_examples=25)
@given(graphs(max_m=6, max_k=3), st.integers(0, 10**6), st.integers(1, 4))
def test_identities_hold_on_random_graphs(g, seed, n):
    p = random_params(SIMPLE, g.schema, seed)
    assert verify_walk_identity(g, p, SIMPLE, n) <= 1e-8
    assert verify_vertex_expansion(g, p, SIMPLE, n) <= 1e-8


@settings(max_examples=25)
@given(graphs(max_m=5, max_k=2, C=2), st.integers(0, 10**6), st.integers(1, 3),
       st.sampled_from([0.0, 0.1, 1.0]))
def test_general_identity_on_random_graphs(g, seed, n, alpha):
    cfg = AwareConfig(T=3, r=5, r_prime=4, L=1, alpha=alpha, score_mode="pairwise")
    p = random_params(cfg, g.schema, seed)
    assert verify_general_identity(g, p, cfg, n) <= 1e-8


def test_weight_order_matters_for_asymmetric_scores():
    # graph totals are symmetric under walk reversal, per-vertex columns are not
    g = graph_from_edges(3, [(0, 1), (1, 2)], [0, 1, 2], 0, AttributeSchema((3,)))
    p = random_params(SIMPLE, g.schema, 4)
    assert verify_vertex_expansion(g, p, SIMPLE, 3) <= 1e-12
    q = AwareParams(p.W, None, p.W_w.T.copy(), None, p.predictor)
    F3 = forward(g, p, SIMPLE)[1].F_seq[2]
    F3_t = forward(g, q, SIMPLE)[1].F_seq[2]
    assert not np.allclose(F3, F3_t)


# -- twin graphs ---------------------------------------------------------------


def test_twin_graphs_share_walk_statistics():
    a, b = walk_twin_graphs()
    for n in (1, 2, 3):
        assert walk_statistics(a, n).counts == walk_statistics(b, n).counts
    assert not isomorphic(a, b)
    rep = twin_graphs_report()
    assert rep["residual"] <= 1e-10


def test_isomorphism_oracle():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)], [0, 1, 1, 0], 0, AttributeSchema((2,)))
    assert isomorphic(g, g.permuted([3, 2, 1, 0]))
    h = graph_from_edges(4, [(0, 1), (1, 2), (1, 3)], [0, 1, 1, 0], 0, AttributeSchema((2,)))
    assert not isomorphic(g, h)
    assert degree_multiset(h) == [1, 1, 1, 3]
