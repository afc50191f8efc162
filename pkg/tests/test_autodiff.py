import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aware import autodiff as ad
from aware.errors import ContractError, NonFiniteError, ShapeError


def grad_error(f, params, **kw):
    return ad.finite_diff_check(f, params, **kw)


def rand(rng, *shape):
    return rng.standard_normal(shape)


# -- forward values ----------------------------------------------------------


def test_matmul_example():
    out = ad.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
    assert out.value.tolist() == [[3.0], [7.0]]


def test_hadamard_example():
    out = ad.hadamard(np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]]))
    assert out.value.tolist() == [[3.0, -2.0]]


def test_leaky_relu_example():
    out = ad.leaky_relu(np.array([[-2.0, 0.0, 3.0]]), 0.1)
    assert np.allclose(out.value, [[-0.2, 0.0, 3.0]])
    with pytest.raises(ContractError):
        ad.leaky_relu(np.ones((1, 1)), 1.5)


def test_softmax_example():
    z = np.array([[np.log(2.0)], [0.0]])
    s = ad.masked_column_softmax(z, np.ones((2, 1)))
    assert np.allclose(s.value.ravel(), [2 / 3, 1 / 3], atol=1e-15)


def test_softmax_empty_column_is_zero():
    s = ad.masked_column_softmax(np.ones((2, 2)), np.array([[1, 0], [1, 0]]))
    assert s.value[:, 1].tolist() == [0.0, 0.0]
    assert np.allclose(s.value[:, 0], 0.5)


def test_softmax_does_not_overflow():
    s = ad.masked_column_softmax(np.array([[1000.0], [0.0]]), np.ones((2, 1)))
    assert np.allclose(s.value.ravel(), [1.0, 0.0])


def test_shape_errors():
    with pytest.raises(ShapeError):
        ad.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ad.hadamard(np.ones((2, 3)), np.ones((3, 2)))
    with pytest.raises(ShapeError):
        ad.add(np.ones((2, 3)), np.ones((3, 3)))


def test_losses_known_values():
    assert ad.logistic_loss(np.zeros((1, 1)), [1]).value[0, 0] == pytest.approx(np.log(2))
    assert ad.logistic_loss(np.array([[10.0]]), [1]).value[0, 0] == pytest.approx(4.5398899e-5, rel=1e-6)
    ce = ad.cross_entropy(np.zeros((3, 2)), [0, 2]).value[0, 0]
    assert ce == pytest.approx(np.log(3))
    assert ad.squared_error(np.array([[1.0, 3.0]]), [0.0, 1.0]).value[0, 0] == pytest.approx(2.5)
    with pytest.raises(ContractError):
        ad.logistic_loss(np.zeros((1, 1)), [0])


# -- gradients against central differences ----------------------------------


UNARY = {
    "sigmoid": ad.sigmoid,
    "leaky_relu": lambda x: ad.leaky_relu(x, 0.1),
    "transpose": ad.transpose,
    "row_sum": ad.row_sum,
    "scale": lambda x: ad.scale(x, -1.7),
    "softmax": lambda x: ad.masked_column_softmax(x, np.array([[1, 0, 1], [1, 1, 0], [0, 1, 1]])),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    rng = np.random.default_rng(0)
    x = rand(rng, 3, 3) + 0.05  # keep clear of the leaky-relu kink
    weights = rand(rng, *UNARY[name](x).shape)
    err = grad_error(lambda P: ad.total(ad.hadamard(UNARY[name](P["x"]), weights)), {"x": x})
    assert err <= 1e-7


def test_binary_gradients():
    rng = np.random.default_rng(1)
    a, b, c = rand(rng, 3, 4), rand(rng, 4, 2), rand(rng, 3, 4)
    row = rand(rng, 1, 4)

    def f(P):
        m = ad.matmul(P["a"], P["b"])
        h = ad.hadamard(P["a"], P["c"])
        s = ad.add(h, P["row"])
        return ad.add(ad.total(ad.sigmoid(m)), ad.total(ad.column_dot(s, P["c"])))

    assert grad_error(f, {"a": a, "b": b, "c": c, "row": row}) <= 1e-7


def test_column_ops_gradients():
    rng = np.random.default_rng(2)
    x, s = rand(rng, 3, 5), rand(rng, 1, 4)
    idx = np.array([0, 2, 2, 4])

    def f(P):
        t = ad.take_columns(P["x"], idx)
        return ad.total(ad.sigmoid(ad.scale_columns(t, P["s"])))

    assert grad_error(f, {"x": x, "s": s}) <= 1e-6


def test_vstack_and_losses_gradients():
    rng = np.random.default_rng(3)
    a, b = rand(rng, 2, 3), rand(rng, 1, 3)

    def f(P):
        z = ad.vstack([P["a"], P["b"]])
        return ad.add(ad.add(ad.cross_entropy(z, [0, 2, 1]), ad.logistic_loss(P["b"], [1, -1, 1])),
                      ad.squared_error(P["a"], np.ones((2, 3))))

    assert grad_error(f, {"a": a, "b": b}) <= 1e-7


def test_edge_softmax_gradient():
    rng = np.random.default_rng(4)
    dst = np.array([0, 0, 1, 2, 2, 2])
    z = rand(rng, 1, 6)
    w = rand(rng, 1, 6)
    assert grad_error(lambda P: ad.total(ad.hadamard(ad.edge_softmax(P["z"], dst, 3), w)), {"z": z}) <= 1e-7


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_quadratic_gradient(a, b, c):
    x = np.array([[a, b, c]])
    Q = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]])
    tape = ad.Tape()
    v = tape.param("x", x)
    loss = ad.matmul(ad.matmul(v, Q), ad.transpose(v))
    g = ad.backward(loss, tape)["x"]
    assert np.allclose(g, x @ (Q + Q.T), atol=1e-12)
    assert grad_error(lambda P: ad.matmul(ad.matmul(P["x"], Q), ad.transpose(P["x"])), {"x": x}) <= 1e-7


def test_constant_function_has_zero_error():
    assert grad_error(lambda P: ad.scale(ad.total(P["x"]), 0.0), {"x": np.ones((2, 2))}) == 0.0


# -- dual routes for grouped softmax -----------------------------------------


@given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5)),
       arrays(np.int8, (4, 4), elements=st.integers(0, 1)))
def test_edge_softmax_matches_dense(Z, mask):
    src, dst = np.nonzero(mask)
    dense = ad.masked_column_softmax(Z, mask).value
    sparse = ad.edge_softmax(Z[src, dst][None, :], dst, 4).value.ravel()
    assert np.allclose(dense[src, dst], sparse, atol=1e-14)
    assert np.allclose(dense[mask == 0], 0.0)


def test_edge_softmax_gradient_matches_dense():
    rng = np.random.default_rng(5)
    mask = (rng.random((5, 5)) < 0.5).astype(float)
    src, dst = np.nonzero(mask)
    Z, W = rand(rng, 5, 5), rand(rng, 5, 5)
    t1 = ad.Tape()
    z1 = t1.param("z", Z)
    g_dense = ad.backward(ad.total(ad.hadamard(ad.masked_column_softmax(z1, mask), W)), t1)["z"]
    t2 = ad.Tape()
    z2 = t2.param("z", Z[src, dst][None, :])
    g_edge = ad.backward(ad.total(ad.hadamard(ad.edge_softmax(z2, dst, 5), W[src, dst][None, :])), t2)["z"]
    assert np.allclose(g_dense[src, dst], g_edge.ravel(), atol=1e-14)
    assert np.allclose(g_dense[mask == 0], 0.0)


# -- tape contracts ----------------------------------------------------------


def test_backward_needs_scalar():
    tape = ad.Tape()
    x = tape.param("x", np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.backward(ad.sigmoid(x), tape)


def test_unreachable_leaf_gets_zeros():
    tape = ad.Tape()
    x = tape.param("x", np.ones((2, 2)))
    tape.param("unused", np.ones((3, 1)))
    g = ad.backward(ad.total(x), tape)
    assert g["unused"].tolist() == [[0.0], [0.0], [0.0]]
    assert np.array_equal(g["x"], np.ones((2, 2)))


def test_duplicate_leaf_rejected():
    tape = ad.Tape()
    tape.param("x", np.ones(1))
    with pytest.raises(ContractError):
        tape.param("x", np.ones(1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_raises():
    with pytest.raises(NonFiniteError):
        ad.matmul(np.array([[1e308]]), np.array([[10.0]]))


def test_untracked_ops_build_no_tape():
    out = ad.sigmoid(np.zeros((2, 2)))
    assert not out.tracked


# -- Adam ----------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    p = {"w": np.array([[1.0, -2.0]])}
    new, state = ad.adam_step(p, {"w": np.zeros((1, 2))}, ad.AdamState(lr=0.1))
    assert np.array_equal(new["w"], p["w"])
    assert state.step_count == 1


def test_adam_first_step_is_signed_lr():
    p = {"w": np.array([[1.0, -2.0, 0.5]])}
    g = {"w": np.array([[3.0, -0.01, 250.0]])}
    new, _ = ad.adam_step(p, g, ad.AdamState(lr=0.01))
    assert np.allclose(new["w"] - p["w"], -0.01 * np.sign(g["w"]), atol=1e-8)


def test_adam_leaves_inputs_untouched_and_is_deterministic():
    p = {"w": np.array([[1.0, 2.0]])}
    g = {"w": np.array([[0.5, -0.5]])}
    a, sa = ad.adam_step(p, g, ad.AdamState())
    b, sb = ad.adam_step(p, g, ad.AdamState())
    assert p["w"].tolist() == [[1.0, 2.0]]
    assert np.array_equal(a["w"], b["w"])
    assert np.array_equal(sa.first_moment["w"], sb.first_moment["w"])


def test_adam_matches_torch():
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(7)
    w0 = rng.standard_normal((3, 2))
    grads = [rng.standard_normal((3, 2)) for _ in range(5)]
    t = torch.tensor(w0.copy(), requires_grad=True)
    opt = torch.optim.Adam([t], lr=1e-2, betas=(0.9, 0.999), eps=1e-8)
    state = ad.AdamState(lr=1e-2)
    p = {"w": w0}
    for g in grads:
        opt.zero_grad()
        t.grad = torch.tensor(g)
        opt.step()
        p, state = ad.adam_step(p, {"w": g}, state)
    assert np.allclose(p["w"], t.detach().numpy(), atol=1e-12)
