import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cigmatch import tensor as T
from oracles import dense_gcn, numeric_grad, rel_error


def leaf(rng, *shape):
    return T.Tensor(rng.normal(size=shape), requires_grad=True)


def check_grads(build, leaves, coords=None):
    """Compare backward() against central differences for every leaf."""
    loss = build()
    for p in leaves:
        p.zero_grad()
    loss = build()
    loss.backward()
    for p in leaves:
        want = numeric_grad(lambda: build().item(), p.data, coords=coords)
        got = p.grad if coords is None else p.grad.reshape(-1)[coords]
        if coords is not None:
            want = want.reshape(-1)[coords]
        assert rel_error(got, want) < 1e-4, f"{p.name or p.shape}: {rel_error(got, want)}"


def weighted(out, r):
    # a generic scalar readout so every output entry gets a distinct upstream gradient
    return T.sum_all(T.hadamard(out, T.Tensor(r)))


OPS = {
    "matmul": (lambda a, b: T.matmul(a, b), [(3, 4), (4, 2)]),
    "add": (lambda a, b: T.add(a, b), [(3, 4), (3, 4)]),
    "add_bias": (lambda a, b: T.add(a, b), [(3, 4), (4,)]),
    "hadamard": (lambda a, b: T.hadamard(a, b), [(3, 4), (3, 4)]),
    "abs_diff": (lambda a, b: T.abs_diff(a, b), [(3, 4), (3, 4)]),
    "scale": (lambda a: T.scale(a, -1.7), [(3, 4)]),
    "relu": (lambda a: T.relu(a), [(3, 4)]),
    "sigmoid": (lambda a: T.sigmoid(a), [(3, 4)]),
    "concat0": (lambda a, b: T.concat([a, b], axis=0), [(2, 3), (1, 3)]),
    "concat1": (lambda a, b: T.concat([a, b], axis=1), [(2, 3), (2, 2)]),
    "mean_rows": (lambda a: T.mean_rows(a), [(5, 3)]),
    "add_n": (lambda a, b: T.add_n([a, b, a]), [(2, 2), (2, 2)]),
    "conv1d": (lambda s, w, b: T.conv1d(s, w, b), [(6, 4), (3, 4, 5), (5,)]),
    "maxpool_time": (lambda a: T.maxpool_time(a), [(6, 4)]),
    "gcn_layer": (lambda h, w: T.gcn_layer(h, T.normalize_adjacency(np.array([[0, 0.5, 0], [0.5, 0, 1], [0, 1, 0]])), w), [(3, 4), (4, 2)]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name, rng):
    fn, shapes = OPS[name]
    leaves = [leaf(rng, *s) for s in shapes]
    out_shape = fn(*leaves).shape
    r = rng.normal(size=out_shape)
    check_grads(lambda: weighted(fn(*leaves), r), leaves)


@pytest.mark.parametrize("target", [0.0, 1.0])
def test_bce_gradient(target, rng):
    z = leaf(rng, 1, 1)
    check_grads(lambda: T.bce_with_logits(z, target), [z])


def test_bce_is_stable_and_correct():
    assert T.bce_with_logits(T.Tensor([[800.0]]), 1.0).item() == 0.0
    assert T.bce_with_logits(T.Tensor([[0.0]]), 1.0).item() == pytest.approx(np.log(2))
    assert T.bce_with_logits(T.Tensor([[-800.0]]), 1.0).item() == pytest.approx(800.0)


def test_dropout_gradient_uses_the_same_mask(rng):
    a = leaf(rng, 4, 5)
    mask_rng_state = np.random.default_rng(0)
    out = T.dropout(a, 0.5, True, mask_rng_state)
    T.sum_all(out).backward()
    np.testing.assert_allclose(a.grad, out.data / a.data)


def test_dropout_identity_cases(rng):
    a = leaf(rng, 2, 3)
    assert T.dropout(a, 0.3, False) is a
    assert T.dropout(a, 0.0, True, rng) is a
    with pytest.raises(ValueError):
        T.dropout(a, 1.0, True, rng)


def test_examples():
    x = T.Tensor([[1.0, -2.0]])
    assert not T.abs_diff(x, x).data.any()
    np.testing.assert_array_equal(T.relu(T.Tensor([-1.0, 2.0])).data, [0.0, 2.0])
    assert T.conv1d(np.ones((7, 2)), np.ones((3, 2, 4))).shape == (7, 4)


def test_backward_examples():
    w = T.Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    T.sum_all(w).backward()
    np.testing.assert_array_equal(w.grad, np.ones((2, 3)))
    w = T.Tensor(-np.ones((2, 2)), requires_grad=True)
    T.sum_all(T.relu(w)).backward()
    np.testing.assert_array_equal(w.grad, np.zeros((2, 2)))


def test_backward_twice_is_a_state_error():
    w = T.Tensor(np.ones(3), requires_grad=True)
    loss = T.sum_all(w)
    loss.backward()
    with pytest.raises(T.GraphStateError):
        loss.backward()


def test_backward_needs_scalar():
    with pytest.raises(T.ShapeError):
        T.Tensor(np.ones(2), requires_grad=True).backward()


@pytest.mark.parametrize(
    "call",
    [
        lambda: T.matmul(np.ones((2, 3)), np.ones((2, 3))),
        lambda: T.add(np.ones((2, 3)), np.ones((3, 2))),
        lambda: T.hadamard(np.ones(2), np.ones(3)),
        lambda: T.concat([np.ones((2, 2)), np.ones((3, 3))], axis=1),
        lambda: T.conv1d(np.ones((4, 3)), np.ones((3, 2, 1))),
    ],
)
def test_shape_errors_name_the_op(call):
    with pytest.raises(T.ShapeError) as info:
        call()
    assert str(info.value).split(":")[0] in {"matmul", "add", "hadamard", "concat", "conv1d"}


def test_nan_guard():
    with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
        T.scale(T.Tensor([1e308]), 1e10)


@given(hnp.arrays(np.float64, (3, 3), elements=st.floats(-50, 50)))
def test_ops_stay_finite(x):
    for out in (T.sigmoid(x), T.relu(x), T.abs_diff(x, -x), T.mean_rows(x)):
        assert np.isfinite(out.data).all()


def test_normalize_adjacency_examples():
    np.testing.assert_array_equal(T.normalize_adjacency(np.zeros((3, 3))), np.eye(3))
    np.testing.assert_allclose(T.normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]])), [[0.5, 0.5], [0.5, 0.5]])


@given(hnp.arrays(np.float64, (5, 5), elements=st.floats(0, 1)))
def test_normalize_adjacency_symmetric(m):
    a = np.triu(m, 1) + np.triu(m, 1).T
    out = T.normalize_adjacency(a)
    assert (out == out.T).all()


def test_gcn_layer_examples(rng):
    h, w = rng.normal(size=(1, 3)), rng.normal(size=(3, 2))
    np.testing.assert_allclose(T.gcn_layer(h, [[1.0]], w).data, np.maximum(h @ w, 0))
    h3 = rng.normal(size=(3, 3))
    np.testing.assert_allclose(T.gcn_layer(h3, np.eye(3), np.eye(3), T.identity).data, h3)
    adj = np.array([[0, 0.4, 0], [0.4, 0, 0.9], [0, 0.9, 0]])
    w = rng.normal(size=(3, 4))
    np.testing.assert_allclose(T.gcn_layer(h3, T.normalize_adjacency(adj), w).data, dense_gcn(h3, adj, w), atol=1e-12)


def test_lr_schedule():
    assert T.lr_schedule(0) == 0.0
    assert T.lr_schedule(1000) == 0.001
    assert T.lr_schedule(5000) == 0.001
    assert T.lr_schedule(999) >= 0.999 * 0.001 * (1 - 1e-3)
    steps = [T.lr_schedule(t) for t in range(0, 1001, 50)]
    assert steps == sorted(steps)


def test_clip_global_norm():
    g = [np.array([6.0, 0.0]), np.array([0.0, 8.0])]
    assert T.clip_global_norm(g, 5.0) == pytest.approx(10.0)
    np.testing.assert_allclose(g[0], [3.0, 0.0])
    np.testing.assert_allclose(g[1], [0.0, 4.0])
    small = [np.array([1.0])]
    T.clip_global_norm(small, 5.0)
    assert small[0][0] == 1.0


def test_l2_decay_adds_to_gradient():
    p = T.Tensor(np.array([2.0]), requires_grad=True)
    T.l2_decay({"p": p}, 0.5)
    assert p.grad[0] == 1.0


def test_adam_first_step_moves_by_lr():
    p = T.Tensor(np.array([1.0, -1.0]), requires_grad=True)
    p.grad = np.array([0.3, -2.0])
    state = T.AdamState()
    T.adam_step({"p": p}, state, 0.01)
    np.testing.assert_allclose(p.data, [0.99, -0.99], atol=1e-7)
    assert (state.beta1, state.beta2, state.eps, state.step) == (0.8, 0.999, 1e-8, 1)


@pytest.mark.parametrize("binary", [True, False])
def test_checkpoint_round_trip(tmp_path, rng, binary):
    params = {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=(2,)), "s": np.array(np.pi)}
    path = tmp_path / "ck"
    T.save_params(path, params, {"note": "x"}, binary=binary)
    loaded, meta = T.load_params(path)
    assert meta["note"] == "x"
    for k, v in params.items():
        assert loaded[k].shape == v.shape
        assert loaded[k].tobytes() == v.astype(np.float64).tobytes()


def test_checkpoint_accepts_tensors(tmp_path):
    T.save_params(tmp_path / "t", {"w": T.Tensor(np.ones(2))})
    assert T.load_params(tmp_path / "t")[0]["w"].tolist() == [1.0, 1.0]


@pytest.mark.parametrize("content", [b"CIGMPRM\x00\x07", b"garbage", b'{"format": "other"}'])
def test_checkpoint_rejects_bad_files(tmp_path, content):
    path = tmp_path / "bad"
    path.write_bytes(content)
    with pytest.raises(T.CheckpointError):
        T.load_params(path)
