"""Neural kit tests: forward/backward against independent oracles,
initializers, optimizers, and the checkpoint format."""

import math

import numpy as np
import pytest

from ambimaze.nn import (
    Mlp,
    backward,
    flat_grads,
    forward,
    init_mlp,
    load_mlp,
    make_optimizer,
    optimizer_step,
    orthogonal_init,
    save_mlp,
)


def test_identity_single_layer_passthrough():
    net = Mlp(sizes=[3, 3], activations=["identity"],
              weights=[np.eye(3)], biases=[np.zeros(3)])
    x = np.array([0.5, -1.0, 2.0])
    y, _ = forward(net, x)
    assert np.allclose(y, x)


def test_zero_weights_zero_output():
    for act in ("identity", "relu", "tanh"):
        net = Mlp(sizes=[4, 2], activations=[act],
                  weights=[np.zeros((2, 4))], biases=[np.zeros(2)])
        y, _ = forward(net, np.ones(4))
        assert np.allclose(y, 0.0)


def test_forward_matches_straight_line_evaluation():
    # Fixed 2-2-1 net evaluated by hand, independent of the library code.
    w0 = np.array([[0.3, -0.2], [0.5, 0.1]])
    b0 = np.array([0.1, -0.1])
    w1 = np.array([[1.5, -0.7]])
    b1 = np.array([0.2])
    net = Mlp(sizes=[2, 2, 1], activations=["tanh", "identity"],
              weights=[w0, w1], biases=[b0, b1])
    x = np.array([0.4, -0.9])
    h0 = math.tanh(0.3 * 0.4 + -0.2 * -0.9 + 0.1)
    h1 = math.tanh(0.5 * 0.4 + 0.1 * -0.9 - 0.1)
    expected = 1.5 * h0 - 0.7 * h1 + 0.2
    y, _ = forward(net, x)
    assert y[0] == pytest.approx(expected, rel=1e-12)


def test_forward_dimension_mismatch():
    net = init_mlp([3, 2], seed=0)
    with pytest.raises(ValueError, match="input dim"):
        forward(net, np.ones(4))


def numeric_gradients(net, x, target, h=1e-4):
    """Central finite differences of 0.5*||f(x) - target||^2."""

    def loss():
        y, _ = forward(net, x)
        return 0.5 * float(np.sum((y - target) ** 2))

    grads = []
    for p in net.params:
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = loss()
            flat_p[i] = orig - h
            down = loss()
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return np.linalg.norm(a - b) / denom


@pytest.mark.parametrize("seed", range(8))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = init_mlp([4, 8, 3], "tanh", seed=seed)
    x = rng.standard_normal(4)
    target = rng.standard_normal(3)
    y, cache = forward(net, x)
    grads, _ = backward(net, cache, y - target)
    numeric = numeric_gradients(net, x, target)
    for analytic, expected in zip(flat_grads(grads), numeric):
        assert relative_error(analytic, expected) < 1e-5


def test_backward_zero_gradient_gives_zero():
    net = init_mlp([3, 5, 2], "relu", seed=1)
    y, cache = forward(net, np.ones(3))
    grads, dx = backward(net, cache, np.zeros(2))
    assert all(np.all(g == 0) for g in flat_grads(grads))
    assert np.all(dx == 0)


def test_linear_layer_gradient_is_outer_product():
    net = Mlp(sizes=[3, 2], activations=["identity"],
              weights=[np.zeros((2, 3))], biases=[np.zeros(2)])
    x = np.array([1.0, -2.0, 3.0])
    dy = np.array([0.5, -1.5])
    _, cache = forward(net, x)
    grads, _ = backward(net, cache, dy)
    assert np.allclose(grads[0][0], np.outer(dy, x))
    assert np.allclose(grads[0][1], dy)


def test_batched_backward_consistent_with_singles():
    net = init_mlp([4, 6, 2], "tanh", seed=3)
    rng = np.random.default_rng(3)
    xs = rng.standard_normal((5, 4))
    dys = rng.standard_normal((5, 2))
    y, cache = forward(net, xs)
    grads_batch, _ = backward(net, cache, dys)
    summed = None
    for x, dy in zip(xs, dys):
        _, c = forward(net, x)
        g, _ = backward(net, c, dy)
        flat = flat_grads(g)
        summed = flat if summed is None else [a + b for a, b in zip(summed, flat)]
    for a, b in zip(flat_grads(grads_batch), summed):
        assert np.allclose(a, b)


# --- orthogonal initialization -------------------------------------------------


def test_orthogonal_rows_identity():
    for rows, cols in ((4, 9), (9, 4), (6, 6)):
        m = orthogonal_init(rows, cols, gain=1.7, seed=5)
        if rows <= cols:
            gram = m @ m.T
        else:
            gram = m.T @ m
        assert np.allclose(gram, 1.7**2 * np.eye(min(rows, cols)), atol=1e-6)


def test_orthogonal_zero_gain():
    assert np.all(orthogonal_init(5, 5, gain=0.0, seed=0) == 0.0)


def test_orthogonal_deterministic():
    a = orthogonal_init(7, 3, gain=2.0, seed=9)
    b = orthogonal_init(7, 3, gain=2.0, seed=9)
    assert np.array_equal(a, b)


def power_method_singular_values(m, k, iters=500, seed=0):
    """Top-k singular values via power iteration with deflation on m^T m."""
    rng = np.random.default_rng(seed)
    a = m.T @ m
    values = []
    for _ in range(k):
        v = rng.standard_normal(a.shape[0])
        v /= np.linalg.norm(v)
        for _ in range(iters):
            v = a @ v
            norm = np.linalg.norm(v)
            if norm == 0:
                break
            v /= norm
        lam = float(v @ a @ v)
        values.append(math.sqrt(max(lam, 0.0)))
        a = a - lam * np.outer(v, v)
    return values


def test_singular_values_all_equal_gain():
    gain = 1.3
    m = orthogonal_init(16, 16, gain=gain, seed=2)
    for sigma in power_method_singular_values(m, 16):
        assert sigma == pytest.approx(gain, abs=1e-6)


# --- optimizers -----------------------------------------------------------------


def test_sgd_step():
    p = [np.array([1.0, 2.0])]
    g = [np.array([0.5, -0.5])]
    opt = make_optimizer("sgd", 0.1, p)
    optimizer_step(p, g, opt)
    assert np.allclose(p[0], [0.95, 2.05])


def test_adam_first_step_hand_trace():
    # Single scalar, lr=0.1, grad=0.5: hand-computed update.
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    g = 0.5
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    m_hat = m / (1 - b1)
    v_hat = v / (1 - b2)
    expected = 1.0 - lr * m_hat / (math.sqrt(v_hat) + eps)

    p = [np.array([1.0])]
    opt = make_optimizer("adam", lr, p)
    optimizer_step(p, [np.array([g])], opt)
    assert p[0][0] == pytest.approx(expected, rel=1e-12)


def test_rmsprop_first_step_hand_trace():
    lr, rho, eps = 0.01, 0.99, 1e-8
    g = 2.0
    v = (1 - rho) * g * g
    expected = 1.0 - lr * g / (math.sqrt(v) + eps)
    p = [np.array([1.0])]
    opt = make_optimizer("rmsprop", lr, p)
    optimizer_step(p, [np.array([g])], opt)
    assert p[0][0] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kind", ["sgd", "rmsprop", "adam"])
def test_zero_gradient_leaves_params(kind):
    p = [np.array([1.0, -2.0]), np.array([[3.0]])]
    opt = make_optimizer(kind, 0.1, p)
    optimizer_step(p, [np.zeros(2), np.zeros((1, 1))], opt)
    assert np.allclose(p[0], [1.0, -2.0]) and p[1][0, 0] == 3.0


def test_optimizer_shape_mismatch():
    p = [np.zeros(3)]
    opt = make_optimizer("sgd", 0.1, p)
    with pytest.raises(ValueError):
        optimizer_step(p, [np.zeros(4)], opt)


def test_xor_trains_under_5000_adam_steps():
    xs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    ys = np.array([[0.0], [1.0], [1.0], [0.0]])
    net = init_mlp([2, 8, 1], "tanh", seed=0)
    opt = make_optimizer("adam", 0.01, net.params)
    loss = None
    for step in range(5_000):
        out, cache = forward(net, xs)
        err = out - ys
        loss = float(np.mean(err**2))
        if loss < 0.05:
            break
        grads, _ = backward(net, cache, 2 * err / len(xs))
        optimizer_step(net.params, flat_grads(grads), opt)
    assert loss < 0.05


def test_params_stay_finite_during_training():
    rng = np.random.default_rng(4)
    net = init_mlp([5, 16, 3], "relu", seed=4)
    opt = make_optimizer("adam", 1e-3, net.params)
    for _ in range(500):
        x = rng.standard_normal((8, 5))
        y, cache = forward(net, x)
        grads, _ = backward(net, cache, y / 8)
        optimizer_step(net.params, flat_grads(grads), opt)
    assert all(np.all(np.isfinite(p)) for p in net.params)


# --- checkpoints ----------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    net = init_mlp([4, 7, 2], ["relu", "identity"], seed=6)
    path = tmp_path / "net.bin"
    save_mlp(net, str(path))
    loaded = load_mlp(str(path))
    assert loaded.sizes == net.sizes
    assert loaded.activations == net.activations
    for a, b in zip(loaded.params, net.params):
        assert np.array_equal(a, b.astype(np.float32).astype(np.float64))
    # Saving the loaded net reproduces the same bytes.
    path2 = tmp_path / "net2.bin"
    save_mlp(loaded, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_mlp(str(path))
