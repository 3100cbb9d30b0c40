import numpy as np
import pytest

from ris_detnet.neural import (Mlp, OptimizerState, clip_global_norm,
                               optimizer_step, softmax)


def finite_diff_grads(net, loss_fn, h=1e-5):
    """Central-difference gradient oracle over every parameter entry."""
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn()
            p[idx] = orig - h
            dn = loss_fn()
            p[idx] = orig
            g[idx] = (up - dn) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


# ------------------------------------------------------------- forward

def test_forward_zero_weights_returns_bias():
    rng = np.random.default_rng(0)
    net = Mlp([3, 4, 2], rng)
    for w in net.weights:
        w[:] = 0.0
    net.biases[-1][:] = [1.5, -2.0]
    out, _ = net.forward(np.zeros(3))
    assert np.allclose(out[0], [1.5, -2.0])


def test_forward_single_linear_layer_hand_case():
    rng = np.random.default_rng(0)
    net = Mlp([2, 2], rng)
    net.weights[0][:] = [[1.0, 2.0], [3.0, 4.0]]
    net.biases[0][:] = [0.5, -0.5]
    out, _ = net.forward(np.array([1.0, -1.0]))
    assert np.allclose(out[0], [1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5])


def test_forward_deterministic():
    net = Mlp([4, 8, 3], np.random.default_rng(5))
    x = np.random.default_rng(1).normal(size=4)
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    assert np.array_equal(a, b)


def test_forward_rejects_bad_width():
    net = Mlp([4, 3], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.zeros(5))


def test_actor_head_outputs():
    net = Mlp([5, 16, 8], np.random.default_rng(2), head="actor", n_discrete=4)
    (params, probs), _ = net.forward(np.random.default_rng(3).normal(size=(6, 5)))
    assert params.shape == (6, 4) and probs.shape == (6, 4)
    assert np.all((params > 0) & (params < 1))
    assert np.all(probs > 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_softmax_extreme_logits_stable():
    p = softmax(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.allclose(p.sum(), 1.0)
    assert np.all(np.isfinite(p))


# ------------------------------------------------------------- backward

def test_backward_matches_finite_differences_identity_head():
    rng = np.random.default_rng(7)
    net = Mlp([4, 6, 5, 3], rng)
    x = rng.normal(size=(5, 4))
    target = rng.normal(size=(5, 3))

    def loss_fn():
        out, _ = net.forward(x)
        return 0.5 * float(np.sum((out - target) ** 2))

    out, cache = net.forward(x)
    analytic, _ = net.backward(cache, out - target)
    numeric = finite_diff_grads(net, loss_fn)
    assert max_rel_err(analytic, numeric) < 1e-4


def test_backward_matches_finite_differences_actor_head():
    rng = np.random.default_rng(8)
    net = Mlp([4, 10, 6], rng, head="actor", n_discrete=3)
    x = rng.normal(size=(4, 4))
    wp = rng.normal(size=(4, 3))
    wq = rng.normal(size=(4, 3))

    def loss_fn():
        (params, probs), _ = net.forward(x)
        return float(np.sum(wp * params) + np.sum(wq * probs))

    (_, _), cache = net.forward(x)
    analytic, _ = net.backward(cache, (wp, wq))
    numeric = finite_diff_grads(net, loss_fn)
    assert max_rel_err(analytic, numeric) < 1e-4


def test_backward_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    net = Mlp([3, 7, 2], rng)
    x0 = rng.normal(size=3)
    w = rng.normal(size=2)
    out, cache = net.forward(x0)
    _, grad_in = net.backward(cache, np.atleast_2d(w))
    h = 1e-6
    for i in range(3):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        up = float(np.dot(net.forward(xp)[0][0], w))
        dn = float(np.dot(net.forward(xm)[0][0], w))
        assert grad_in[0, i] == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-8)


def test_backward_zero_gradient():
    net = Mlp([3, 5, 2], np.random.default_rng(1))
    out, cache = net.forward(np.ones(3))
    grads, grad_in = net.backward(cache, np.zeros_like(out))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(grad_in == 0)


def test_backward_linear_layer_outer_product():
    net = Mlp([2, 2], np.random.default_rng(0))
    x = np.array([0.3, -1.2])
    g = np.array([[2.0, -1.0]])
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, g)
    assert np.allclose(grads[0], g.T @ np.atleast_2d(x))   # dL/dW = g x^T
    assert np.allclose(grads[1], g[0])                     # dL/db = g


# ------------------------------------------------------------- optimizer

def test_plain_sgd_mode_is_literal_update():
    net = Mlp([2, 2], np.random.default_rng(0))
    before = [p.copy() for p in net.parameters()]
    grads = [np.ones_like(p) for p in net.parameters()]
    opt = OptimizerState(lr=0.1, beta1=0.0, beta2=0.0)
    optimizer_step(net.parameters(), grads, opt)
    for b, p in zip(before, net.parameters()):
        assert np.allclose(p, b - 0.1, atol=1e-15)


def test_zero_gradient_leaves_params_unchanged():
    net = Mlp([3, 3], np.random.default_rng(2))
    before = [p.copy() for p in net.parameters()]
    zeros = [np.zeros_like(p) for p in net.parameters()]
    opt = OptimizerState(lr=0.5)
    optimizer_step(net.parameters(), zeros, opt)
    optimizer_step(net.parameters(), zeros, opt)
    for b, p in zip(before, net.parameters()):
        assert np.array_equal(b, p)


def test_adam_converges_on_quadratic():
    w = [np.array([3.0, -4.0, 2.0])]
    opt = OptimizerState(lr=0.1)
    f0 = float(np.sum(w[0] ** 2))
    for _ in range(200):
        optimizer_step(w, [2.0 * w[0]], opt)
    assert float(np.sum(w[0] ** 2)) < f0 / 100.0


def test_parameter_count_invariant_under_steps():
    net = Mlp([4, 6, 2], np.random.default_rng(3))
    shapes = [p.shape for p in net.parameters()]
    opt = OptimizerState(lr=0.01)
    for _ in range(5):
        grads = [np.ones_like(p) for p in net.parameters()]
        optimizer_step(net.parameters(), grads, opt)
    assert [p.shape for p in net.parameters()] == shapes


def test_clip_global_norm():
    grads = [np.array([3.0, 4.0])]     # norm 5
    clipped = clip_global_norm(grads, 1.0)
    assert np.allclose(clipped[0], [0.6, 0.8])
    small = [np.array([0.1, 0.1])]
    assert clip_global_norm(small, 10.0)[0] is small[0]


# ------------------------------------------------------------- persistence

def test_blob_round_trip():
    net = Mlp([3, 5, 4], np.random.default_rng(4), head="actor", n_discrete=2)
    twin = Mlp.from_blob(net.to_blob())
    x = np.random.default_rng(5).normal(size=3)
    a, _ = net.forward(x)
    b, _ = twin.forward(x)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    opt = OptimizerState(lr=0.01)
    optimizer_step(net.parameters(), [np.ones_like(p) for p in net.parameters()], opt)
    opt2 = OptimizerState.from_blob(opt.to_blob())
    assert opt2.step_count == 1
    assert np.allclose(opt2.m[0], opt.m[0])
