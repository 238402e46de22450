"""Reverse-mode autodiff: finite-difference checks per primitive."""
import numpy as np
import pytest
from scipy.special import erf

from jobshopls.nn import autodiff as ad


def fd_grad(fn, x, eps=1e-6):
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = fn(x)
        flat[i] = keep - eps
        lo = fn(x)
        flat[i] = keep
        gf[i] = (hi - lo) / (2 * eps)
    return g


def check(build, shape, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)

    def scalar(arr):
        return float(build(ad.constant(arr.copy())).data)

    t = ad.parameter(x.copy())
    out = build(t)
    out.backward()
    fd = fd_grad(scalar, x.copy())
    err = np.abs(t.grad - fd).max()
    scale = max(np.abs(fd).max(), 1.0)
    assert err / scale < tol, err


def test_elementwise_chain():
    check(lambda t: ad.tsum(ad.mul(t, ad.gelu(t))), (4, 3))


def test_matmul_and_division():
    w = ad.constant(np.random.default_rng(1).standard_normal((3, 2)))
    check(lambda t: ad.tsum(ad.div(ad.matmul(t, w),
                                   ad.constant(np.array(3.0)))), (5, 3))


def test_gelu_matches_exact_formula():
    x = np.linspace(-4, 4, 41)
    got = ad.gelu(ad.constant(x)).data
    want = 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))
    assert np.allclose(got, want, atol=0, rtol=1e-12)


def test_mean_max_and_gather():
    def build(t):
        picked = ad.rows(t, np.array([0, 2, 2]))
        return ad.add(ad.tsum(ad.amax(picked, axis=0)),
                      ad.tmean(t))
    check(build, (4, 3))


def test_sqrt_and_reshape():
    check(lambda t: ad.tsum(ad.sqrt(ad.add(ad.mul(t, t),
                                           ad.constant(np.array(1.0))))), (6,))


def test_concat_splits_gradient():
    def build(t):
        c = ad.concat([t, ad.mul(t, t)], axis=1)
        return ad.tsum(ad.gelu(c))
    check(build, (3, 2))


def test_huber_quadratic_and_linear_zones():
    x = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    h = ad.huber(ad.constant(x), kappa=1.0).data
    want = np.where(np.abs(x) <= 1.0, 0.5 * x * x, np.abs(x) - 0.5)
    assert np.allclose(h, want)
    check(lambda t: ad.tsum(ad.huber(t, kappa=1.0)), (7,), seed=3)


def test_broadcasting_unbroadcasts_gradients():
    b = ad.parameter(np.random.default_rng(2).standard_normal(3))
    x = ad.constant(np.random.default_rng(3).standard_normal((4, 3)))
    out = ad.tsum(ad.mul(ad.add(x, b), ad.add(x, b)))
    out.backward()
    assert b.grad.shape == (3,)
    fd = fd_grad(lambda arr: float(np.sum((x.data + arr) ** 2)), b.data.copy())
    assert np.allclose(b.grad, fd, atol=1e-5)


def test_fused_layer_norm_matches_manual():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 6))
    scale = rng.standard_normal(6)
    shift = rng.standard_normal(6)
    out = ad.layer_norm(ad.constant(x), ad.constant(scale), ad.constant(shift)).data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    want = (x - mu) / np.sqrt(var + 1e-5) * scale + shift
    assert np.allclose(out, want, atol=1e-12)

    def build(t):
        return ad.tsum(ad.mul(ad.layer_norm(t, ad.constant(scale),
                                            ad.constant(shift)),
                              ad.constant(np.arange(24.0).reshape(4, 6))))
    check(build, (4, 6), seed=6, tol=1e-5)


def test_layer_norm_parameter_gradients():
    rng = np.random.default_rng(7)
    x = ad.constant(rng.standard_normal((3, 5)))
    scale = ad.parameter(rng.standard_normal(5))
    shift = ad.parameter(rng.standard_normal(5))
    ad.tsum(ad.gelu(ad.layer_norm(x, scale, shift))).backward()

    def f(arrs):
        s, b = arrs
        mu = x.data.mean(axis=-1, keepdims=True)
        var = x.data.var(axis=-1, keepdims=True)
        y = (x.data - mu) / np.sqrt(var + 1e-5) * s + b
        return float(np.sum(0.5 * y * (1 + erf(y / np.sqrt(2)))))

    for tensor, idx in ((scale, 0), (shift, 1)):
        fd = fd_grad(lambda arr: f((arr, shift.data) if idx == 0
                                   else (scale.data, arr)),
                     tensor.data.copy())
        assert np.allclose(tensor.grad, fd, atol=1e-5)


def test_fused_mlp_matches_composition():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((5, 4))
    w1, b1 = rng.standard_normal((4, 6)), rng.standard_normal(6)
    w2, b2 = rng.standard_normal((6, 3)), rng.standard_normal(3)
    fused = ad.mlp(ad.constant(x), ad.constant(w1), ad.constant(b1),
                   ad.constant(w2), ad.constant(b2)).data
    manual = ad.linear(ad.gelu(ad.linear(ad.constant(x), ad.constant(w1),
                                         ad.constant(b1))),
                       ad.constant(w2), ad.constant(b2)).data
    assert np.allclose(fused, manual, atol=1e-12)


def test_permute_rows_gradient():
    perm = np.array([2, 0, 3, 1])
    check(lambda t: ad.tsum(ad.mul(ad.permute_rows(t, perm),
                                   ad.constant(np.arange(8.0).reshape(4, 2)))),
          (4, 2), seed=9)


def test_no_grad_suppresses_graph():
    x = ad.parameter(np.ones(3))
    with ad.no_grad():
        y = ad.tsum(ad.mul(x, x))
    assert not y.requires_grad
    y2 = ad.tsum(ad.mul(x, x))
    y2.backward()
    assert np.allclose(x.grad, 2 * np.ones(3))


def test_backward_accumulates_across_reuse():
    x = ad.parameter(np.array([1.5]))
    y = ad.add(ad.mul(x, x), ad.mul(x, x))  # 2x^2
    ad.tsum(y).backward()
    assert np.allclose(x.grad, [6.0])


def test_amax_routes_gradient_to_first_maximum():
    x = ad.parameter(np.array([[1.0, 3.0, 3.0]]))
    ad.tsum(ad.amax(x, axis=1)).backward()
    assert np.array_equal(x.grad, [[0.0, 1.0, 0.0]])
