"""Analytic gradients vs central finite differences for every layer and the full nets."""

import numpy as np
import pytest

from diffsafe.nn import ArchDescriptor, Tensor, init_denoiser, loss_and_grads
from diffsafe.nn.tensor import (
    affine,
    avg_pool1d_2,
    concat,
    conv1d,
    mean_all,
    sigmoid,
    silu,
    square,
    tanh,
    transpose,
    upsample1d_2,
)

RTOL = 1e-4


def rel_err(a, b):
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return np.max(np.abs(a - b) / denom)


def check_grads(f, arrays, h=1e-5):
    """Compare f's analytic gradients against central differences on every input."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = f(*tensors)
    out.backward()
    for t, a in zip(tensors, arrays):
        num = np.zeros_like(a)
        flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f(*[Tensor(x) for x in arrays]).data)
            flat[i] = orig - h
            dn = float(f(*[Tensor(x) for x in arrays]).data)
            flat[i] = orig
            num.reshape(-1)[i] = (up - dn) / (2 * h)
        assert t.grad is not None
        assert rel_err(t.grad, num) < RTOL, f"gradient mismatch: {rel_err(t.grad, num):.2e}"


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_affine_grads(rng):
    x = rng.normal(size=(4, 5))
    w = rng.normal(size=(5, 3))
    b = rng.normal(size=(3,))
    check_grads(lambda x, w, b: mean_all(square(affine(x, w, b))), [x, w, b])


@pytest.mark.parametrize("fn", [silu, tanh, sigmoid])
def test_nonlinearity_grads(rng, fn):
    x = rng.normal(size=(3, 7))
    check_grads(lambda x: mean_all(square(fn(x))), [x])


def test_conv1d_grads(rng):
    x = rng.normal(size=(2, 3, 6))
    w = rng.normal(size=(4, 3, 3))
    b = rng.normal(size=(4,))
    check_grads(lambda x, w, b: mean_all(square(conv1d(x, w, b, pad=1))), [x, w, b])


def test_conv1d_1x1_grads(rng):
    x = rng.normal(size=(2, 4, 5))
    w = rng.normal(size=(2, 4, 1))
    b = rng.normal(size=(2,))
    check_grads(lambda x, w, b: mean_all(square(conv1d(x, w, b, pad=0))), [x, w, b])


@pytest.mark.parametrize("t_len", [6, 7])
def test_pool_and_upsample_grads(rng, t_len):
    x = rng.normal(size=(2, 3, t_len))
    check_grads(lambda x: mean_all(square(avg_pool1d_2(x))), [x])
    y = rng.normal(size=(2, 3, 4))
    check_grads(lambda y: mean_all(square(upsample1d_2(y, t_len))), [y])


def test_concat_transpose_broadcast_grads(rng):
    a = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(2, 2, 4))
    c = rng.normal(size=(2, 5, 1))

    def f(a, b, c):
        h = concat([a, b], axis=1)
        h = h + c  # broadcast over the last axis
        return mean_all(square(transpose(h, (0, 2, 1))))

    check_grads(f, [a, b, c])


def test_film_style_modulation_grads(rng):
    from diffsafe.nn.tensor import reshape

    x = rng.normal(size=(2, 4, 5))
    scale = rng.normal(size=(2, 4))
    shift = rng.normal(size=(2, 4))

    def f(x, scale, shift):
        h = x * reshape(scale, (2, 4, 1)) + reshape(shift, (2, 4, 1))
        return mean_all(square(h))

    check_grads(f, [x, scale, shift])


@pytest.mark.parametrize("kind,t_pred", [("mlp", 5), ("unet", 6), ("unet", 5)])
def test_composed_denoiser_gradients_match_finite_differences(kind, t_pred):
    """Every parameter of the full network, at widths <= 8, against central differences."""
    desc = ArchDescriptor(
        kind=kind, t_pred=t_pred, cond_dim=6, base_width=4, pe_dim=4, cond_embed_dim=4, mlp_width=8, mlp_layers=3
    )
    rng = np.random.default_rng(3)
    w = init_denoiser(desc, rng)
    B = 2
    clean = rng.normal(size=(B, t_pred, 3))
    k = np.array([2, 5])
    noise = rng.normal(size=(B, t_pred, 3))
    cond = rng.normal(size=(B, 6))
    ab = np.linspace(1.0, 0.01, 8)

    _, grads = loss_and_grads(w, clean, k, noise, cond, ab)

    h = 1e-5
    for name in w.params:
        p = w.params[name]
        num = np.zeros_like(p)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _g = _loss_only(w, clean, k, noise, cond, ab)
            flat[i] = orig - h
            dn, _g = _loss_only(w, clean, k, noise, cond, ab)
            flat[i] = orig
            num.reshape(-1)[i] = (up - dn) / (2 * h)
        err = rel_err(grads[name], num)
        assert err < RTOL, f"{name}: rel err {err:.2e}"


def _loss_only(w, clean, k, noise, cond, ab):
    from diffsafe.nn.denoiser import _forward
    from diffsafe.nn.tensor import no_grad

    abk = ab[k]
    noisy = np.sqrt(abk)[:, None, None] * clean + np.sqrt(1 - abk)[:, None, None] * noise
    with no_grad():
        pred = _forward(w, {n: Tensor(v) for n, v in w.params.items()}, Tensor(noisy), k, Tensor(cond))
    return float(np.mean((pred.data - noise) ** 2)), None
