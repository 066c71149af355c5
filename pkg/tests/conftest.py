"""Shared oracles: central finite differences and brute-force AUROC."""

import numpy as np
import pytest

from sgatrain.network import NetworkParams, NetworkSpec, forward_cached, init_params

FD_H = 1e-6
KINK_MARGIN = 1e-4


def perturb_param(params, layer, which, index, delta):
    layers = [(w.copy(), b.copy()) for w, b in params.layers]
    w, b = layers[layer]
    if which == "w":
        w[index] += delta
    else:
        b[index] += delta
    return NetworkParams(layers, params.spec)


def fd_param_grads(loss_fn, params, h=FD_H):
    """Central finite differences of a scalar loss over every parameter."""
    grads = []
    for li, (w, b) in enumerate(params.layers):
        gw = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            up = loss_fn(perturb_param(params, li, "w", idx, h))
            down = loss_fn(perturb_param(params, li, "w", idx, -h))
            gw[idx] = (up - down) / (2 * h)
        gb = np.zeros_like(b)
        for idx in np.ndindex(*b.shape):
            up = loss_fn(perturb_param(params, li, "b", idx, h))
            down = loss_fn(perturb_param(params, li, "b", idx, -h))
            gb[idx] = (up - down) / (2 * h)
        grads.append((gw, gb))
    return grads


def fd_input_grad(loss_fn, x, h=FD_H):
    """Central finite differences of a scalar loss over the input coords."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        up = x.copy()
        up[idx] += h
        down = x.copy()
        down[idx] -= h
        grad[idx] = (loss_fn(up) - loss_fn(down)) / (2 * h)
    return grad


def assert_grads_close(analytic, fd, rtol=1e-6, atol=1e-8):
    for (aw, ab), (fw, fb) in zip(analytic, fd):
        np.testing.assert_allclose(aw, fw, rtol=rtol, atol=atol)
        np.testing.assert_allclose(ab, fb, rtol=rtol, atol=atol)


def min_abs_preactivation(params, x):
    _, _, pres = forward_cached(params, x)
    hidden = pres[:-1]
    if not hidden:
        return np.inf
    return min(np.abs(z).min() for z in hidden)


def random_fd_instance(rng, max_inputs=64, batch=1, needs_adv=False):
    """A random small net plus inputs kept clear of ReLU kinks."""
    while True:
        d = int(rng.integers(2, max_inputs + 1))
        hidden = tuple(
            int(rng.integers(2, 9)) for _ in range(int(rng.integers(1, 3)))
        )
        spec = NetworkSpec(d, hidden, int(rng.integers(2, 5)))
        params = init_params(spec, int(rng.integers(0, 2**31)))
        x = rng.uniform(0.0, 1.0, size=(batch, d))
        x_adv = rng.uniform(0.0, 1.0, size=(batch, d)) if needs_adv else None
        labels = rng.integers(0, spec.num_classes, size=batch)
        ok = min_abs_preactivation(params, x) > KINK_MARGIN
        if needs_adv:
            ok = ok and min_abs_preactivation(params, x_adv) > KINK_MARGIN
        if ok:
            return params, x, labels, x_adv


def pairwise_auroc(scores, labels):
    """O(n^2) positive-beats-negative count with half credit for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
