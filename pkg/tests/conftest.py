import numpy as np
import pytest

from gandetect.imagecore import ImageBuffer
from gandetect.kernels import available_backends
from gandetect.learn import cnn


@pytest.fixture(params=sorted(available_backends()))
def backend(request):
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h, w, c=3, smooth=False):
    x = rng.uniform(0, 255, (h, w, c))
    if smooth:
        # 12 periodic binomial passes per axis (sigma ~ 2.4 px); stays in range
        for axis in (0, 1):
            for _ in range(12):
                x = (np.roll(x, 1, axis) + 2 * x + np.roll(x, -1, axis)) / 4
    return ImageBuffer(x)


def naive_dft2(x):
    """Direct O(N^4) double sum."""
    n = x.shape[0]
    k = np.arange(n)
    e = np.exp(-2j * np.pi * np.outer(k, k) / n)
    # F[u, v] = sum_y sum_x x[y, x] e^{-2 pi i (u y + v x) / n}
    return np.einsum("uy,vx,yx->uv", e, e, x)


def _masks(params, img):
    _, (cache, _, _) = cnn.forward_batch(params, cnn.to_input([img]), keep=True)
    return [c[2] for c in cache]


# 30 parameters spread over every trainable tensor
FD_PICKS = {"conv1.w": 5, "conv1.b": 4, "conv2.w": 5, "conv2.b": 4, "conv3.w": 5, "conv3.b": 4,
            "fc.w": 2, "fc.b": 1}


def fd_check(params, img, label, picks, rng, eps=1e-5):
    """Worst relative error over ``picks[name]`` random parameters of each tensor.

    A perturbation that flips any ReLU mask crosses a kink, where the central
    difference is not a derivative; such parameters are redrawn.
    """
    grads = cnn.cnn_gradient(params, img, label)
    base = _masks(params, img)
    worst, checked = 0.0, 0
    for name, want in picks.items():
        arr = params.arrays[name]
        done = 0
        for flat in rng.permutation(arr.size):
            if done == want:
                break
            idx = np.unravel_index(flat, arr.shape)
            old = arr[idx]
            arr[idx] = old + eps
            up, m_up = cnn.cnn_loss(params, img, label), _masks(params, img)
            arr[idx] = old - eps
            down, m_down = cnn.cnn_loss(params, img, label), _masks(params, img)
            arr[idx] = old
            if not all(np.array_equal(a, b) and np.array_equal(a, c) for a, b, c in zip(base, m_up, m_down)):
                continue
            fd = (up - down) / (2 * eps)
            g = grads[name][idx]
            denom = max(abs(fd), abs(g))
            if denom > 1e-10:
                worst = max(worst, abs(fd - g) / denom)
            done += 1
        checked += done
    return worst, checked
