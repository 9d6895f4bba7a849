"""Pure numpy implementations of the hot kernels.

These are the reference fallback for :mod:`gandetect._ckernels`; both expose
the same functions with the same signatures and must agree to rounding error.
"""

import numpy as np


def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_rows(x, inverse=False):
    """Unnormalized radix-2 DIT FFT along the last axis of a 2D complex array."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    rows, n = x.shape
    out = x[:, _bit_reverse(n)]
    sign = 1.0 if inverse else -1.0
    # twiddles from one table so every stage uses the same rounding
    table = np.exp(sign * 2j * np.pi * np.arange(n // 2) / n)
    m = 2
    while m <= n:
        half = m // 2
        w = table[:: n // m][:half]
        blocks = out.reshape(rows, n // m, m)
        even = blocks[:, :, :half].copy()
        odd = blocks[:, :, half:] * w
        blocks[:, :, :half] = even + odd
        blocks[:, :, half:] = even - odd
        m *= 2
    return out


def median3x3(img):
    """3x3 median with edge replication on a 2D float array."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    p = np.pad(img, 1, mode="edge")
    stack = np.stack([p[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)])
    return np.partition(stack, 4, axis=0)[4]


def cooc_counts(a, b, dx, dy, levels):
    """Joint histogram of (a[y, x], b[y + dy, x + dx]) over valid positions.

    ``a`` and ``b`` are integer bin planes of equal shape with values in
    ``[0, levels)``.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    h, w = a.shape
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y1 <= y0 or x1 <= x0:
        return np.zeros((levels, levels), dtype=np.int64)
    src = a[y0:y1, x0:x1]
    dst = b[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
    flat = np.bincount((src * levels + dst).ravel(), minlength=levels * levels)
    return flat.reshape(levels, levels).astype(np.int64)


def im2col(x, stride):
    """Patch matrix for a 3x3 zero-padded convolution.

    ``x`` has shape (N, C, H, W); returns (N, Ho, Wo, C*9) with the column
    index ordered as (c, ky, kx).
    """
    n, c, h, w = x.shape
    ho = (h - 1) // stride + 1
    wo = (w - 1) // stride + 1
    p = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, ho, wo, c, 3, 3), dtype=np.float64)
    for ky in range(3):
        for kx in range(3):
            win = p[:, :, ky:ky + stride * (ho - 1) + 1:stride, kx:kx + stride * (wo - 1) + 1:stride]
            cols[:, :, :, :, ky, kx] = win.transpose(0, 2, 3, 1)
    return cols.reshape(n, ho, wo, c * 9)


def col2im(cols, shape, stride):
    """Adjoint of :func:`im2col`: scatter-add columns back to an (N, C, H, W) array."""
    n, c, h, w = shape
    ho = (h - 1) // stride + 1
    wo = (w - 1) // stride + 1
    cols = np.asarray(cols, dtype=np.float64).reshape(n, ho, wo, c, 3, 3)
    p = np.zeros((n, c, h + 2, w + 2), dtype=np.float64)
    for ky in range(3):
        for kx in range(3):
            p[:, :, ky:ky + stride * (ho - 1) + 1:stride, kx:kx + stride * (wo - 1) + 1:stride] += (
                cols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
            )
    return p[:, :, 1:h + 1, 1:w + 1].copy()
