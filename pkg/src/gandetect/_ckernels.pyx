# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in :mod:`gandetect._pykernels`."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def _bit_reverse(Py_ssize_t n):
    cdef Py_ssize_t bits = n.bit_length() - 1
    cdef Py_ssize_t i, b, r
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] rev = out
    for i in range(n):
        r = 0
        for b in range(bits):
            r |= ((i >> b) & 1) << (bits - 1 - b)
        rev[i] = r
    return out


def fft_rows(x, bint inverse=False):
    x = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t rows = x.shape[0], n = x.shape[1]
    out = np.ascontiguousarray(x[:, _bit_reverse(n)])
    sign = 1.0 if inverse else -1.0
    tab = np.exp(sign * 2j * np.pi * np.arange(n // 2) / n)
    cdef double complex[:, ::1] a = out
    cdef double complex[::1] t = tab
    cdef Py_ssize_t r, m, half, step, start, k
    cdef double complex e, o
    for r in range(rows):
        m = 2
        while m <= n:
            half = m // 2
            step = n // m
            start = 0
            while start < n:
                for k in range(half):
                    e = a[r, start + k]
                    o = a[r, start + k + half] * t[k * step]
                    a[r, start + k] = e + o
                    a[r, start + k + half] = e - o
                start += m
            m *= 2
    return out


cdef inline void _sort2(double* v, int a, int b) noexcept nogil:
    # branch-free compare-exchange (compiles to min/max instructions)
    cdef double lo = v[a] if v[a] < v[b] else v[b]
    cdef double hi = v[b] if v[a] < v[b] else v[a]
    v[a] = lo
    v[b] = hi


# median-of-9 exchange network (19 compare-exchanges), middle element ends at v[4]
cdef int[38] _NET = [1, 2, 4, 5, 7, 8, 0, 1, 3, 4, 6, 7, 1, 2, 4, 5, 7, 8, 0, 3,
                     5, 8, 4, 7, 3, 6, 1, 4, 2, 5, 4, 7, 4, 2, 6, 4, 4, 2]


def median3x3(img):
    src = np.pad(np.asarray(img, dtype=np.float64), 1, mode="edge")
    cdef double[:, ::1] p = np.ascontiguousarray(src)
    cdef Py_ssize_t h = p.shape[0] - 2, w = p.shape[1] - 2
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double v[9]
    cdef Py_ssize_t y, x, i, j
    with nogil:
        for y in range(h):
            for x in range(w):
                for i in range(3):
                    for j in range(3):
                        v[3 * i + j] = p[y + i, x + j]
                for i in range(0, 38, 2):
                    _sort2(v, _NET[i], _NET[i + 1])
                o[y, x] = v[4]
    return out


def cooc_counts(a, b, Py_ssize_t dx, Py_ssize_t dy, Py_ssize_t levels):
    cdef cnp.int64_t[:, ::1] pa = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] pb = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t h = pa.shape[0], w = pa.shape[1]
    counts = np.zeros((levels, levels), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] c = counts
    cdef Py_ssize_t y, x
    cdef Py_ssize_t y0 = max(0, -dy), y1 = min(h, h - dy)
    cdef Py_ssize_t x0 = max(0, -dx), x1 = min(w, w - dx)
    for y in range(y0, y1):
        for x in range(x0, x1):
            c[pa[y, x], pb[y + dy, x + dx]] += 1
    return counts


def im2col(x, Py_ssize_t stride):
    cdef double[:, :, :, ::1] s = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], c = s.shape[1], h = s.shape[2], w = s.shape[3]
    cdef Py_ssize_t ho = (h - 1) // stride + 1, wo = (w - 1) // stride + 1
    out = np.zeros((n, ho, wo, c * 9), dtype=np.float64)
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t i, ch, oy, ox, ky, kx, iy, ix, col
    for i in range(n):
        for oy in range(ho):
            for ox in range(wo):
                col = 0
                for ch in range(c):
                    for ky in range(3):
                        iy = oy * stride + ky - 1
                        for kx in range(3):
                            ix = ox * stride + kx - 1
                            if 0 <= iy < h and 0 <= ix < w:
                                o[i, oy, ox, col] = s[i, ch, iy, ix]
                            col += 1
    return out


def col2im(cols, shape, Py_ssize_t stride):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t ho = (h - 1) // stride + 1, wo = (w - 1) // stride + 1
    cdef double[:, :, :, ::1] s = np.ascontiguousarray(cols, dtype=np.float64).reshape(n, ho, wo, c * 9)
    out = np.zeros((n, c, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t i, ch, oy, ox, ky, kx, iy, ix
    # (ky, kx) outermost per pixel so the accumulation order matches the numpy path
    for i in range(n):
        for ch in range(c):
            for ky in range(3):
                for kx in range(3):
                    for oy in range(ho):
                        iy = oy * stride + ky - 1
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(wo):
                            ix = ox * stride + kx - 1
                            if 0 <= ix < w:
                                o[i, ch, iy, ix] += s[i, oy, ox, ch * 9 + ky * 3 + kx]
    return out
