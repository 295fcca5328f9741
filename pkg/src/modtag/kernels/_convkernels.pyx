# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution core: direct-loop kernels in C.

Same API and conventions as :mod:`modtag.kernels.numpy_backend`.  The direct
loops avoid the window-buffer copies the numpy path makes, which pays off for
the long 1-D modulation kernels; for large 2-D convolutions the numpy
im2col+GEMM path is usually faster (see benchmarks/bench_kernels.py).
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


def conv1d_same_forward(x, kernel):
    x = np.ascontiguousarray(x)
    kernel = np.ascontiguousarray(kernel)
    out = np.empty_like(x)
    if x.dtype == np.float32:
        _conv1d_fwd[float](x, kernel, out)
    else:
        _conv1d_fwd[double](x, kernel, out)
    return out


def conv1d_same_grad_kernel(x, grad_out, length):
    x = np.ascontiguousarray(x)
    grad_out = np.ascontiguousarray(grad_out)
    gk = np.zeros(length, dtype=x.dtype)
    if x.dtype == np.float32:
        _conv1d_gk[float](x, grad_out, gk)
    else:
        _conv1d_gk[double](x, grad_out, gk)
    return gk


def conv2d_forward(x, w, stride, padding):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    sh, sw = stride
    ph, pw = padding
    b, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((b, o, ho, wo), dtype=x.dtype)
    if x.dtype == np.float32:
        _conv2d_fwd[float](xp, w, out, sh, sw)
    else:
        _conv2d_fwd[double](xp, w, out, sh, sw)
    return out


def conv2d_grad_input(grad_out, w, x_shape, stride, padding):
    grad_out = np.ascontiguousarray(grad_out)
    w = np.ascontiguousarray(w)
    sh, sw = stride
    ph, pw = padding
    b, c, h, wd = x_shape
    gxp = np.zeros((b, c, h + 2 * ph, wd + 2 * pw), dtype=grad_out.dtype)
    if grad_out.dtype == np.float32:
        _conv2d_gi[float](grad_out, w, gxp, sh, sw)
    else:
        _conv2d_gi[double](grad_out, w, gxp, sh, sw)
    return np.ascontiguousarray(gxp[:, :, ph : ph + h, pw : pw + wd])


def conv2d_grad_weight(x, grad_out, w_shape, stride, padding):
    x = np.ascontiguousarray(x)
    grad_out = np.ascontiguousarray(grad_out)
    sh, sw = stride
    ph, pw = padding
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    gw = np.zeros(w_shape, dtype=x.dtype)
    if x.dtype == np.float32:
        _conv2d_gw[float](xp, grad_out, gw, sh, sw)
    else:
        _conv2d_gw[double](xp, grad_out, gw, sh, sw)
    return gw


cdef void _conv1d_fwd(real[:, ::1] x, real[::1] k, real[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n_rows = x.shape[0], t_len = x.shape[1], length = k.shape[0]
    cdef Py_ssize_t half = (length - 1) // 2
    cdef Py_ssize_t n, t, i, lo, hi
    cdef real acc
    for n in range(n_rows):
        for t in range(t_len):
            # y[t] = sum_i k[length-1-i] * x[t + i - half] over in-bounds i
            lo = half - t if t < half else 0
            hi = t_len + half - t
            if hi > length:
                hi = length
            acc = 0
            for i in range(lo, hi):
                acc += k[length - 1 - i] * x[n, t + i - half]
            out[n, t] = acc


cdef void _conv1d_gk(real[:, ::1] x, real[:, ::1] g, real[::1] gk) noexcept nogil:
    cdef Py_ssize_t n_rows = x.shape[0], t_len = x.shape[1], length = gk.shape[0]
    cdef Py_ssize_t half = (length - 1) // 2
    cdef Py_ssize_t n, t, i, lo, hi
    cdef real gv
    for n in range(n_rows):
        for t in range(t_len):
            lo = half - t if t < half else 0
            hi = t_len + half - t
            if hi > length:
                hi = length
            gv = g[n, t]
            # gk[j] += g[t] * x[t - j + half] with j = length-1-i
            for i in range(lo, hi):
                gk[length - 1 - i] += gv * x[n, t + i - half]


cdef void _conv2d_fwd(real[:, :, :, ::1] xp, real[:, :, :, ::1] w,
                      real[:, :, :, ::1] out, Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    cdef Py_ssize_t b = out.shape[0], o = out.shape[1], ho = out.shape[2], wo = out.shape[3]
    cdef Py_ssize_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ib, io, ic, i, j, y, xo
    cdef real wv
    for ib in range(b):
        for io in range(o):
            for ic in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[io, ic, i, j]
                        for y in range(ho):
                            for xo in range(wo):
                                out[ib, io, y, xo] += wv * xp[ib, ic, y * sh + i, xo * sw + j]


cdef void _conv2d_gi(real[:, :, :, ::1] g, real[:, :, :, ::1] w,
                     real[:, :, :, ::1] gxp, Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    cdef Py_ssize_t b = g.shape[0], o = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    cdef Py_ssize_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ib, io, ic, i, j, y, xo
    cdef real wv
    for ib in range(b):
        for io in range(o):
            for ic in range(c):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[io, ic, i, j]
                        for y in range(ho):
                            for xo in range(wo):
                                gxp[ib, ic, y * sh + i, xo * sw + j] += wv * g[ib, io, y, xo]


cdef void _conv2d_gw(real[:, :, :, ::1] xp, real[:, :, :, ::1] g,
                     real[:, :, :, ::1] gw, Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    cdef Py_ssize_t b = g.shape[0], o = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    cdef Py_ssize_t c = gw.shape[1], kh = gw.shape[2], kw = gw.shape[3]
    cdef Py_ssize_t ib, io, ic, i, j, y, xo
    cdef real acc
    for io in range(o):
        for ic in range(c):
            for i in range(kh):
                for j in range(kw):
                    acc = 0
                    for ib in range(b):
                        for y in range(ho):
                            for xo in range(wo):
                                acc += g[ib, io, y, xo] * xp[ib, ic, y * sh + i, xo * sw + j]
                    gw[io, ic, i, j] += acc
