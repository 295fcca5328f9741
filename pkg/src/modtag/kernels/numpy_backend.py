"""Vectorized numpy implementations of the convolution kernels.

These are the fallback (and, for GEMM-shaped work, often the fastest)
implementations behind :mod:`modtag.kernels`.  All functions accept float32
or float64 arrays and return the same dtype.

Conventions
-----------
``conv1d_same_*`` implement true linear convolution with an odd-length,
centered kernel and zero padding of (L-1)/2 on each side, so the output
length equals the input length.  ``conv2d_*`` implement the usual CNN
cross-correlation with explicit stride and zero padding.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "conv1d_same_forward",
    "conv1d_same_grad_kernel",
    "conv2d_forward",
    "conv2d_grad_input",
    "conv2d_grad_weight",
]


def _conv1d_windows(x, length):
    half = (length - 1) // 2
    xpad = np.pad(x, ((0, 0), (half, half)))
    # windows[n, t, i] = xpad[n, t + i] = x[n, t + i - half]
    return sliding_window_view(xpad, length, axis=1)


def conv1d_same_forward(x, kernel):
    """Convolve each row of ``x`` [N, T] with ``kernel`` [L]; L odd."""
    win = _conv1d_windows(x, kernel.shape[0])
    # y[t] = sum_j k[j] * x[t - j + half]  ->  dot with the flipped kernel
    return win @ kernel[::-1].copy()


def conv1d_same_grad_kernel(x, grad_out, length):
    """Gradient of conv1d_same wrt the kernel, summed over all rows."""
    win = _conv1d_windows(x, length)
    g = np.einsum("nti,nt->i", win, grad_out)
    return g[::-1].copy()


def _pad2d(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _im2col_t(x, kh, kw, stride, padding):
    """Columns as [C*kh*kw, B*Ho*Wo] so the gather stays row-contiguous.

    cols[(c,i,j), (b,y,x)] = xpad[b, c, y*sh + i, x*sw + j]
    """
    sh, sw = stride
    xp = _pad2d(x, *padding)
    b, c, hp, wp = xp.shape
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    sb, sc, srow, scol = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(c, kh, kw, b, ho, wo),
        strides=(sc, srow, scol, sb, srow * sh, scol * sw),
        writeable=False,
    )
    return np.ascontiguousarray(view).reshape(c * kh * kw, b * ho * wo), (ho, wo)


def conv2d_forward(x, w, stride, padding):
    """Cross-correlate ``x`` [B,C,H,W] with ``w`` [O,C,kh,kw]."""
    o, c, kh, kw = w.shape
    cols, (ho, wo) = _im2col_t(x, kh, kw, stride, padding)
    out = w.reshape(o, c * kh * kw) @ cols  # [O, B*Ho*Wo]
    out = out.reshape(o, x.shape[0], ho, wo)
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_grad_input(grad_out, w, x_shape, stride, padding):
    """Gradient of conv2d_forward wrt the input."""
    sh, sw = stride
    ph, pw = padding
    b, c, h, wd = x_shape
    o, _, kh, kw = w.shape
    ho, wo = grad_out.shape[2], grad_out.shape[3]
    go = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3)).reshape(o, -1)
    # one GEMM back to column space, then scatter-add the kernel taps;
    # accumulate channel-major so every add reads contiguously
    dcols = (w.reshape(o, -1).T @ go).reshape(c, kh, kw, b, ho, wo)
    gxp = np.zeros((c, b, h + 2 * ph, wd + 2 * pw), dtype=grad_out.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + sh * ho : sh, j : j + sw * wo : sw] += dcols[:, i, j]
    out = gxp[:, :, ph : ph + h, pw : pw + wd]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_grad_weight(x, grad_out, w_shape, stride, padding):
    """Gradient of conv2d_forward wrt the weights."""
    o, c, kh, kw = w_shape
    cols, _ = _im2col_t(x, kh, kw, stride, padding)
    go = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3)).reshape(o, -1)
    return (go @ cols.T).reshape(o, c, kh, kw)
