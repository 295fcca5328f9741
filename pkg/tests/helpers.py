"""Independent brute-force oracles shared by the test modules.

Everything here is deliberately naive (scalar loops, direct definitions)
and never calls into the code paths it is used to check.
"""

import numpy as np


def conv1d_double_loop(x, k):
    """Direct zero-padded centered linear convolution, O(T*L) scalar loops."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    t_len, length = x.shape[0], k.shape[0]
    c = (length - 1) // 2
    y = np.zeros(t_len)
    for t in range(t_len):
        for j in range(length):
            s = t - j + c
            if 0 <= s < t_len:
                y[t] += k[j] * x[s]
    return y


def conv1d_direct_rows(x2d, k):
    """Direct convolution of each row: python loop over output samples,
    inner summation as a dot product.  Used where the scalar double loop
    would be too slow; same definition, still independent of the library."""
    x2d = np.asarray(x2d, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    length = k.shape[0]
    c = (length - 1) // 2
    t_len = x2d.shape[1]
    xpad = np.pad(x2d, ((0, 0), (c, c)))
    kf = k[::-1]
    out = np.empty_like(x2d)
    for t in range(t_len):
        out[:, t] = xpad[:, t : t + length] @ kf
    return out


def matmul_triple_loop(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


def conv2d_loops(x, w, stride, padding):
    """Scalar-loop cross-correlation oracle for small shapes."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    sh, sw = stride
    ph, pw = padding
    b, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    out = np.zeros((b, o, ho, wo))
    for ib in range(b):
        for io in range(o):
            for y in range(ho):
                for xo in range(wo):
                    acc = 0.0
                    for ic in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                acc += w[io, ic, i, j] * xp[ib, ic, y * sh + i, xo * sw + j]
                    out[ib, io, y, xo] = acc
    return out


def bce_naive(logits, targets):
    """Two-term BCE with probability clamping, mean over entries."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    p = np.clip(1.0 / (1.0 + np.exp(-z)), 1e-12, 1.0 - 1e-12)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def roc_auc_pairs(scores, labels):
    """Pair-counting ROC-AUC: P(score+ > score-) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    gt = np.sum(pos[:, None] > neg[None, :])
    eq = np.sum(pos[:, None] == neg[None, :])
    return (gt + 0.5 * eq) / (len(pos) * len(neg))


def pr_auc_steps(scores, labels):
    """Average precision by explicit threshold sweep, ties entering together."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    total_pos = int(np.sum(labels == 1))
    ap = 0.0
    prev_recall = 0.0
    for s in sorted(set(scores.tolist()), reverse=True):
        picked = scores >= s
        tp = int(np.sum(labels[picked] == 1))
        precision = tp / int(np.sum(picked))
        recall = tp / total_pos
        ap += precision * (recall - prev_recall)
        prev_recall = recall
    return ap


def naive_dft(x):
    """Direct O(N^2) DFT from the definition, for verifying FFT output."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    k = np.arange(n // 2 + 1)
    angles = -2.0 * np.pi * np.outer(k, np.arange(n)) / n
    return (np.cos(angles) + 1j * np.sin(angles)) @ x


def mel_kink_margin(center, bw, n_harmonics, grid_hz=31.25):
    """Distance from every triangle kink (feet and peak, all harmonics) to
    the spectrogram bin grid."""
    margin = np.inf
    for h in range(1, n_harmonics + 1):
        for point in (h * center - bw, h * center, h * center + bw):
            margin = min(margin, abs(point - grid_hz * round(point / grid_hz)))
    return margin


def center_off_bin_grid(center, bw, n_harmonics, margin_hz=0.3):
    """Finite differences break if a bin sits on a relu kink; walk the
    center upward until every kink clears the bin grid."""
    for k in range(200):
        c = center + 0.07 * k
        if mel_kink_margin(c, bw, n_harmonics) > margin_hz:
            return c
    raise AssertionError("could not place center away from bin grid")
