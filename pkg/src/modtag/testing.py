"""Finite-difference gradient checking.

The numeric side never touches the tape: it re-runs the forward function
with perturbed parameter entries, so it is an independent oracle for the
backward pass.  Meant to run on float64 tensors; float32 round-off swamps
the central-difference signal.
"""

import numpy as np

from .tensor import Graph, Tensor


def numeric_gradient(fn, param: Tensor, eps: float = 1e-5, entries=None) -> tuple:
    """Central differences of scalar ``fn()`` wrt ``param.data``.

    ``entries`` optionally restricts the check to a flat-index subset (for
    large weight tensors).  Returns (flat_indices, gradient_values).
    """
    flat = param.data.reshape(-1)
    idx = np.arange(flat.size) if entries is None else np.asarray(entries)
    grads = np.empty(idx.size, dtype=np.float64)
    for j, i in enumerate(idx):
        saved = flat[i]
        flat[i] = saved + eps
        hi = fn()
        flat[i] = saved - eps
        lo = fn()
        flat[i] = saved
        grads[j] = (hi - lo) / (2.0 * eps)
    return idx, grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Infinity-norm relative disagreement between two gradient estimates."""
    diff = np.max(np.abs(analytic - numeric))
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-10)
    return float(diff / scale)


def check_gradients(build_loss, params, eps: float = 1e-5, rtol: float = 1e-4,
                    max_entries: int | None = None, rng=None) -> float:
    """Compare backward-pass gradients of ``build_loss()`` against central differences.

    ``build_loss`` must construct the loss from scratch on each call (it is
    invoked repeatedly with perturbed parameter data).  Returns the worst
    relative error over all checked entries and raises AssertionError past
    ``rtol``.
    """
    for p in params:
        p.grad = None
    with Graph() as g:
        loss = build_loss()
        g.backward(loss)
    analytic = []
    for p in params:
        assert p.grad is not None, "parameter received no gradient"
        assert p.grad.shape == p.data.shape
        analytic.append(p.grad.reshape(-1).astype(np.float64).copy())
        p.grad = None

    def forward_value():
        return build_loss().item()

    worst = 0.0
    for p, a in zip(params, analytic):
        entries = None
        if max_entries is not None and p.data.size > max_entries:
            rng = rng or np.random.default_rng(0)
            entries = rng.choice(p.data.size, size=max_entries, replace=False)
        idx, numeric = numeric_gradient(forward_value, p, eps=eps, entries=entries)
        err = relative_error(a[idx], numeric)
        worst = max(worst, err)
        assert err < rtol, (
            f"gradient mismatch for param of shape {p.data.shape}: "
            f"rel err {err:.3e} >= {rtol:.1e}"
        )
    return worst
