"""Convolution kernel dispatch: compiled core with a numpy fallback.

Two interchangeable backends implement the same five functions:

* ``numpy_backend`` — vectorized numpy (im2col + GEMM for 2-D convs).
* ``_convkernels`` — Cython direct loops, built at install time.

Selection happens once at import.  ``MODTAG_KERNELS=cython|numpy`` forces a
single backend; the default ``auto`` mixes them per function according to
what measures fastest on typical shapes (see benchmarks/bench_kernels.py):
the compiled loops win for the long 1-D modulation kernels, while the
BLAS-backed im2col path wins for the 2-D CNN convolutions.
"""

import os

from . import numpy_backend as _np_backend

try:
    from . import _convkernels as _cy_backend
except ImportError:
    _cy_backend = None

_choice = os.environ.get("MODTAG_KERNELS", "auto").lower()
if _choice not in ("auto", "cython", "numpy"):
    raise ValueError(f"MODTAG_KERNELS must be auto, cython or numpy, got {_choice!r}")
if _choice == "cython" and _cy_backend is None:
    raise ImportError("MODTAG_KERNELS=cython but the compiled extension is not available")

if _choice == "numpy" or _cy_backend is None:
    _conv1d_src = _conv2d_src = _np_backend
elif _choice == "cython":
    _conv1d_src = _conv2d_src = _cy_backend
else:
    _conv1d_src = _cy_backend
    _conv2d_src = _np_backend

conv1d_same_forward = _conv1d_src.conv1d_same_forward
conv1d_same_grad_kernel = _conv1d_src.conv1d_same_grad_kernel
conv2d_forward = _conv2d_src.conv2d_forward
conv2d_grad_input = _conv2d_src.conv2d_grad_input
conv2d_grad_weight = _conv2d_src.conv2d_grad_weight

HAVE_COMPILED = _cy_backend is not None
BACKEND = {
    "conv1d": "cython" if _conv1d_src is _cy_backend else "numpy",
    "conv2d": "cython" if _conv2d_src is _cy_backend else "numpy",
}

__all__ = [
    "conv1d_same_forward",
    "conv1d_same_grad_kernel",
    "conv2d_forward",
    "conv2d_grad_input",
    "conv2d_grad_weight",
    "HAVE_COMPILED",
    "BACKEND",
]
