"""Time the compiled convolution kernels against the numpy fallback.

Shapes mirror what training actually runs: 1-D rows are modulation-envelope
convolutions (101-tap kernels over spectrogram frame counts), 2-D cases are
the residual CNN's stem and widest blocks.  Both backends are imported
directly so a single process times the two implementations side by side;
``MODTAG_KERNELS`` only affects which one the package itself dispatches to.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from modtag.kernels import numpy_backend

try:
    from modtag.kernels import _convkernels
except ImportError:
    _convkernels = None


def best_of(fn, args, repeats):
    fn(*args)  # warm up caches and any lazy allocation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_case(name, fn_name, args, repeats):
    t_np = best_of(getattr(numpy_backend, fn_name), args, repeats)
    if _convkernels is None:
        print(f"{name:<44} numpy {t_np * 1e3:8.3f} ms   cython       n/a")
        return
    t_cy = best_of(getattr(_convkernels, fn_name), args, repeats)
    winner = "cython" if t_cy < t_np else "numpy"
    print(
        f"{name:<44} numpy {t_np * 1e3:8.3f} ms   "
        f"cython {t_cy * 1e3:8.3f} ms   {t_np / t_cy:5.2f}x -> {winner}"
    )


def conv1d_cases(rng, repeats):
    kernel = rng.standard_normal(101).astype(np.float32)
    for rows, frames, tag in ((32, 62, "1s crop"), (32, 187, "3s clip"),
                              (96, 311, "5s clip, 3 harmonics")):
        x = rng.standard_normal((rows, frames)).astype(np.float32)
        grad = rng.standard_normal((rows, frames)).astype(np.float32)
        bench_case(f"conv1d fwd   [{rows}x{frames}] ({tag})",
                   "conv1d_same_forward", (x, kernel), repeats)
        bench_case(f"conv1d gradk [{rows}x{frames}] ({tag})",
                   "conv1d_same_grad_kernel", (x, grad, 101), repeats)


def conv2d_cases(rng, repeats):
    cases = (
        ("stem 1->16", (16, 1, 32, 62), (16, 1, 3, 3), (1, 1)),
        ("block 16->16", (16, 16, 32, 62), (16, 16, 3, 3), (1, 1)),
        ("block 32->64 /2", (16, 32, 16, 31), (64, 32, 3, 3), (2, 2)),
        ("block 64->64", (16, 64, 8, 16), (64, 64, 3, 3), (1, 1)),
    )
    for tag, xshape, wshape, stride in cases:
        x = rng.standard_normal(xshape).astype(np.float32)
        w = rng.standard_normal(wshape).astype(np.float32)
        out = numpy_backend.conv2d_forward(x, w, stride, (1, 1))
        grad = rng.standard_normal(out.shape).astype(np.float32)
        bench_case(f"conv2d fwd   {tag} {list(xshape)}",
                   "conv2d_forward", (x, w, stride, (1, 1)), repeats)
        bench_case(f"conv2d gradx {tag}",
                   "conv2d_grad_input", (grad, w, xshape, stride, (1, 1)), repeats)
        bench_case(f"conv2d gradw {tag}",
                   "conv2d_grad_weight", (x, grad, wshape, stride, (1, 1)), repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7,
                        help="timed repetitions per case (best is reported)")
    args = parser.parse_args()

    if _convkernels is None:
        print("compiled extension not available; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    conv1d_cases(rng, args.repeats)
    conv2d_cases(rng, args.repeats)


if __name__ == "__main__":
    main()
