"""Learnable triangular filterbank over spectrogram bins, with harmonics.

Each of the F channels owns a center frequency and a bandwidth, both stored
as unconstrained raw parameters and mapped through smooth bijections so the
realized values stay valid no matter what the optimizer does:

    center    = f_min + (f_max - f_min) * sigmoid(raw)
    bandwidth = softplus(raw) + 1 Hz

Harmonic plane h places its triangle at (h+1) times the shared center.
Channel energies are compressed with ln(1 + x).
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

F_MIN = 40.0
F_MAX = 8000.0
N_BINS = 257
BIN_HZ = 31.25
_BW_FLOOR = 1.0  # Hz added after softplus so triangles never collapse


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def softplus_inverse(x):
    # log(exp(x) - 1) without overflow for large x
    x = np.asarray(x, dtype=np.float64)
    return x + np.log1p(-np.exp(-x))


@dataclass
class TriangularFilterbank:
    raw_centers: Tensor
    raw_bandwidths: Tensor
    n_harmonics: int
    f_min: float = F_MIN
    f_max: float = F_MAX
    n_bins: int = N_BINS
    bin_hz: float = BIN_HZ

    @property
    def n_filters(self) -> int:
        return self.raw_centers.shape[0]

    def parameters(self) -> dict:
        return {"centers": self.raw_centers, "bandwidths": self.raw_bandwidths}

    def center_frequencies(self) -> np.ndarray:
        raw = self.raw_centers.data.astype(np.float64)
        sig = np.exp(-np.logaddexp(0.0, -raw))  # overflow-free sigmoid
        return self.f_min + (self.f_max - self.f_min) * sig

    def bandwidths_hz(self) -> np.ndarray:
        raw = self.raw_bandwidths.data.astype(np.float64)
        return np.logaddexp(0.0, raw) + _BW_FLOOR


@dataclass
class MelSpec:
    """Compressed channel energies, shape [H, F, T]."""

    energies: Tensor
    frame_rate: float


def init_filterbank(n_filters: int, n_harmonics: int,
                    dtype=T.DEFAULT_DTYPE) -> TriangularFilterbank:
    """Mel-space F centers on [f_min, f_max / H] and derive bandwidths.

    Centers are the interior points of an F+2 point mel grid whose endpoints
    act as virtual neighbours, so bandwidths (half the local center spacing)
    are defined even for F = 1.
    """
    if n_filters < 1:
        raise ValueError(f"need at least one filter, got {n_filters}")
    if n_harmonics < 1:
        raise ValueError(f"need at least one harmonic, got {n_harmonics}")
    top = F_MAX / n_harmonics
    grid = mel_to_hz(np.linspace(hz_to_mel(F_MIN), hz_to_mel(top), n_filters + 2))
    centers = grid[1:-1]
    bw = np.maximum((grid[2:] - grid[:-2]) / 4.0, _BW_FLOOR + 0.5)

    frac = (centers - F_MIN) / (F_MAX - F_MIN)
    raw_centers = np.log(frac / (1.0 - frac))
    raw_bw = softplus_inverse(bw - _BW_FLOOR)
    return TriangularFilterbank(
        raw_centers=Tensor(raw_centers.astype(dtype), requires_grad=True),
        raw_bandwidths=Tensor(raw_bw.astype(dtype), requires_grad=True),
        n_harmonics=n_harmonics,
    )


def _mapped_centers(fb: TriangularFilterbank) -> Tensor:
    return T.add(
        T.mul(T.sigmoid(fb.raw_centers), fb.f_max - fb.f_min), fb.f_min
    )


def _mapped_bandwidths(fb: TriangularFilterbank) -> Tensor:
    return T.add(T.softplus(fb.raw_bandwidths), _BW_FLOOR)


def filter_matrix(fb: TriangularFilterbank) -> Tensor:
    """Triangle responses per (harmonic, filter) over bin frequencies.

    Row (h, f) peaks at 1 where the bin frequency hits (h+1) * center_f and
    falls linearly to 0 at +- bandwidth_f; bins past Nyquist simply do not
    exist, which truncates out-of-range triangles. Shape [H, F, n_bins].
    """
    dtype = fb.raw_centers.dtype
    bins = Tensor(
        (np.arange(fb.n_bins) * fb.bin_hz).astype(dtype).reshape(1, fb.n_bins)
    )
    centers = T.reshape(_mapped_centers(fb), (fb.n_filters, 1))
    bw = T.reshape(_mapped_bandwidths(fb), (fb.n_filters, 1))
    planes = []
    for h in range(fb.n_harmonics):
        peak = T.mul(centers, float(h + 1))
        tri = T.relu(T.sub(1.0, T.div(T.absolute(T.sub(bins, peak)), bw)))
        planes.append(T.reshape(tri, (1, fb.n_filters, fb.n_bins)))
    return planes[0] if len(planes) == 1 else T.concat(planes, axis=0)


def apply(fb: TriangularFilterbank, spec) -> MelSpec:
    """Project a power spectrogram through the filterbank and compress.

    energies[h, f, t] = ln(1 + sum_b weights[h, f, b] * power[t, b])
    """
    power = np.asarray(spec.power)
    if power.ndim != 2 or power.shape[1] != fb.n_bins:
        raise ValueError(f"expected [T, {fb.n_bins}] power, got {power.shape}")
    n_frames = power.shape[0]
    weights = filter_matrix(fb)
    flat = T.reshape(weights, (fb.n_harmonics * fb.n_filters, fb.n_bins))
    power_t = Tensor(np.ascontiguousarray(power.T).astype(fb.raw_centers.dtype))
    energy = T.matmul(flat, power_t)
    energy = T.reshape(energy, (fb.n_harmonics, fb.n_filters, n_frames))
    return MelSpec(energies=T.log1p(energy), frame_rate=spec.frame_rate)
