"""Learnable sinc bandpass filters over temporal envelope trajectories.

Each filter is a difference of two windowed sinc lowpass kernels whose band
edges (f1, f2) live in the modulation-frequency domain of the envelope
signal (Nyquist = frame_rate / 2). The kernel is realized from the band
edges on every forward pass, so gradients reach the edges through the taps:

    h[n] = [ (2 f2/fr) s(2 pi f2 k/fr) - (2 f1/fr) s(2 pi f1 k/fr) ] w[n]

with k = n - 50, s the normalized sinc, and w a Hamming window of size 101.
The k = 0 tap is handled by a separate one-hot term, never by dividing by k.

Band edges are reparameterized so any raw parameter value is legal:

    f1 = (nyq - 0.5 Hz) * sigmoid(raw_low)
    f2 = min(f1 + softplus(raw_band) + 0.1 Hz, nyq)

Each filter's output keeps its sign; the all-pass (original) plane is
prepended per harmonic so channel h*(M+1) is always the unfiltered envelope.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .frontend_mel import MelSpec, softplus_inverse
from .tensor import Tensor

KERNEL_LEN = 101
_CENTER = KERNEL_LEN // 2
_EDGE_MARGIN = 0.5  # Hz kept between f1 and Nyquist
_MIN_BAND = 0.1  # Hz enforced between f1 and f2

_HAMMING = np.hamming(KERNEL_LEN)


@dataclass
class SincModFilterbank:
    raw_low: Tensor
    raw_band: Tensor
    frame_rate: float = 62.5
    kernel_len: int = KERNEL_LEN
    window: np.ndarray = field(default_factory=lambda: _HAMMING, repr=False)

    @property
    def n_filters(self) -> int:
        return self.raw_low.shape[0]

    @property
    def nyq_mod(self) -> float:
        return self.frame_rate / 2.0

    def parameters(self) -> dict:
        return {"low": self.raw_low, "band": self.raw_band}

    def band_edges_hz(self):
        """Realized (f1, f2) per filter as numpy arrays."""
        nyq = self.nyq_mod
        raw_low = self.raw_low.data.astype(np.float64)
        raw_band = self.raw_band.data.astype(np.float64)
        f1 = (nyq - _EDGE_MARGIN) * np.exp(-np.logaddexp(0.0, -raw_low))
        f2 = np.minimum(f1 + np.logaddexp(0.0, raw_band) + _MIN_BAND, nyq)
        return f1, f2


@dataclass
class ModulationTensor:
    """Stacked planes [H*(M+1), F, T]: per harmonic, all-pass then filters."""

    values: Tensor
    frame_rate: float
    n_harmonics: int
    n_filters: int


def count_output_channels(n_harmonics: int, n_filters: int) -> int:
    if n_harmonics < 1 or n_filters < 0:
        raise ValueError("need H >= 1 and M >= 0")
    return n_harmonics * (n_filters + 1)


def init_modfilterbank(n_filters: int, frame_rate: float = 62.5,
                       dtype=T.DEFAULT_DTYPE) -> SincModFilterbank:
    """Spread M passbands over consecutive log-spaced edges on [0.5, nyq].

    Low modulation frequencies get the narrow bands, matching where slow
    musical and speech envelope rates concentrate.
    """
    if n_filters < 0:
        raise ValueError(f"filter count must be non-negative, got {n_filters}")
    nyq = frame_rate / 2.0
    edges = np.geomspace(0.5, nyq, n_filters + 1)
    f1 = np.minimum(edges[:-1], nyq - _EDGE_MARGIN - 0.1)
    f2 = edges[1:]
    raw_low = -np.log((nyq - _EDGE_MARGIN) / f1 - 1.0)
    raw_band = softplus_inverse(f2 - f1 - _MIN_BAND)
    return SincModFilterbank(
        raw_low=Tensor(raw_low.astype(dtype), requires_grad=True),
        raw_band=Tensor(raw_band.astype(dtype), requires_grad=True),
        frame_rate=frame_rate,
    )


def sinc_kernel(f1, f2, frame_rate: float) -> Tensor:
    """Realize the 101-tap bandpass kernel for band edges (f1, f2) in Hz.

    Accepts floats or scalar tensors; differentiable wrt tensor edges.
    """
    f1 = f1 if isinstance(f1, Tensor) else Tensor(np.asarray(f1, T.DEFAULT_DTYPE))
    f2 = f2 if isinstance(f2, Tensor) else Tensor(np.asarray(f2, T.DEFAULT_DTYPE))
    if float(np.max(f1.data)) >= float(np.min(f2.data)):
        raise ValueError("band edges must satisfy f1 < f2")
    dtype = f1.dtype
    k = np.arange(KERNEL_LEN, dtype=np.float64) - _CENTER
    angle = Tensor((2.0 * np.pi * k / frame_rate).astype(dtype))
    inv_pik = np.zeros(KERNEL_LEN)
    nonzero = k != 0
    inv_pik[nonzero] = 1.0 / (np.pi * k[nonzero])
    inv_pik_t = Tensor(inv_pik.astype(dtype))
    center_gain = np.zeros(KERNEL_LEN)
    center_gain[_CENTER] = 2.0 / frame_rate
    center_t = Tensor(center_gain.astype(dtype))

    def lowpass(f):
        return T.add(T.mul(T.sin(T.mul(f, angle)), inv_pik_t), T.mul(f, center_t))

    window = Tensor(_HAMMING.astype(dtype))
    return T.mul(T.sub(lowpass(f2), lowpass(f1)), window)


def realized_kernels(fb: SincModFilterbank) -> list:
    """Build every filter's kernel from the raw parameters, in-graph."""
    nyq = fb.nyq_mod
    f1_all = T.mul(T.sigmoid(fb.raw_low), nyq - _EDGE_MARGIN)
    upper = T.add(T.add(f1_all, T.softplus(fb.raw_band)), _MIN_BAND)
    f2_all = T.sub(upper, T.relu(T.sub(upper, nyq)))
    kernels = []
    for m in range(fb.n_filters):
        pick = np.zeros(fb.n_filters, dtype=fb.raw_low.dtype)
        pick[m] = 1.0
        f1 = T.tsum(T.mul(f1_all, Tensor(pick)))
        f2 = T.tsum(T.mul(f2_all, Tensor(pick)))
        kernels.append(sinc_kernel(f1, f2, fb.frame_rate))
    return kernels


def modulate(mel: MelSpec, fb: SincModFilterbank) -> ModulationTensor:
    """Convolve every envelope row with every filter, keeping the original.

    Output plane layout per harmonic h: index h*(M+1) is the untouched
    envelope plane, followed by the M filtered versions. Length-preserving
    (same zero padding as the kernel convolution).
    """
    if abs(mel.frame_rate - fb.frame_rate) > 1e-9:
        raise ValueError(
            f"envelope frame rate {mel.frame_rate} != filter rate {fb.frame_rate}"
        )
    h, f, t = mel.energies.shape
    m = fb.n_filters
    flat = T.reshape(mel.energies, (h * f, t))
    planes = [T.reshape(mel.energies, (h, 1, f, t))]
    for kern in realized_kernels(fb):
        out = T.conv1d_same(flat, kern)
        planes.append(T.reshape(out, (h, 1, f, t)))
    stacked = planes[0] if m == 0 else T.concat(planes, axis=1)
    values = T.reshape(stacked, (h * (m + 1), f, t))
    return ModulationTensor(
        values=values, frame_rate=mel.frame_rate, n_harmonics=h, n_filters=m
    )
