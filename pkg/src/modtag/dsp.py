"""Waveform plumbing: WAV decode/encode, sinc resampling, power spectrograms.

Everything here is plain numpy; gradients never flow through this module.
Clips are mono float32 in [-1, 1] and feature extraction assumes 16 kHz.
"""

import struct
from dataclasses import dataclass

import numpy as np

FFT_SIZE = 512
HOP = 256
N_BINS = FFT_SIZE // 2 + 1

_RESAMPLE_TAPS = 64
_KAISER_BETA = 6.76  # ~70 dB stopband for the tap budget above


class AudioError(ValueError):
    """Malformed audio file or a clip violating a precondition."""


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioError("clip must hold at least one mono sample")
        if not np.isfinite(self.samples).all():
            raise AudioError("clip contains non-finite samples")
        if self.sample_rate <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Spectrogram:
    """Power spectrogram, shape [frames, 257], bin b holding |DFT_b|^2."""

    power: np.ndarray
    frame_rate: float
    fft_size: int = FFT_SIZE
    hop: int = HOP

    @property
    def n_frames(self) -> int:
        return self.power.shape[0]


def _read_exact(f, n: int, what: str) -> bytes:
    blob = f.read(n)
    if len(blob) != n:
        raise AudioError(f"truncated WAV file while reading {what}")
    return blob


def decode_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file (PCM16 or IEEE float32, 1-2 channels) as mono."""
    with open(path, "rb") as f:
        riff, _, wave = struct.unpack("<4sI4s", _read_exact(f, 12, "RIFF header"))
        if riff != b"RIFF" or wave != b"WAVE":
            raise AudioError(f"not a RIFF/WAVE file: {path}")
        fmt = data = None
        while True:
            head = f.read(8)
            if not head:
                break
            if len(head) < 8:
                raise AudioError("truncated WAV file while reading chunk header")
            tag, size = struct.unpack("<4sI", head)
            if tag == b"fmt ":
                fmt = _read_exact(f, size, "fmt chunk")
            elif tag == b"data":
                data = _read_exact(f, size, "data chunk")
            else:
                f.seek(size + (size & 1), 1)
                continue
            if size & 1:
                f.seek(1, 1)
    if fmt is None or data is None:
        raise AudioError("WAV file is missing its fmt or data chunk")
    if len(fmt) < 16:
        raise AudioError("fmt chunk too short")
    codec, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if channels not in (1, 2):
        raise AudioError(f"unsupported channel count {channels}")
    width = bits // 8
    if width and len(data) % (width * channels):
        raise AudioError("data chunk length does not match the sample layout")
    if codec == 1 and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
    elif codec == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float32)
    else:
        raise AudioError(f"unsupported WAV codec (format {codec}, {bits}-bit)")
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=samples, sample_rate=rate)


def write_wav(path, clip: AudioClip, fmt: str = "float32") -> None:
    """Write a clip as a single-chunk WAV; ``fmt`` is "float32" or "pcm16"."""
    if fmt == "pcm16":
        codec, bits = 1, 16
        scaled = np.rint(clip.samples.astype(np.float64) * 32768.0)
        payload = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
    elif fmt == "float32":
        codec, bits = 3, 32
        payload = clip.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown WAV sample format {fmt!r}")
    block = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, codec, 1, clip.sample_rate,
        clip.sample_rate * block, block, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as f:
        f.write(header + payload)


def _kaiser(arg: np.ndarray) -> np.ndarray:
    # continuous Kaiser window, arg = tau / half_width in [-1, 1]
    return np.i0(_KAISER_BETA * np.sqrt(np.maximum(1.0 - arg * arg, 0.0))) / np.i0(
        _KAISER_BETA
    )


def resample(clip: AudioClip, target: int = 16000) -> AudioClip:
    """Band-limited windowed-sinc resampling, 64 taps per output sample."""
    src = clip.sample_rate
    if src < 8000:
        raise AudioError(f"source rate {src} Hz is below the supported 8 kHz minimum")
    if src == target:
        return clip

    n_in = clip.samples.size
    n_out = int(round(n_in * target / src))
    half = _RESAMPLE_TAPS // 2
    # cutoff sits half a transition band below 0.975x the narrower Nyquist,
    # so the stopband is fully developed before aliasing can fold back
    nyq = 0.5 * min(src, target)
    trans_hz = (70.0 - 8.0) / (2.285 * _RESAMPLE_TAPS) * src / (2.0 * np.pi)
    cutoff = max(0.5 * nyq, 0.975 * nyq - 0.5 * trans_hz)

    x = np.concatenate(
        [np.zeros(half), clip.samples.astype(np.float64), np.zeros(half)]
    )
    taps = np.arange(_RESAMPLE_TAPS) - (half - 1)  # input-sample offsets from i0
    step = src / target
    out = np.empty(n_out, dtype=np.float64)
    chunk = 32768
    for start in range(0, n_out, chunk):
        m = np.arange(start, min(start + chunk, n_out), dtype=np.float64)
        t = m * step
        i0 = np.floor(t).astype(np.int64)
        tau = (i0[:, None] + taps[None, :]) - t[:, None]
        kernel = np.sinc(2.0 * cutoff / src * tau) * _kaiser(tau / half)
        kernel /= kernel.sum(axis=1, keepdims=True)
        gathered = x[i0[:, None] + taps[None, :] + half]
        out[start : start + m.size] = np.einsum("mt,mt->m", kernel, gathered)
    return AudioClip(samples=np.clip(out, -1.0, 1.0), sample_rate=target)


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


_WINDOW = _periodic_hann(FFT_SIZE)


def stft_power(clip: AudioClip) -> Spectrogram:
    """Hann-windowed power spectrogram: 512-point FFT, hop 256, no padding."""
    n = clip.samples.size
    if n < FFT_SIZE:
        raise AudioError(f"clip has {n} samples, shorter than one {FFT_SIZE} window")
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, FFT_SIZE)[::HOP]
    spec = np.fft.rfft(frames * _WINDOW, axis=1)
    power = (spec.real * spec.real + spec.imag * spec.imag).astype(np.float32)
    return Spectrogram(power=power, frame_rate=clip.sample_rate / HOP)
