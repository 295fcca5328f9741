"""Non-learnable modulation spectrum for analysis plots and CSV dumps.

Summarizes how fast the channel envelopes fluctuate: per channel, DFT the
mean-removed envelope over time, then RMS the magnitudes across channels.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ModulationSpectrum:
    magnitudes: np.ndarray
    freq_axis: np.ndarray


def modulation_spectrum(mel) -> ModulationSpectrum:
    """RMS-across-channels magnitude spectrum of the envelope fluctuations.

    Output bin k covers modulation frequency k * frame_rate / T for
    k in [0, floor(T/2)].
    """
    envelopes = np.asarray(mel.energies.data, dtype=np.float64)
    if envelopes.ndim != 3:
        raise ValueError(f"expected [H, F, T] envelopes, got {envelopes.shape}")
    n_frames = envelopes.shape[2]
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    flat = envelopes.reshape(-1, n_frames)
    centered = flat - flat.mean(axis=1, keepdims=True)
    mags = np.abs(np.fft.rfft(centered, axis=1))
    rms = np.sqrt(np.mean(mags * mags, axis=0))
    freqs = np.arange(rms.size) * mel.frame_rate / n_frames
    return ModulationSpectrum(magnitudes=rms, freq_axis=freqs)
