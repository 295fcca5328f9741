"""Synthetic amplitude-modulation discrimination dataset.

Each clip is a random sine carrier whose amplitude is modulated at one of
three rates; the class is the modulation rate. Carrier frequency, phases,
and noise vary per clip, so the only reliable cue is the envelope rate,
exactly the structure the temporal modulation filters exist to capture.
"""

from pathlib import Path

import numpy as np

from .data_io import write_manifest
from .dsp import AudioClip, write_wav

CLASSES = (("am02", 2.0), ("am08", 8.0), ("am24", 24.0))
_CARRIER_LO = 500.0
_CARRIER_HI = 4000.0
_AMPLITUDE = 0.45
_DEPTH = 0.9


def synth_clip(rng, mod_hz: float, seconds: float = 3.0, rate: int = 16000,
               snr_db: float = 20.0) -> AudioClip:
    """One amplitude-modulated tone in white noise at the requested SNR."""
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    carrier_hz = rng.uniform(_CARRIER_LO, _CARRIER_HI)
    carrier_phase = rng.uniform(0, 2 * np.pi)
    mod_phase = rng.uniform(0, 2 * np.pi)
    envelope = (1.0 + _DEPTH * np.sin(2 * np.pi * mod_hz * t + mod_phase)) / (1.0 + _DEPTH)
    signal = _AMPLITUDE * envelope * np.sin(2 * np.pi * carrier_hz * t + carrier_phase)
    sig_power = np.mean(signal**2)
    noise_sd = np.sqrt(sig_power / (10.0 ** (snr_db / 10.0)))
    samples = signal + rng.normal(0.0, noise_sd, size=n)
    return AudioClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=rate)


def make_synthetic_dataset(out_dir, seed: int = 0, n_per_class: int = 300,
                           seconds: float = 3.0, snr_db: float = 20.0):
    """Write WAVs plus a manifest; stratified 2/3 train, 1/6 val, 1/6 test.

    Returns the manifest path. Fully deterministic per seed.
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    n_train = (2 * n_per_class) // 3
    n_val = (n_per_class - n_train) // 2
    rows = []
    for class_idx, (tag, mod_hz) in enumerate(CLASSES):
        for i in range(n_per_class):
            rng = np.random.default_rng(np.random.SeedSequence([seed, class_idx, i]))
            clip = synth_clip(rng, mod_hz, seconds=seconds, snr_db=snr_db)
            name = f"{tag}_{i:04d}.wav"
            write_wav(wav_dir / name, clip, fmt="pcm16")
            split = "train" if i < n_train else "val" if i < n_train + n_val else "test"
            rows.append((f"wav/{name}", split, [tag]))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
