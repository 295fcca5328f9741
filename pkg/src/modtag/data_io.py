"""Dataset manifests, tag vocabularies, and split handling.

Two dataset shapes are supported: a manifest CSV (path, split,
semicolon-joined tags) for multi-label tagging corpora, and the
directory-per-class keyword layout with official validation/testing list
files. Audio is expected as 16 kHz mono WAV; the loaders reject anything
else instead of resampling on the fly.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import AudioClip, decode_wav

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

KEYWORD_CLASSES = (
    "backward", "bed", "bird", "cat", "dog", "down", "eight", "five",
    "follow", "forward", "four", "go", "happy", "house", "learn", "left",
    "marvin", "nine", "no", "off", "on", "one", "right", "seven", "sheila",
    "six", "stop", "three", "tree", "two", "up", "visual", "wow", "yes",
    "zero",
)


class DataError(ValueError):
    """Malformed manifest, dataset layout, or split bookkeeping."""


@dataclass
class TaggedClip:
    path: str
    split: str
    labels: np.ndarray  # [K] entries in {0, 1}

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.labels))


@dataclass
class TagVocabulary:
    names: list
    counts: list

    def __len__(self):
        return len(self.names)

    def index(self, tag: str) -> int:
        return self.names.index(tag)


def parse_manifest(csv_path):
    """Rows of (path, split, tags) from the canonical manifest CSV."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise DataError(f"manifest not found: {csv_path}")
    rows = []
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "split", "tags"]:
            raise DataError(f"{csv_path}:1: expected header 'path,split,tags'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{csv_path}:{lineno}: expected 3 fields, got {len(row)}")
            path, split, tags = (field.strip() for field in row)
            if not path:
                raise DataError(f"{csv_path}:{lineno}: empty path")
            if split not in SPLITS:
                raise DataError(f"{csv_path}:{lineno}: unknown split {split!r}")
            tag_list = [t.strip() for t in tags.split(";") if t.strip()]
            rows.append((path, split, tag_list))
    return rows


def write_manifest(csv_path, rows) -> None:
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "split", "tags"])
        for path, split, tags in rows:
            writer.writerow([path, split, ";".join(tags)])


def build_vocab(rows, k: int = 50) -> TagVocabulary:
    """Top-k training-split tags by count, alphabetical tie-break."""
    counts = {}
    for _, split, tags in rows:
        if split != "train":
            continue
        for tag in tags:
            counts[tag] = counts.get(tag, 0) + 1
    if len(counts) < k:
        raise DataError(
            f"need {k} distinct training tags, found {len(counts)}; "
            "set n_tags to match the dataset"
        )
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:k]
    return TagVocabulary(names=[t for t, _ in ranked], counts=[c for _, c in ranked])


def _check_disjoint(clips) -> None:
    seen = {}
    for clip in clips:
        prev = seen.setdefault(clip.path, clip.split)
        if prev != clip.split:
            raise DataError(f"{clip.path} appears in splits {prev} and {clip.split}")


def load_tagging_manifest(csv_path, k: int = 50):
    """Manifest -> (clips, vocabulary); rows without surviving tags dropped.

    Relative clip paths are resolved against the manifest's directory.
    """
    rows = parse_manifest(csv_path)
    base = Path(csv_path).parent
    vocab = build_vocab(rows, k=k)
    index = {name: i for i, name in enumerate(vocab.names)}
    clips = []
    dropped = 0
    for path, split, tags in rows:
        if not Path(path).is_absolute():
            path = str(base / path)
        labels = np.zeros(len(vocab), dtype=np.float32)
        for tag in tags:
            if tag in index:
                labels[index[tag]] = 1.0
        if labels.sum() == 0:
            dropped += 1
            continue
        clips.append(TaggedClip(path=path, split=split, labels=labels))
    if dropped:
        log.warning("dropped %d clips with no tag in the top-%d vocabulary", dropped, k)
    _check_disjoint(clips)
    return clips, vocab


def _read_list_file(path: Path) -> set:
    if not path.is_file():
        raise DataError(f"missing split list: {path}")
    return {line.strip() for line in path.read_text().splitlines() if line.strip()}


def load_speech_commands(root_dir):
    """Directory-per-class keyword layout -> (clips, class names).

    Splits come from validation_list.txt / testing_list.txt (paths relative
    to the root, class/file.wav); everything else is train.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    val_set = _read_list_file(root / "validation_list.txt")
    test_set = _read_list_file(root / "testing_list.txt")
    class_index = {name: i for i, name in enumerate(KEYWORD_CLASSES)}
    clips = []
    for entry in sorted(root.iterdir()):
        if not entry.is_dir() or entry.name == "_background_noise_":
            continue
        if entry.name not in class_index:
            raise DataError(f"unknown class directory: {entry.name}")
        k = class_index[entry.name]
        for wav in sorted(entry.glob("*.wav")):
            rel = f"{entry.name}/{wav.name}"
            split = "val" if rel in val_set else "test" if rel in test_set else "train"
            labels = np.zeros(len(KEYWORD_CLASSES), dtype=np.float32)
            labels[k] = 1.0
            clips.append(TaggedClip(path=str(wav), split=split, labels=labels))
    _check_disjoint(clips)
    return clips, list(KEYWORD_CLASSES)


def load_clip_audio(path, expect_rate: int = 16000,
                    fixed_samples: int | None = None) -> AudioClip:
    """Decode one clip, enforcing the pipeline rate; optionally pad/crop."""
    clip = decode_wav(path)
    if clip.sample_rate != expect_rate:
        raise DataError(
            f"{path}: expected {expect_rate} Hz audio, got {clip.sample_rate}; "
            "convert offline before training"
        )
    if fixed_samples is None:
        return clip
    samples = clip.samples
    if samples.size > fixed_samples:
        samples = samples[:fixed_samples]
    elif samples.size < fixed_samples:
        samples = np.concatenate(
            [samples, np.zeros(fixed_samples - samples.size, np.float32)]
        )
    return AudioClip(samples=samples, sample_rate=expect_rate)


def split_clips(clips):
    """Clips grouped as a {split: list} dict, preserving order."""
    groups = {split: [] for split in SPLITS}
    for clip in clips:
        groups[clip.split].append(clip)
    return groups
