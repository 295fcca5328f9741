"""Command line surface: prepare, extract, train, eval, inspect, sweep.

All commands share the same config plumbing: an optional key=value file via
--config, overridden by repeatable --set key=value flags. Every run
directory receives the effective config, the package version, and the seed,
which together with the JSON training log reproduce the run bit-exactly.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure (non-finite loss).
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_run_config, write_config_echo
from .data_io import (
    DataError,
    load_clip_audio,
    load_tagging_manifest,
    load_speech_commands,
    split_clips,
)
from .dsp import AudioError, stft_power
from .frontend_mel import apply as apply_filterbank
from .frontend_tm import realized_kernels
from .inspection import modulation_spectrum
from .metrics import evaluate_keyword, evaluate_tagging
from .model import build_model, load_checkpoint
from .synth import make_synthetic_dataset
from .tensor_io import ContainerError, write_tensors
from .training import (
    NumericalError,
    predict_keyword_classes,
    predict_tagging_scores,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

CACHE_ENV = "MODTAG_CACHE_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_args(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (repeatable)")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--output-dir", help="override the run output directory")


def _add_data_args(p):
    p.add_argument("--manifest", help="clip manifest CSV (tagging-style data)")
    p.add_argument("--speech-commands",
                   help="keyword dataset root (directory-per-class layout)")


def _config_from_args(args) -> RunConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    return load_run_config(args.config, overrides)


def _load_dataset(config: RunConfig, args):
    """Returns (splits dict, class names)."""
    if bool(args.manifest) == bool(args.speech_commands):
        raise ConfigError("provide exactly one of --manifest / --speech-commands")
    if args.manifest:
        clips, vocab = load_tagging_manifest(args.manifest, k=config.n_tags)
        names = list(vocab.names)
    else:
        clips, names = load_speech_commands(args.speech_commands)
    return split_clips(clips), names


def _write_run_info(config: RunConfig, out_dir: Path, command: str,
                    extra: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_echo(config, out_dir / "config.txt")
    info = {
        "version": f"modtag-v{__version__}",
        "command": command,
        "seed": config.seed,
    }
    info.update(extra or {})
    (out_dir / "run_info.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# prepare

def cmd_prepare(args) -> int:
    manifest = make_synthetic_dataset(
        args.out, seed=args.seed if args.seed is not None else 0,
        n_per_class=args.n_per_class, seconds=args.seconds,
    )
    print(f"synthetic dataset ready: {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# extract

def _frontend_fingerprint(config: RunConfig, checkpoint: str | None) -> str:
    payload = {
        "front_end": config.front_end,
        "n_harmonics": 1 if config.front_end == "mel" else config.n_harmonics,
        "n_mod_filters": config.n_mod_filters,
        "n_mel_filters": config.n_mel_filters,
        "seed": config.seed,
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
    if checkpoint:
        digest.update(Path(checkpoint).read_bytes())
    return digest.hexdigest()[:16]


def cmd_extract(args) -> int:
    config = _config_from_args(args)
    clips, _ = load_tagging_manifest(args.manifest, k=config.n_tags)
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
    else:
        model = build_model(**config.model_kwargs(n_classes=1))
    fingerprint = _frontend_fingerprint(config, args.checkpoint)
    cache_root = args.cache_dir or os.environ.get(CACHE_ENV)
    if not cache_root:
        cache_root = Path(args.manifest).resolve().parent / "features"
    out_dir = Path(cache_root) / fingerprint
    out_dir.mkdir(parents=True, exist_ok=True)

    index, skipped = {}, []
    n_computed = n_cached = 0
    for clip in clips:
        key = hashlib.sha256(clip.path.encode()).hexdigest()[:16]
        dest = out_dir / f"{key}.modf"
        if dest.is_file():
            n_cached += 1
            index[clip.path] = dest.name
            continue
        try:
            audio = load_clip_audio(clip.path)
            feat = model.featurize(stft_power(audio))
        except (DataError, AudioError, FileNotFoundError, OSError) as e:
            skipped.append({"path": clip.path, "reason": str(e)})
            print(f"skip {clip.path}: {e}", file=sys.stderr)
            continue
        write_tensors(
            dest,
            {"features": feat.values.data},
            meta={
                "clip": clip.path,
                "frame_rate": feat.frame_rate,
                "n_harmonics": feat.n_harmonics,
                "n_mod_filters": feat.n_filters,
                "fingerprint": fingerprint,
            },
        )
        index[clip.path] = dest.name
        n_computed += 1
    (out_dir / "index.json").write_text(json.dumps(
        {
            "fingerprint": fingerprint,
            "clips": index,
            "skipped": skipped,
            "n_computed": n_computed,
            "n_cached": n_cached,
            "n_skipped": len(skipped),
        },
        indent=2, sort_keys=True,
    ) + "\n")
    print(f"features in {out_dir}: {n_computed} computed, "
          f"{n_cached} cached, {len(skipped)} skipped")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    config = _config_from_args(args)
    splits, names = _load_dataset(config, args)
    for split in ("train", "val"):
        if not splits[split]:
            raise DataError(f"no clips in the {split!r} split")
    out_dir = Path(config.output_dir)
    model = build_model(**config.model_kwargs(n_classes=len(names)))
    _write_run_info(config, out_dir, "train",
                    {"n_classes": len(names), "class_names": names})
    state = train(model, config.train_config(), splits["train"], splits["val"],
                  out_dir)
    print(f"finished epoch {state.epoch}: best val loss "
          f"{state.best_val_loss:.6f}, checkpoint {state.best_checkpoint_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval

def _check_checkpoint_matches(config: RunConfig, model_config: dict) -> None:
    for key in ("front_end", "n_mod_filters", "n_mel_filters"):
        if model_config[key] != getattr(config, key):
            raise ConfigError(
                f"config/checkpoint mismatch: {key} is {getattr(config, key)} "
                f"in the config but {model_config[key]} in the checkpoint"
            )
    want_h = 1 if config.front_end == "mel" else config.n_harmonics
    if model_config["n_harmonics"] != want_h:
        raise ConfigError(
            f"config/checkpoint mismatch: n_harmonics is {want_h} in the "
            f"config but {model_config['n_harmonics']} in the checkpoint"
        )


def _evaluate(model, meta, config: RunConfig, eval_set, names):
    task = meta.get("task", config.task)
    if task == "tagging":
        scores = predict_tagging_scores(model, eval_set,
                                        crop_seconds=config.crop_seconds)
        labels = np.stack([c.labels for c in eval_set])
        return evaluate_tagging(scores, labels, names)
    preds = predict_keyword_classes(model, eval_set,
                                    crop_seconds=config.crop_seconds)
    truth = np.array([c.class_index for c in eval_set])
    return evaluate_keyword(preds, truth, names)


def cmd_eval(args) -> int:
    config = _config_from_args(args)
    model, meta = load_checkpoint(args.checkpoint)
    if args.config or args.set:
        _check_checkpoint_matches(config, meta["model"])
    splits, names = _load_dataset(config, args)
    eval_set = splits[args.split]
    if not eval_set:
        raise DataError(f"no clips in the {args.split!r} split")
    if meta["model"]["n_classes"] != len(names):
        raise ConfigError(
            f"checkpoint predicts {meta['model']['n_classes']} classes but the "
            f"dataset has {len(names)}"
        )
    report = _evaluate(model, meta, config, eval_set, names)
    out_json = Path(args.out) if args.out else Path(config.output_dir) / f"eval_{args.split}.json"
    out_json.parent.mkdir(parents=True, exist_ok=True)
    out_json.write_text(report.to_json() + "\n")
    report.write_csv(out_json.with_suffix(".csv"))
    if report.accuracy is not None:
        print(f"accuracy {report.accuracy:.4f} on {len(eval_set)} clips")
    else:
        print(f"macro ROC-AUC {report.macro_roc_auc:.4f}, "
              f"macro PR-AUC {report.macro_pr_auc:.4f} on {len(eval_set)} clips")
    print(f"report written to {out_json}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect

def _write_mel_csv(model, path: Path) -> None:
    centers = model.mel.center_frequencies()
    bws = model.mel.bandwidths_hz()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["harmonic", "filter", "peak_hz", "center_hz", "bandwidth_hz"])
        for h in range(model.mel.n_harmonics):
            for i, (c, b) in enumerate(zip(centers, bws)):
                writer.writerow([h + 1, i, f"{(h + 1) * c:.4f}",
                                 f"{c:.4f}", f"{b:.4f}"])


def _write_mod_csv(model, path: Path) -> None:
    f1, f2 = model.mod.band_edges_hz()
    kernels = [k.data for k in realized_kernels(model.mod)]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["filter", "f1_hz", "f2_hz"]
                        + [f"tap_{i}" for i in range(model.mod.kernel_len)])
        for m, taps in enumerate(kernels):
            writer.writerow([m, f"{f1[m]:.4f}", f"{f2[m]:.4f}"]
                            + [f"{t:.8f}" for t in taps])


def cmd_inspect(args) -> int:
    config = _config_from_args(args)
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
    else:
        model = build_model(**config.model_kwargs(n_classes=1))
    out_dir = Path(args.out_dir or Path(config.output_dir) / "inspect")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_mel_csv(model, out_dir / "mel_filters.csv")
    if model.mod.n_filters > 0:
        _write_mod_csv(model, out_dir / "mod_filters.csv")
    for clip_path in args.clip or []:
        audio = load_clip_audio(clip_path)
        mel = apply_filterbank(model.mel, stft_power(audio))
        spectrum = modulation_spectrum(mel)
        dest = out_dir / f"modspec_{Path(clip_path).stem}.csv"
        with open(dest, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["modulation_hz", "rms_magnitude"])
            for hz, mag in zip(spectrum.freq_axis, spectrum.magnitudes.data):
                writer.writerow([f"{hz:.6f}", f"{mag:.8f}"])
    print(f"inspection CSVs in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    try:
        m_values = [int(v) for v in args.m_values.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"--m-values expects comma-separated ints, got {args.m_values!r}")
    if not m_values:
        raise ConfigError("--m-values is empty")
    splits, names = _load_dataset(config, args)
    for split in ("train", "val", "test"):
        if not splits[split]:
            raise DataError(f"no clips in the {split!r} split")
    sweep_dir = Path(config.output_dir)
    _write_run_info(config, sweep_dir, "sweep", {"m_values": m_values})

    rows = []
    for m in m_values:
        run_config = dataclasses.replace(
            config, n_mod_filters=m, output_dir=str(sweep_dir / f"M{m}")
        )
        run_dir = Path(run_config.output_dir)
        model = build_model(**run_config.model_kwargs(n_classes=len(names)))
        _write_run_info(run_config, run_dir, "train",
                        {"n_classes": len(names), "class_names": names})
        state = train(model, run_config.train_config(), splits["train"],
                      splits["val"], run_dir)
        best, meta = load_checkpoint(state.best_checkpoint_path)
        report = _evaluate(best, meta, run_config, splits["test"], names)
        if report.accuracy is not None:
            rows.append((m, {"accuracy": report.accuracy}))
        else:
            rows.append((m, {"macro_roc_auc": report.macro_roc_auc,
                             "macro_pr_auc": report.macro_pr_auc}))
        shown = ", ".join(f"{k} {v:.4f}" for k, v in rows[-1][1].items())
        print(f"M={m}: {shown}")

    metric_names = list(rows[0][1])
    out_csv = sweep_dir / "sweep.csv"
    with open(out_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n_mod_filters"] + metric_names)
        for m, metrics_row in rows:
            writer.writerow([m] + [f"{metrics_row[k]:.6f}" for k in metric_names])
    print(f"sweep table written to {out_csv}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring

def build_parser() -> _Parser:
    parser = _Parser(prog="modtag",
                     description="learnable modulation front ends for audio tagging")
    parser.add_argument("--version", action="version",
                        version=f"modtag-v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="generate the synthetic AM dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-class", type=int, default=300)
    p.add_argument("--seconds", type=float, default=3.0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("extract", help="write per-clip feature containers")
    _add_config_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", help="take front-end parameters from a checkpoint")
    p.add_argument("--cache-dir", help=f"feature cache root (default ${CACHE_ENV})")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model")
    _add_config_args(p)
    _add_data_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_config_args(p)
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="dump realized filters and modulation spectra")
    _add_config_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir")
    p.add_argument("--clip", action="append",
                   help="clip to analyze (repeatable)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("sweep", help="train/eval across modulation filter counts")
    _add_config_args(p)
    _add_data_args(p)
    p.add_argument("--m-values", default="0,1,2,4,8")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"modtag: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, AudioError, ContainerError, FileNotFoundError) as e:
        print(f"modtag: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"modtag: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
