"""Command-line entry point: synth, train, enhance, evaluate, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, bench, dsp
from .config import RunConfig, expand_preset, load_config
from .datagen import (
    AudioCache,
    derive_seed,
    mix_entry,
    read_manifest,
    synth_noise,
    synth_speechlike,
    mix_at_snr,
    synthesize_corpus,
)
from .enhance import enhance_waveform
from .errors import DataError, InvalidArgument, NumericFailure
from .metrics import GROUPINGS, ScoreRow, aggregate, format_aggregate, format_scores, sdr, stoi
from .modelio import load_model, save_model
from .network import build_model
from .trainer import run_schedule
from .wavio import read_wav, write_wav

log = logging.getLogger("tdnn_enhance")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_path(cfg: RunConfig, args, out: Path) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    if cfg.manifest:
        return Path(cfg.manifest)
    return out / "corpus" / "manifest.tsv"


def cmd_synth(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    corpus = out / "corpus"
    manifest = synthesize_corpus(corpus, cfg.synth, seed=cfg.seed)
    counts = {s: len(manifest.split(s)) for s in ("train", "valid", "test")}
    print(f"manifest\t{corpus / 'manifest.tsv'}")
    for split, n in counts.items():
        print(f"{split}\t{n}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    manifest = read_manifest(_manifest_path(cfg, args, out))
    model, report = run_schedule(
        cfg.plan,
        manifest,
        cfg.model_config(),
        seed=cfg.seed,
        learning_rate=cfg.learning_rate,
        batch=cfg.batch,
        checkpoint_dir=out / "checkpoints" if cfg.checkpoints else None,
    )
    save_model(model, out / "model.tdnn")
    (out / "train_report.tsv").write_text(report.to_text())
    print(f"model\t{out / 'model.tdnn'}")
    print(f"report\t{out / 'train_report.tsv'}")
    print(f"best\t{report.best_checkpoint}\t{report.best_valid_loss:.6g}")
    return EXIT_OK


def cmd_enhance(cfg: RunConfig, args) -> int:
    model = load_model(_existing(args.model))
    wave = read_wav(args.input)
    enhanced = enhance_waveform(model, wave)
    write_wav(args.output, enhanced)
    return EXIT_OK


def evaluate_split(manifest, split, enhancer, seed=0):
    """Score every entry of ``split``; ``enhancer(noisy, clean) -> Waveform``."""
    entries = manifest.split(split)
    if not entries:
        raise InvalidArgument(f"split {split!r} is empty in the manifest")
    audio = AudioCache(manifest)
    rows = []
    for e in entries:
        if e.noise_path is None:
            clean = audio.load(e.clean_path)
            noisy = clean
        else:
            clean, noisy, _ = mix_entry(e, audio, seed)
        estimate = enhancer(noisy, clean)
        rows.append(ScoreRow(e.utt_id, e.snr_db, e.seen, stoi(clean, estimate), sdr(clean, estimate)))
    return rows


def cmd_evaluate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    manifest = read_manifest(_manifest_path(cfg, args, out))
    if args.baseline == "noisy":
        enhancer = lambda noisy, clean: noisy  # noqa: E731
    elif args.baseline == "clean":
        enhancer = lambda noisy, clean: clean  # noqa: E731
    else:
        if not args.model:
            raise UsageError("evaluate needs a model file or --baseline")
        model = load_model(_existing(args.model))
        enhancer = lambda noisy, clean: enhance_waveform(model, noisy)  # noqa: E731
    rows = evaluate_split(manifest, args.split, enhancer, seed=cfg.seed)
    prefix = args.baseline or "model"
    (out / f"scores_{prefix}_{args.split}.tsv").write_text(format_scores(rows))
    for grouping in GROUPINGS:
        text = format_aggregate(aggregate(rows, grouping), grouping)
        (out / f"aggregate_{prefix}_{args.split}_{grouping}.tsv").write_text(text)
        print(text, end="")
    return EXIT_OK


def bench_inputs(n_utterances: int, duration: float, seed: int):
    """Shared noisy-speech magnitude planes for benchmarking."""
    mags = []
    for i in range(n_utterances):
        clean = synth_speechlike(duration, derive_seed(seed, "bench-clean", i))
        noise = synth_noise("white", duration, derive_seed(seed, "bench-noise", i))
        noisy, _ = mix_at_snr(clean, noise, 5.0, derive_seed(seed, "bench-mix", i))
        mags.append(dsp.magnitude(dsp.stft(noisy)))
    return mags


def cmd_bench(cfg: RunConfig, args) -> int:
    models = []
    for path in args.models:
        models.append((Path(path).name, load_model(_existing(path))))
    for preset in args.preset or ():
        contexts = expand_preset(preset)
        models.append((preset, build_model(contexts, cfg.hidden, seed=cfg.model_seed)))
    if not models:
        raise UsageError("bench needs at least one model file or --preset")
    inputs = bench_inputs(args.utterances, args.duration, cfg.seed)
    results = [
        bench.bench_forward(m, inputs, warmup=args.warmup, reps=args.reps, name=name, threads=args.threads or 1)
        for name, m in models
    ]
    text = bench.format_results(results)
    print(text, end="")
    print(f"# stft_ms_per_utt\t{bench.stft_cost_ms([dsp.Waveform(np.zeros(int(args.duration * dsp.SAMPLE_RATE)))]):.3f}")
    if args.parallel:
        for name, m in models:
            ms = bench.bench_parallel(m, inputs, workers=args.parallel)
            print(f"# parallel\t{name}\tworkers={args.parallel}\t{ms:.3f} ms/utt")
    if args.output:
        Path(args.output).write_text(text)
    return EXIT_OK


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"file not found: {p}")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdnn-enhance", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="run config (section.key = value lines)")
    parser.add_argument("--seed", type=int, help="override corpus, shuffle and init seeds")
    parser.add_argument("--out-dir", help="output directory (overrides io.out_dir)")
    parser.add_argument("--threads", type=int, help="BLAS thread limit")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("synth", help="write a synthetic corpus and manifest")

    p = sub.add_parser("train", help="run the staged training schedule")
    p.add_argument("--manifest")

    p = sub.add_parser("enhance", help="enhance one 8 kHz mono WAV file")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("evaluate", help="score a manifest split with STOI and SDR")
    p.add_argument("model", nargs="?")
    p.add_argument("--manifest")
    p.add_argument("--split", default="test")
    p.add_argument("--baseline", choices=("noisy", "clean"), help="score unprocessed audio instead of a model")

    p = sub.add_parser("bench", help="time forward passes of one or more models")
    p.add_argument("models", nargs="*")
    p.add_argument("--preset", action="append", help="also bench a randomly initialised preset")
    p.add_argument("--utterances", type=int, default=10)
    p.add_argument("--duration", type=float, default=8.0)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--parallel", type=int, default=0, help="also time a thread pool of this size")
    p.add_argument("--output", help="write the result table here too")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "enhance": cmd_enhance,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"tdnn-enhance: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"tdnn-enhance: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, InvalidArgument, OSError) as exc:
        print(f"tdnn-enhance: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
