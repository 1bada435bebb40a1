"""Command-line entry point for data synthesis, training, generation, evaluation and benchmarking.

Run:
  python -m dal_dialogue synth-data --out data/corpus.tsv --holdout 50 --seed 7
  python -m dal_dialogue train --mode dual-adv --corpus data/corpus.tsv --out runs/dual-adv
  python -m dal_dialogue evaluate --checkpoint runs/dual-adv/final.ckpt --queries data/corpus.heldout.tsv --out report
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn, TypeVar

from dal_dialogue.config_store import flatten_run_config, load_run_config, parse_override, render_run_config
from dal_dialogue.converters import _dims_from_options, _mmi_from_options, _synth_from_options, _train_from_options
from dal_dialogue.decoding.factory import make_decoder, make_reverse_decoder
from dal_dialogue.errors import DalError, UsageError
from dal_dialogue.evaluation.bench import run_benchmark
from dal_dialogue.evaluation.report import evaluate_systems
from dal_dialogue.logging_setup import configure_console_logging, detach_file_logging, ensure_file_logging
from dal_dialogue.models import RunConfig
from dal_dialogue.paths import ReportLayout, RunLayout, atomic_write_text
from dal_dialogue.states import DecoderKind, Direction, TrainMode
from dal_dialogue.text.corpus import Corpus, QRPair, corpus_fingerprint, load_corpus, read_queries, write_corpus
from dal_dialogue.text.synthetic import read_layout, split_heldout, synthesize_corpus, write_layout
from dal_dialogue.text.vocab import TokenSeq, decode
from dal_dialogue.training.checkpoint import load_checkpoint, save_checkpoint
from dal_dialogue.training.model import DalModel, build_model
from dal_dialogue.training.seeding import derive_seed
from dal_dialogue.training.trainer import pretrain, train_dal
from dal_dialogue.training.trainlog import TrainLog
from dal_dialogue.workers import parallel_map

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

T = TypeVar("T")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _common_parser() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, dest="seed", help="Single source of all randomness (default: 0)")
    p.add_argument("--log-level", type=str.upper, choices=_LOG_LEVELS, default="INFO", help="Console log level")
    p.add_argument("--workers", type=int, dest="eval.workers", help="Decode workers for generate/evaluate")
    p.add_argument("--config", dest="config_file", help="Run config file (key = value lines)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config key (repeatable), e.g. --set train.lr_gen=0.1",
    )
    return p


def _add_mmi_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nbest", type=int, dest="mmi.bidi_nbest", help="N-best size for mmi-bidi")
    p.add_argument("--anti-lm-weight", type=float, dest="mmi.anti_lm_weight")
    p.add_argument("--anti-lm-threshold", type=int, dest="mmi.anti_lm_threshold")
    p.add_argument("--reverse-weight", type=float, dest="mmi.bidi_reverse_weight")
    p.add_argument("--max-len", type=int, dest="eval.max_len", help="Decode length (default: checkpoint's)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dal_dialogue", add_help=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common_parser()

    p = sub.add_parser("synth-data", parents=[common], help="Write a synthetic safe/diverse corpus")
    p.add_argument("--out", dest="paths.out", help="Corpus TSV to write")
    p.add_argument("--n-safe", type=int, dest="synth.n_safe")
    p.add_argument("--m", type=int, dest="synth.m", help="Queries per safe response")
    p.add_argument("--n-diverse", type=int, dest="synth.n_diverse")
    p.add_argument("--alphabet", type=int, dest="synth.alphabet")
    p.add_argument("--min-len", type=int, dest="synth.min_len")
    p.add_argument("--max-len", type=int, dest="synth.max_len")
    p.add_argument("--holdout", type=int, dest="synth.holdout", help="Pairs written to <stem>.heldout.tsv instead")

    p = sub.add_parser("train", parents=[common], help="Pretrain and run the DAL loop")
    p.add_argument("--corpus", dest="paths.corpus")
    p.add_argument("--out", dest="paths.out", help="Run directory")
    p.add_argument("--resume", dest="paths.resume", help="Checkpoint to continue from (skips pretraining)")
    p.add_argument("--mode", choices=[m.value for m in TrainMode], dest="train.mode")
    p.add_argument("--dal-epochs", type=int, dest="train.dal_epochs")
    p.add_argument("--pretrain-epochs-gen", type=int, dest="train.pretrain_epochs_gen")
    p.add_argument("--pretrain-epochs-disc", type=int, dest="train.pretrain_epochs_disc")
    p.add_argument("--batch-size", type=int, dest="train.batch_size")
    p.add_argument("--lambda-qr", type=float, dest="train.lambda_qr")
    p.add_argument("--lambda-rq", type=float, dest="train.lambda_rq")
    p.add_argument("--lr-gen", type=float, dest="train.lr_gen")
    p.add_argument("--lr-disc", type=float, dest="train.lr_disc")
    p.add_argument("--d-steps", type=int, dest="train.d", help="Discriminator updates per batch")
    p.add_argument("--g-steps", type=int, dest="train.g", help="Generator updates per batch")
    p.add_argument("--max-len", type=int, dest="train.max_len")
    p.add_argument("--emb", type=int, dest="model.emb")
    p.add_argument("--hidden", type=int, dest="model.hidden")
    p.add_argument("--max-vocab", type=int, dest="data.max_vocab")

    p = sub.add_parser("generate", parents=[common], help="Decode a query file with one decoder")
    p.add_argument("--checkpoint", dest="paths.checkpoint")
    p.add_argument("--queries", dest="paths.queries")
    p.add_argument("--out", dest="paths.out", help="Response file (one line per query)")
    p.add_argument("--decoder", choices=[k.value for k in DecoderKind], dest="eval.decoder")
    p.add_argument("--beam-size", type=int, dest="eval.beam_size")
    p.add_argument("--direction", choices=[d.value for d in Direction], dest="eval.direction")
    _add_mmi_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="Score every system and write the report")
    p.add_argument("--checkpoint", dest="paths.checkpoint")
    p.add_argument("--baseline-checkpoint", dest="paths.baseline_checkpoint", help="mle-only run (seq2seq system)")
    p.add_argument("--queries", dest="paths.queries")
    p.add_argument("--reverse-queries", dest="paths.reverse_queries", help="Responses for the response->query task")
    p.add_argument("--layout", dest="paths.layout", help="Synthetic layout JSON for the specific-response win rate")
    p.add_argument("--corpus", dest="paths.corpus", help="Training corpus, for the report fingerprint")
    p.add_argument("--out", dest="paths.out", help="Report directory")
    p.add_argument("--latency-repetitions", type=int, dest="eval.latency_repetitions")
    _add_mmi_flags(p)

    p = sub.add_parser("bench", parents=[common], help="Time every decoder on the same queries")
    p.add_argument("--checkpoint", dest="paths.checkpoint")
    p.add_argument("--queries", dest="paths.queries")
    p.add_argument("--out", dest="paths.out", help="Output directory for bench.json")
    p.add_argument("--repetitions", type=int, dest="eval.bench_repetitions")
    p.add_argument("--nbest-list", dest="eval.bench_nbest", help="Comma-separated mmi-bidi N values")
    _add_mmi_flags(p)
    return parser


def _flag_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then ``--set`` overrides in order, then explicit flags."""

    overrides = [parse_override(item) for item in args.overrides]
    for key, value in sorted(vars(args).items()):
        if value is None:
            continue
        if key == "seed" or "." in key:
            overrides.append((key, _flag_value(value)))
    path = Path(args.config_file) if args.config_file else None
    return load_run_config(path, overrides)


def _require(value: str | None, flag: str) -> Path:
    if not value:
        raise UsageError(f"{flag} is required")
    return Path(value)


def _convert(fn: Callable[..., T], *args: Any, **kwargs: Any) -> T:
    try:
        return fn(*args, **kwargs)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _decode_len(cfg: RunConfig, model: DalModel) -> int:
    return cfg.eval.max_len or model.config.max_len


def _queries(cfg: RunConfig, model: DalModel) -> list[TokenSeq]:
    path = _require(cfg.paths.queries, "--queries")
    queries = read_queries(path, model.vocab, max_len=cfg.data.max_len)
    if not queries:
        raise UsageError(f"no queries in {path}")
    return queries


def _cmd_synth_data(cfg: RunConfig) -> int:
    out = _require(cfg.paths.out, "--out")
    spec = _convert(_synth_from_options, cfg.synth)
    corpus, layout = synthesize_corpus(spec, cfg.seed)
    held: list[QRPair] = []
    if cfg.synth.holdout:
        corpus, layout, held = split_heldout(corpus, layout, cfg.synth.holdout, derive_seed(cfg.seed, "holdout"))

    write_corpus(corpus, out)
    write_layout(layout, corpus.vocab, _sibling(out, ".layout.json"))
    if held:
        write_corpus(Corpus(pairs=tuple(held), vocab=corpus.vocab), _sibling(out, ".heldout.tsv"))
    atomic_write_text(_sibling(out, ".resolved-config.txt"), render_run_config(cfg))
    logger.info(
        "wrote %d pairs to %s (%d held out, vocab size %d)", len(corpus.pairs), out, len(held), len(corpus.vocab)
    )
    return EXIT_OK


def _cmd_train(cfg: RunConfig) -> int:
    corpus_path = _require(cfg.paths.corpus, "--corpus")
    layout = RunLayout(_require(cfg.paths.out, "--out"))
    train_cfg = _convert(_train_from_options, cfg.train, seed=cfg.seed)
    layout.root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(layout.resolved_config, render_run_config(cfg))

    if cfg.paths.resume:
        model = load_checkpoint(Path(cfg.paths.resume)).with_config(train_cfg)
        corpus = load_corpus(corpus_path, model.vocab, max_len=cfg.data.max_len)
        log = TrainLog.read(layout.train_log) if layout.train_log.exists() else TrainLog()
        logger.info("resuming from %s at dal epoch %d", cfg.paths.resume, model.epoch)
    else:
        corpus = load_corpus(
            corpus_path,
            max_len=cfg.data.max_len,
            min_count=cfg.data.min_count,
            max_vocab=cfg.data.max_vocab,
        )
        dims = _convert(_dims_from_options, cfg.model, vocab_size=len(corpus.vocab))
        model = build_model(corpus.vocab, dims, train_cfg)
        log = pretrain(model, corpus)

    train_dal(model, corpus, layout=layout, log=log)
    save_checkpoint(model, layout.final_checkpoint)
    log.write(layout.train_log)
    logger.info("training done: %s", layout.final_checkpoint)
    return EXIT_OK


def _cmd_generate(cfg: RunConfig) -> int:
    model = load_checkpoint(_require(cfg.paths.checkpoint, "--checkpoint"))
    out = _require(cfg.paths.out, "--out")
    queries = _queries(cfg, model)
    max_len = _decode_len(cfg, model)

    if cfg.eval.direction == Direction.RQ:
        if cfg.eval.decoder != DecoderKind.GREEDY:
            raise UsageError("the response->query direction supports only the greedy decoder")
        decoder = make_reverse_decoder(model, max_len)
    else:
        mmi = _convert(_mmi_from_options, cfg.mmi)
        decoder = make_decoder(cfg.eval.decoder, model, mmi, max_len, beam_size=cfg.eval.beam_size)

    outputs = parallel_map(decoder, queries, cfg.eval.workers)
    atomic_write_text(out, "".join(decode(r, model.vocab) + "\n" for r in outputs))
    atomic_write_text(_sibling(out, ".resolved-config.txt"), render_run_config(cfg))
    logger.info("wrote %d responses to %s", len(outputs), out)
    return EXIT_OK


def _cmd_evaluate(cfg: RunConfig) -> int:
    model = load_checkpoint(_require(cfg.paths.checkpoint, "--checkpoint"))
    out_dir = _require(cfg.paths.out, "--out")
    baseline = None
    if cfg.paths.baseline_checkpoint:
        baseline = load_checkpoint(Path(cfg.paths.baseline_checkpoint))
        if baseline.vocab != model.vocab:
            raise UsageError("baseline checkpoint was trained on a different vocabulary")
    queries = _queries(cfg, model)

    layout = read_layout(Path(cfg.paths.layout), model.vocab) if cfg.paths.layout else None
    reverse_sources = None
    if cfg.paths.reverse_queries:
        reverse_sources = read_queries(Path(cfg.paths.reverse_queries), model.vocab, max_len=cfg.data.max_len)
    fingerprint = None
    if cfg.paths.corpus:
        fingerprint = corpus_fingerprint(load_corpus(Path(cfg.paths.corpus), model.vocab, max_len=cfg.data.max_len))

    report = evaluate_systems(
        model,
        _convert(_mmi_from_options, cfg.mmi),
        queries,
        out_dir,
        baseline=baseline,
        max_len=_decode_len(cfg, model),
        workers=cfg.eval.workers,
        latency_repetitions=cfg.eval.latency_repetitions,
        seed=cfg.seed,
        corpus_fingerprint=fingerprint,
        layout=layout,
        reverse_sources=reverse_sources,
        config_echo=flatten_run_config(cfg),
    )
    atomic_write_text(ReportLayout(out_dir).resolved_config, render_run_config(cfg))
    for s in report.systems:
        print(f"{s.name}\tdistinct-1={s.distinct_1:.4f}\tdistinct-2={s.distinct_2:.4f}\tlatency={s.latency_ms:.3f}ms")
    return EXIT_OK


def _cmd_bench(cfg: RunConfig) -> int:
    model = load_checkpoint(_require(cfg.paths.checkpoint, "--checkpoint"))
    out = ReportLayout(_require(cfg.paths.out, "--out"))
    queries = _queries(cfg, model)
    report = run_benchmark(
        model,
        _convert(_mmi_from_options, cfg.mmi),
        queries,
        nbests=cfg.eval.bench_nbest,
        repetitions=cfg.eval.bench_repetitions,
        max_len=_decode_len(cfg, model),
        seed=cfg.seed,
    )
    report.write(out.bench_json)
    atomic_write_text(out.resolved_config, render_run_config(cfg))
    for line in report.to_lines():
        print(line)
    return EXIT_OK


_COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "synth-data": _cmd_synth_data,
    "train": _cmd_train,
    "generate": _cmd_generate,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
}

# Commands whose --out names a file; the others write into an --out directory.
_FILE_OUTPUT = frozenset({"synth-data", "generate"})


def _log_dir(command: str, out: Path) -> Path:
    return out.parent if command in _FILE_OUTPUT else out


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else sys.argv[1:])
        cfg = resolve_config(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure_console_logging(args.log_level)
    log_file = None
    try:
        if cfg.paths.out:
            log_file = ensure_file_logging(log_dir=_log_dir(args.command, Path(cfg.paths.out)))
        return _COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DalError, OSError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if log_file is not None:
            detach_file_logging(log_file)


def main(argv: list[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
