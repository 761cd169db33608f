"""Command-line entry point.

Subcommands cover the individual stages (ingest/synth, split, train, eval,
explain, aggregate, report) plus `pipeline`, which chains them. Stages
communicate through files under the output directory only, so any stage can
be re-run in isolation. Every stage writes a manifest_<stage>.json recording
the resolved configuration and the files it emitted.

Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .aggregate import SUMMARY_FILE_NAME, aggregate, lexicon_report, read_lexicons
from .classifier import (
    Hyperparams,
    NativeScorer,
    RandomBaselineScorer,
    Scorer,
    UniformScorer,
    load_model,
    save_model,
    train,
)
from .config import SCORER_KINDS, RunConfig, resolve_config, write_run_manifest
from .corpus import (
    SCHEME_NAMES,
    SyntheticSpec,
    generate_synthetic,
    ingest_with_stats,
    place_names,
    read_dataset,
    sample_splits,
    scheme_from_name,
    write_dataset,
    write_gazetteer,
)
from .errors import ToolkitError, ValidationError
from .evaluate import (
    MatchPolicy,
    Metrics,
    evaluate,
    load_gazetteer,
    place_name_share,
    run_report,
)
from .explain import explain_corpus, read_explanations, write_explanations
from .wire import external_scorer_connect

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

STAGE_NAMES = ("ingest", "synth", "split", "train", "eval", "explain", "aggregate", "report")


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here is 1.
    def error(self, message: str) -> None:
        raise CliUsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("configuration (flags override file and environment)")
    g.add_argument("--config", metavar="FILE", help="key = value config file")
    g.add_argument("--scheme", choices=SCHEME_NAMES, help="region scheme for ingest/train")
    g.add_argument("--input", dest="input", metavar="FILE",
                   help="raw corpus to ingest (omit to synthesize)")
    g.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
    g.add_argument("--gazetteer", metavar="FILE", help="place-name list for the report")
    g.add_argument("--seed", type=int, help="base seed for all stages")
    g.add_argument("--workers", type=int, help="worker processes for explain")
    g.add_argument("--epochs", type=int, help="training epochs")
    g.add_argument("--batch", dest="batch_size", type=int, help="training batch size")
    g.add_argument("--max-len", dest="max_len", type=int, help="token truncation length")
    g.add_argument("--learning-rate", dest="learning_rate", type=float, help="SGD step size")
    g.add_argument("--l2", type=float, help="L2 penalty on weights")
    g.add_argument("--min-count", dest="min_count", type=int,
                   help="minimum training frequency for vocabulary words")
    g.add_argument("--top-words", dest="top_words", type=int,
                   help="words kept per instance explanation")
    g.add_argument("--lexicon-size", dest="lexicon_size", type=int,
                   help="words kept per class lexicon")
    g.add_argument("--min-support", dest="min_support", type=int,
                   help="minimum instances a lexicon word must explain")
    g.add_argument("--train-per-class", dest="train_per_class", type=int)
    g.add_argument("--dev-per-class", dest="dev_per_class", type=int)
    g.add_argument("--test-per-class", dest="test_per_class", type=int)
    g.add_argument("--classes", dest="synth_classes", type=int,
                   help="synthetic corpus: number of classes")
    g.add_argument("--shared-vocab", dest="synth_shared_vocab", type=int,
                   help="synthetic corpus: shared vocabulary size")
    g.add_argument("--markers-per-class", dest="synth_markers_per_class", type=int)
    g.add_argument("--marker-prob", dest="synth_marker_prob", type=float,
                   help="synthetic corpus: marker injection probability")
    g.add_argument("--place-names-per-class", dest="synth_place_names_per_class", type=int)
    g.add_argument("--posts-per-class", dest="synth_posts_per_class", type=int)
    g.add_argument("--mean-length", dest="synth_mean_length", type=float,
                   help="synthetic corpus: mean post length in tokens")
    g.add_argument("--scorer", choices=SCORER_KINDS, help="scorer used by eval/explain")
    g.add_argument("--cmd", dest="scorer_cmd", metavar="COMMAND",
                   help="external scorer subprocess command")
    g.add_argument("--address", dest="scorer_address", metavar="HOST:PORT",
                   help="external scorer TCP address")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regiolex",
                     description="Region classification with leave-one-out word lexicons.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    helps = {
        "ingest": "label a raw geolocated corpus and write the dataset file",
        "synth": "generate a planted-marker synthetic corpus plus gazetteer",
        "split": "draw per-class train/dev/test splits",
        "train": "train the native classifier and save the model",
        "eval": "score the dev split and write metrics",
        "explain": "run leave-one-out explanations over the test split",
        "aggregate": "build per-class lexicons from explanations",
        "report": "render text/JSON reports and figures",
        "pipeline": "run all stages in order",
    }
    for name in STAGE_NAMES + ("pipeline",):
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        _add_config_flags(p)
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    out = {}
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            out[f.name] = value
    return out


def _paths(out: Path) -> dict[str, Path]:
    return {
        "corpus": out / "data" / "corpus.jsonl",
        "gazetteer": out / "data" / "corpus.gazetteer.txt",
        "train": out / "data" / "train.jsonl",
        "dev": out / "data" / "dev.jsonl",
        "test": out / "data" / "test.jsonl",
        "model": out / "model.json",
        "metrics": out / "metrics.json",
        "explanations": out / "explanations.jsonl",
        "lexicons": out / "lexicons",
        "report": out / "report",
    }


def _synth_spec(cfg: RunConfig) -> SyntheticSpec:
    return SyntheticSpec(
        n_classes=cfg.synth_classes,
        shared_vocab_size=cfg.synth_shared_vocab,
        markers_per_class=cfg.synth_markers_per_class,
        marker_injection_prob=cfg.synth_marker_prob,
        place_names_per_class=cfg.synth_place_names_per_class,
        posts_per_class=cfg.synth_posts_per_class,
        mean_post_length=cfg.synth_mean_length,
        seed=cfg.seed,
    )


def stage_synth(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    spec = _synth_spec(cfg)
    data = generate_synthetic(spec)
    paths["corpus"].parent.mkdir(parents=True, exist_ok=True)
    write_dataset(data, paths["corpus"])
    write_gazetteer(place_names(spec), paths["gazetteer"])
    logger.info("synthesized %d instances over %d classes", len(data), cfg.synth_classes)
    return [paths["corpus"], paths["gazetteer"]]


def stage_ingest(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    if not cfg.input:
        raise ValidationError("ingest requires an input corpus (--input or config key input)")
    scheme = scheme_from_name(cfg.scheme)
    data, stats = ingest_with_stats(cfg.input, scheme)
    paths["corpus"].parent.mkdir(parents=True, exist_ok=True)
    write_dataset(data, paths["corpus"])
    logger.info(
        "ingested %d of %d records (%d malformed, %d empty after normalization)",
        stats.kept, stats.read, stats.malformed, stats.dropped_empty,
    )
    return [paths["corpus"]]


def stage_split(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    data = read_dataset(paths["corpus"])
    splits = sample_splits(
        data,
        {"train": cfg.train_per_class, "dev": cfg.dev_per_class, "test": cfg.test_per_class},
        cfg.seed,
    )
    written = []
    for key in ("train", "dev", "test"):
        write_dataset(splits[key], paths[key])
        written.append(paths[key])
    return written


def stage_train(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    train_data = read_dataset(paths["train"])
    dev_data = read_dataset(paths["dev"])
    hp = Hyperparams(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        max_len=cfg.max_len,
        learning_rate=cfg.learning_rate,
        l2=cfg.l2,
        seed=cfg.seed,
    )
    scheme = scheme_from_name(cfg.scheme)
    # Record the scheme in the model only when the labels actually came from it.
    model_scheme = scheme if scheme.labels == list(train_data.manifest) else None
    model = train(train_data, dev_data, hp, min_count=cfg.min_count, scheme=model_scheme)
    save_model(model, paths["model"])
    return [paths["model"]]


def _make_scorer(
    cfg: RunConfig,
    manifest: list[str],
    paths: dict[str, Path],
    stack: contextlib.ExitStack,
) -> Scorer:
    if cfg.scorer == "native":
        model = load_model(paths["model"])
        if list(model.manifest) != list(manifest):
            raise ValidationError(
                f"model manifest {model.manifest!r} does not match dataset manifest {manifest!r}"
            )
        return NativeScorer(model)
    if cfg.scorer == "uniform":
        return UniformScorer(list(manifest))
    if cfg.scorer == "random":
        return RandomBaselineScorer(list(manifest), seed=cfg.seed)
    target = cfg.scorer_address if cfg.scorer_address else cfg.scorer_cmd
    scorer = external_scorer_connect(target, list(manifest))
    stack.callback(scorer.close)
    return scorer


def stage_eval(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    dev_data = read_dataset(paths["dev"])
    with contextlib.ExitStack() as stack:
        scorer = _make_scorer(cfg, dev_data.manifest, paths, stack)
        metrics = evaluate(scorer, dev_data)
    logger.info("dev accuracy %.4f over %d instances", metrics.accuracy, metrics.n)
    with open(paths["metrics"], "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return [paths["metrics"]]


def stage_explain(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    test_data = read_dataset(paths["test"])
    with contextlib.ExitStack() as stack:
        scorer = _make_scorer(cfg, test_data.manifest, paths, stack)
        explanations, stats = explain_corpus(
            scorer, test_data, top_words=cfg.top_words, workers=cfg.workers
        )
    logger.info("explained %d instances, skipped %d misclassified",
                stats.explained, stats.skipped)
    write_explanations(paths["explanations"], explanations, stats, test_data.manifest)
    return [paths["explanations"]]


def stage_aggregate(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    explanations, _stats, manifest = read_explanations(paths["explanations"])
    lexicons = aggregate(
        explanations, manifest, top_k=cfg.lexicon_size, min_support=cfg.min_support
    )
    for lex in lexicons:
        logger.info("lexicon %s: %d words", lex.label, len(lex.entries))
    return lexicon_report(lexicons, paths["lexicons"])


def stage_report(cfg: RunConfig, paths: dict[str, Path]) -> list[Path]:
    with open(paths["metrics"], encoding="utf-8") as fh:
        metrics = Metrics.from_dict(json.load(fh))
    lexicons = read_lexicons(paths["lexicons"] / SUMMARY_FILE_NAME, metrics.labels)
    gaz_path: Path | None = None
    if cfg.gazetteer:
        gaz_path = Path(cfg.gazetteer)
    elif paths["gazetteer"].exists():
        gaz_path = paths["gazetteer"]
    place = None
    if gaz_path is not None:
        gaz = load_gazetteer(gaz_path, MatchPolicy.EXACT_OR_PREFIX_DERIVATION)
        place = place_name_share(lexicons, gaz)
    return run_report(metrics, lexicons, place, paths["report"])


STAGES = {
    "ingest": stage_ingest,
    "synth": stage_synth,
    "split": stage_split,
    "train": stage_train,
    "eval": stage_eval,
    "explain": stage_explain,
    "aggregate": stage_aggregate,
    "report": stage_report,
}


def _run_stage(name: str, cfg: RunConfig, paths: dict[str, Path], out: Path) -> list[Path]:
    files = STAGES[name](cfg, paths)
    manifest_path = write_run_manifest(cfg, out / f"manifest_{name}.json", name, files)
    return files + [manifest_path]


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:  # --help
        return int(e.code or 0)
    if args.command is None:
        print(parser.format_usage(), file=sys.stderr, end="")
        print("regiolex: error: a command is required", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        cfg = resolve_config(args.config, _overrides_from_args(args))
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = _paths(out)
        if args.command == "pipeline":
            corpus_stage = "ingest" if cfg.input else "synth"
            files: list[Path] = []
            for name in (corpus_stage, "split", "train", "eval", "explain",
                         "aggregate", "report"):
                files.extend(_run_stage(name, cfg, paths, out))
            write_run_manifest(cfg, out / "manifest_pipeline.json", "pipeline", files)
        else:
            _run_stage(args.command, cfg, paths, out)
        return EXIT_OK
    except (ValidationError, ValueError) as e:
        print(f"regiolex: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ToolkitError, OSError) as e:
        print(f"regiolex: failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> int:
    return run_cli()
