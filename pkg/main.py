import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from core.corpus import Corpus, load_corpus, save_corpus, split_corpus
from core.embeddings import EmbeddingTable, load_embeddings, random_embeddings
from core.generator import GeneratorSpec, generate_synthetic_corpus, write_synthetic_embeddings
from core.vocabulary import Vocabulary, build_vocabulary, tokenize
from harness.checkpoint import load_checkpoint
from harness.config import REWARD_NAMES
from harness.evaluation import DEFAULT_METRICS, METRIC_NAMES, evaluate, parse_metrics, score_captions
from harness.experiment import run_experiment
from harness.report import RunReport, compare_reports, load_report
from input import DataSettings, load_config
from output import print_comparison, print_config, print_metric_tables, print_report, print_settings
from simscore.reward_model import load_reward_model


logger = logging.getLogger("trl")


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="trl",
        description="Actor-critic caption generation with transferable similarity rewards",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Verbose output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    gen = sub.add_parser("gen-data", help="Generate a synthetic captioning corpus", formatter_class=fmt)
    gen.add_argument("--scenes", type=int, default=200, help="Number of scenes")
    gen.add_argument("--objects", type=int, default=8, help="Object lexicon size")
    gen.add_argument("--attributes", type=int, default=4, help="Attribute lexicon size")
    gen.add_argument("--d-img", type=int, default=16, help="Feature dimension")
    gen.add_argument("--noise", type=float, default=0.1, help="Feature noise standard deviation")
    gen.add_argument("--emb-dim", type=int, default=32, help="Dimension of the generated word vectors")
    gen.add_argument("--seed", type=int, default=0, help="Random seed")
    gen.add_argument("--out", required=True, metavar="DIR", help="Output directory")

    train = sub.add_parser("train", help="Train a captioning policy", formatter_class=fmt)
    train.add_argument("--config", metavar="PATH", help="YAML or TOML config file")
    _add_data_flags(train)
    train.add_argument("--reward", choices=REWARD_NAMES, help="Reward of the actor-critic phase")
    train.add_argument("--reward-model", metavar="PATH", help="Frozen reward model checkpoint for the trl reward")
    train.add_argument("--seed", type=int, help="Random seed")
    train.add_argument("--beam", type=int, help="Beam width for evaluation")
    train.add_argument("--workers", type=int, help="Worker threads")
    train.add_argument("--resume", metavar="PATH", help="Continue from a run checkpoint")
    train.add_argument("--out", required=True, metavar="DIR", help="Output directory")

    ev = sub.add_parser("eval", help="Evaluate a checkpoint", formatter_class=fmt)
    ev.add_argument("--checkpoint", required=True, metavar="PATH", help="Run checkpoint")
    _add_data_flags(ev)
    ev.add_argument("--metrics", default=",".join(DEFAULT_METRICS), help="Comma-separated metric list")
    ev.add_argument("--split", choices=["train", "val", "test", "all"], default="test", help="Split to evaluate")
    ev.add_argument("--beam", type=int, help="Beam width (defaults to the checkpoint's config)")
    ev.add_argument("--reward-model", metavar="PATH", help="Reward model for the trl column")
    ev.add_argument("--workers", type=int, default=1, help="Worker threads")
    ev.add_argument("--out", metavar="PATH", help="CSV output path")

    score = sub.add_parser("score", help="Score candidate captions against references", formatter_class=fmt)
    score.add_argument("--candidates", required=True, metavar="PATH", help="JSON-lines candidates")
    score.add_argument("--references", required=True, metavar="PATH", help="JSON-lines references")
    score.add_argument("--metric", required=True, help=f"One of {', '.join(METRIC_NAMES[:-1])}")
    score.add_argument("--embeddings", metavar="PATH", help="Word vectors for wmd and cos")
    score.add_argument("--seed", type=int, default=0, help="Seed for missing word vectors")

    report = sub.add_parser("report", help="Compare two run reports", formatter_class=fmt)
    report.add_argument("baseline", help="Baseline report.json or run directory")
    report.add_argument("candidate", help="Candidate report.json or run directory")

    return parser


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", metavar="PATH", help="Corpus JSON-lines file")
    parser.add_argument("--vocab", metavar="PATH", help="Vocabulary file (defaults to vocab.txt next to the corpus)")
    parser.add_argument("--embeddings", metavar="PATH", help="GloVe-format word vectors")


def _resolve_data(args, settings: DataSettings) -> tuple[Path, Path, str | None]:
    corpus = args.data or settings.corpus
    if corpus is None:
        raise ValueError("no corpus given; pass --data or set data.corpus in the config")
    vocab = args.vocab or settings.vocab or str(Path(corpus).with_name("vocab.txt"))
    return Path(corpus), Path(vocab), args.embeddings or settings.embeddings


def _load_data(corpus_path: Path, vocab_path: Path, emb_path: str | None, dim: int, seed: int) -> tuple[Corpus, EmbeddingTable]:
    vocab = Vocabulary.load(vocab_path)
    corpus = load_corpus(corpus_path, vocab)
    if emb_path is not None:
        emb = load_embeddings(emb_path, vocab, seed=seed)
    else:
        logger.warning("no word vectors given; embedding metrics use seeded random vectors")
        emb = random_embeddings(len(vocab), dim, seed)
    return corpus, emb


def cmd_gen_data(args) -> int:
    spec = GeneratorSpec(
        n_scenes=args.scenes,
        n_objects=args.objects,
        n_attributes=args.attributes,
        d_img=args.d_img,
        noise_std=args.noise,
    )
    print_settings({**asdict(spec), "emb_dim": args.emb_dim, "out": args.out}, args.seed)

    corpus = generate_synthetic_corpus(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / "corpus.jsonl")
    corpus.vocabulary.save(out / "vocab.txt")
    write_synthetic_embeddings(corpus.vocabulary, spec, out / "embeddings.txt", args.emb_dim, args.seed)
    print(f"wrote {len(corpus)} scenes and {len(corpus.vocabulary)} tokens to {out}")
    return 0


def cmd_train(args) -> int:
    config, settings = load_config(args.config)
    config = config.override(reward=args.reward, seed=args.seed, beam=args.beam, workers=args.workers)
    corpus_path, vocab_path, emb_path = _resolve_data(args, settings)
    reward_model_path = args.reward_model or settings.reward_model

    print_config(
        config,
        {"corpus": str(corpus_path), "vocab": str(vocab_path), "embeddings": emb_path, "reward_model": reward_model_path},
    )

    corpus, emb = _load_data(corpus_path, vocab_path, emb_path, config.d_emb, config.seed)
    reward_model = load_reward_model(reward_model_path) if reward_model_path else None
    report = run_experiment(config, corpus, emb, reward_model, out_dir=args.out, resume=args.resume)
    print_report(report)
    return 0


def cmd_eval(args) -> int:
    state = load_checkpoint(args.checkpoint)
    config = state.config.override(beam=args.beam, workers=args.workers)
    corpus_path, vocab_path, emb_path = _resolve_data(args, DataSettings())
    metrics = parse_metrics(args.metrics)

    print_config(config, {"checkpoint": args.checkpoint, "split": args.split, "metrics": ",".join(metrics)})

    corpus, emb = _load_data(corpus_path, vocab_path, emb_path, config.d_emb, config.seed)
    if args.split != "all":
        corpus = dict(zip(("train", "val", "test"), split_corpus(corpus, config.splits, config.seed)))[args.split]
    models = {"trl": load_reward_model(args.reward_model)} if args.reward_model else None

    table = evaluate(
        state.policy,
        corpus,
        metrics,
        config.beam,
        emb,
        models,
        max_len=config.max_len,
        aggregation=config.aggregation,
        kernel_span=config.kernel_span,
        workers=config.workers,
        bp_mode=config.brevity,
    )
    tables = {args.split: table}
    print_metric_tables(tables)
    if args.out:
        report = RunReport(config.to_dict(), config.hash(), config.seed, dict(state.history), tables)
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    return 0


def _read_jsonl(path: str, field: str) -> list[tuple[int, list[list[str]]]]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if field == "tokens" and "tokens" in row:
                    texts = [row["tokens"]]
                else:
                    texts = row["refs"][:1] if field == "tokens" else row["refs"]
                rows.append((int(row.get("id", line_no)), [t.split() if isinstance(t, str) else list(t) for t in texts]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: malformed line ({e})") from e
    return rows


def cmd_score(args) -> int:
    metrics = parse_metrics(args.metric)
    print_settings({"candidates": args.candidates, "references": args.references, "metric": ",".join(metrics)}, args.seed)

    candidates = _read_jsonl(args.candidates, "tokens")
    references = _read_jsonl(args.references, "refs")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates but {len(references)} reference sets")

    vocab = build_vocabulary([c for _, cs in candidates for c in cs] + [r for _, rs in references for r in rs])
    emb = load_embeddings(args.embeddings, vocab, seed=args.seed) if args.embeddings else None
    captions = [tokenize(cs[0], vocab) for _, cs in candidates]
    ref_sets = [[tokenize(r, vocab) for r in rs] for _, rs in references]

    table = score_captions(captions, ref_sets, metrics, emb)
    for name, value in table.items():
        print(f"{name},{value:.2f}")
    return 0


def cmd_report(args) -> int:
    baseline, candidate = load_report(args.baseline), load_report(args.candidate)
    print_settings({"baseline": args.baseline, "candidate": args.candidate}, candidate.seed)
    print_comparison(compare_reports(baseline, candidate), "baseline", "candidate")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "score": cmd_score,
    "report": cmd_report,
}


def run_cli(argv: list[str] | None = None) -> int:
    """
    Parses arguments and dispatches to a subcommand.

    Returns:
        int: 0 on success, 1 on a usage error, 2 on a data or model error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(run_cli())
