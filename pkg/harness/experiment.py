import logging
import time
from dataclasses import dataclass
from pathlib import Path

from core.corpus import Corpus, split_corpus
from core.embeddings import EmbeddingTable
from harness.checkpoint import load_checkpoint, save_checkpoint
from harness.config import TrainConfig
from harness.evaluation import DEFAULT_METRICS, evaluate
from harness.report import RunReport
from harness.rewards import build_reward
from harness.training import RunState, run_schedule
from simscore.reward_model import RewardModel, save_reward_model
from simscore.training import ScorerConfig, heldout_spearman, make_similarity_pairs, train_scorer


logger = logging.getLogger(__name__)


@dataclass
class Splits:
    train: Corpus
    val: Corpus
    test: Corpus


def make_splits(corpus: Corpus, config: TrainConfig) -> Splits:
    train, val, test = split_corpus(corpus, config.splits, config.seed)
    return Splits(train, val, test)


def prepare_reward_model(config: TrainConfig, train: Corpus, emb: EmbeddingTable, out_dir: str | Path | None = None) -> RewardModel:
    """Trains a similarity scorer on synthetic pairs from the training split and freezes it."""
    # held-out pairs come on top of the scorer_pairs used for fitting
    held_out = max(config.scorer_pairs // 5, 1)
    pairs = make_similarity_pairs(train, config.scorer_pairs + held_out, config.seed)
    scorer_config = ScorerConfig(
        kind=config.scorer_kind,
        cell=config.scorer_cell,
        d_h=config.scorer_d_h,
        epochs=config.scorer_epochs,
        lr=config.scorer_lr,
        seed=config.seed,
        aggregation=config.aggregation,
        granularity=config.granularity,
    )
    model = train_scorer(pairs[held_out:], scorer_config, emb)
    logger.info("reward model held-out spearman %.3f", heldout_spearman(model, pairs[:held_out], emb))
    if out_dir is not None:
        save_reward_model(model, Path(out_dir) / "reward_model.bin")
    return model


def run_experiment(
    config: TrainConfig,
    corpus: Corpus,
    emb: EmbeddingTable | None = None,
    reward_model: RewardModel | None = None,
    out_dir: str | Path | None = None,
    resume: str | Path | None = None,
    verbose: bool = True,
) -> RunReport:
    """
    Runs the full schedule (pretraining, critic pretraining, joint training) and evaluates
    the final policy on the validation and test splits.

    With `out_dir`, a checkpoint is written at every epoch boundary and the report is saved there.
    With `resume`, the run continues from that checkpoint instead of starting fresh.
    """
    started = time.perf_counter()
    splits = make_splits(corpus, config)

    if config.reward == "trl" and reward_model is None:
        if emb is None:
            raise ValueError("reward 'trl' requires word embeddings")
        reward_model = prepare_reward_model(config, splits.train, emb, out_dir)
    reward_fn = build_reward(config, splits.train, emb, reward_model)

    if resume is not None:
        state = load_checkpoint(resume)
        if state.config.hash() != config.hash():
            raise ValueError("checkpoint was written with a different config")
    else:
        state = RunState.create(config, len(corpus.vocabulary), corpus.feature_dim)

    on_epoch = None
    if out_dir is not None:
        checkpoint_path = Path(out_dir) / "checkpoint.bin"
        on_epoch = lambda s: save_checkpoint(s, checkpoint_path)

    frozen_before = reward_model.checksum() if reward_model is not None else None
    run_schedule(state, splits.train, reward_fn, on_epoch=on_epoch, verbose=verbose)
    if reward_model is not None and reward_model.checksum() != frozen_before:
        raise RuntimeError("reward model parameters changed during training")

    metrics = list(DEFAULT_METRICS) if emb is not None else [m for m in DEFAULT_METRICS if m not in ("wmd", "cos")]
    models = None
    if reward_model is not None:
        metrics.append("trl")
        models = {"trl": reward_model}

    tables = {}
    for name, split in (("val", splits.val), ("test", splits.test)):
        tables[name] = evaluate(
            state.policy,
            split,
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

    report = RunReport(
        config=config.to_dict(),
        config_hash=config.hash(),
        seed=config.seed,
        losses={k: list(v) for k, v in state.history.items()},
        tables=tables,
        wall_clock=time.perf_counter() - started,
    )
    if out_dir is not None:
        report.save(out_dir)
    return report
