import logging
from typing import Sequence

import numpy as np

from agent.beam import StepPolicy, beam_decode
from core.corpus import Corpus
from core.embeddings import EmbeddingTable
from core.vocabulary import content
from metrics.bleu import corpus_bleu
from metrics.cider import build_idf, cider
from metrics.rouge import rouge_l_multi
from simscore.kernel import kernel_cosine_multi
from simscore.reward_model import RewardModel, trl_reward
from transport.wmd import wmd_reward
from harness.pool import run_pool


logger = logging.getLogger(__name__)

METRIC_NAMES = ("rouge_l", "bleu1", "bleu2", "bleu3", "bleu4", "cider", "wmd", "cos", "trl")
DEFAULT_METRICS = ("rouge_l", "bleu1", "bleu2", "bleu3", "bleu4", "cider", "wmd", "cos")


def parse_metrics(text: str) -> list[str]:
    """Comma-separated metric list; `bleu` expands to bleu1..bleu4."""
    names = []
    for name in (part.strip().lower() for part in text.split(",")):
        if not name:
            continue
        names.extend(["bleu1", "bleu2", "bleu3", "bleu4"] if name == "bleu" else [name])
    return names


def decode_corpus(
    policy: StepPolicy,
    corpus: Corpus,
    beam: int,
    max_len: int,
    workers: int = 1,
    progress: bool = False,
) -> list[list[int]]:
    """Beam-decodes every scene and returns the content tokens of each caption."""
    return run_pool(
        lambda scene: content(beam_decode(policy, scene.features, beam, max_len)),
        corpus.scenes,
        workers,
        desc="decoding",
        progress=progress,
    )


def score_captions(
    captions: Sequence[Sequence[int]],
    reference_sets: Sequence[Sequence[Sequence[int]]],
    metrics: Sequence[str],
    emb: EmbeddingTable | None = None,
    reward_models: dict[str, RewardModel] | None = None,
    aggregation: str = "mean",
    kernel_span: int = 1,
    bp_mode: str = "standard",
) -> dict[str, float]:
    """
    Corpus-level metric table for already decoded captions, scaled by 100 and rounded to 2 decimals.

    Raises:
        ValueError: On an unknown metric, or a metric whose embeddings or reward model is missing.
    """
    _check_metrics(metrics, emb, reward_models)
    if len(captions) != len(reference_sets):
        raise ValueError(f"misaligned lists: {len(captions)} captions vs {len(reference_sets)} reference sets")

    table = {}
    for name in metrics:
        match name:
            case "rouge_l":
                value = _mean(rouge_l_multi(c, refs) if c else 0.0 for c, refs in zip(captions, reference_sets))
            case "bleu1" | "bleu2" | "bleu3" | "bleu4":
                value = corpus_bleu(captions, reference_sets, max_n=int(name[-1]))
            case "cider":
                value, _ = cider(captions, reference_sets, build_idf(reference_sets))
            case "wmd":
                value = _mean(
                    wmd_reward(c, list(refs), emb, aggregation, bp_mode=bp_mode) if c else 0.0
                    for c, refs in zip(captions, reference_sets)
                )
            case "cos":
                value = _mean(
                    kernel_cosine_multi(c, refs, emb, kernel_span, aggregation, bp_mode) if c else 0.0
                    for c, refs in zip(captions, reference_sets)
                )
            case "trl":
                model = reward_models["trl"]
                value = _mean(trl_reward(model, c, refs, emb) for c, refs in zip(captions, reference_sets))
        table[name] = round(100.0 * value, 2)
    return table


def evaluate(
    policy: StepPolicy,
    corpus: Corpus,
    metrics: Sequence[str],
    beam: int,
    emb: EmbeddingTable | None = None,
    reward_models: dict[str, RewardModel] | None = None,
    max_len: int = 16,
    aggregation: str = "mean",
    kernel_span: int = 1,
    workers: int = 1,
    bp_mode: str = "standard",
) -> dict[str, float]:
    """
    Decodes every scene with beam search and scores the captions against all references.

    An empty metric list returns an empty table without decoding.

    Raises:
        ValueError: On an unknown metric name.
    """
    metrics = list(metrics)
    if not metrics:
        return {}
    _check_metrics(metrics, emb, reward_models)

    captions = decode_corpus(policy, corpus, beam, max_len, workers)
    table = score_captions(
        captions, corpus.reference_sets(), metrics, emb, reward_models, aggregation, kernel_span, bp_mode
    )
    logger.info("evaluation on %s split: %s", corpus.split, table)
    return table


def _check_metrics(metrics: Sequence[str], emb, reward_models) -> None:
    for name in metrics:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric '{name}', expected one of {', '.join(METRIC_NAMES)}")
        if name in ("wmd", "cos", "trl") and emb is None:
            raise ValueError(f"metric '{name}' requires word embeddings")
        if name == "trl" and not (reward_models and "trl" in reward_models):
            raise ValueError("metric 'trl' requires a reward model")


def _mean(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else 0.0
