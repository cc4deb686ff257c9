import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr
from tqdm import tqdm

from core.corpus import Corpus, TokenSequence
from core.embeddings import EmbeddingTable
from core.generator import ATTRIBUTE_LEXICON, OBJECT_LEXICON
from nn import tensor as T
from nn.params import adam_step
from nn.tensor import Tape, backward
from simscore.encoders import CellKind, EncoderKind, encode_batch
from simscore.reward_model import Granularity, RewardModel, build_reward_model
from simscore.scorer import pair_score_tensor
from transport.wmd import Aggregation


logger = logging.getLogger(__name__)

SimilarityPair = tuple[TokenSequence, TokenSequence, float]

MIN_PAIRS = 100


@dataclass(frozen=True)
class ScorerConfig:
    kind: EncoderKind = "bigru_maxpool"
    cell: CellKind = "gru"
    d_h: int = 32
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-2
    seed: int = 0
    aggregation: Aggregation = "mean"
    granularity: Granularity = "terminal"
    progress: bool = False


def default_concepts() -> set[str]:
    return {w for w, _ in OBJECT_LEXICON} | {w for w, _ in ATTRIBUTE_LEXICON}


def _concept_overlap(a: set[int], b: set[int]) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def make_similarity_pairs(
    corpus: Corpus,
    n_pairs: int,
    seed: int,
    concepts: set[str] | None = None,
) -> list[SimilarityPair]:
    """
    Builds labelled caption pairs for scorer training.

    Half of the pairs are two references of the same scene, the other half come from two
    random scenes. The label is the Jaccard overlap of the concept words both captions mention.

    Raises:
        ValueError: If the corpus is empty or n_pairs < 1.
    """
    if len(corpus) == 0:
        raise ValueError("cannot build similarity pairs from an empty corpus")
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")

    vocab = corpus.vocabulary
    concepts = default_concepts() if concepts is None else concepts
    concept_ids = {vocab.lookup(w) for w in concepts if w in vocab}

    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(n_pairs):
        first = corpus.scenes[int(rng.integers(len(corpus)))]
        second = first if k % 2 == 0 else corpus.scenes[int(rng.integers(len(corpus)))]
        a = first.references[int(rng.integers(len(first.references)))]
        b = second.references[int(rng.integers(len(second.references)))]
        label = _concept_overlap(set(a) & concept_ids, set(b) & concept_ids)
        pairs.append((list(a), list(b), label))
    return pairs


def score_pairs(model: RewardModel, pairs: Sequence[SimilarityPair], emb: EmbeddingTable, batch_size: int = 64) -> np.ndarray:
    scores = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        h1 = encode_batch(model.encoder, [a for a, _, _ in chunk], emb)
        h2 = encode_batch(model.encoder, [b for _, b, _ in chunk], emb)
        scores.append(pair_score_tensor(model.scorer, h1, h2).data)
    return np.concatenate(scores) if scores else np.zeros(0)


def mean_squared_error(model: RewardModel, pairs: Sequence[SimilarityPair], emb: EmbeddingTable) -> float:
    labels = np.array([y for _, _, y in pairs])
    return float(np.mean((score_pairs(model, pairs, emb) - labels) ** 2))


def heldout_spearman(model: RewardModel, pairs: Sequence[SimilarityPair], emb: EmbeddingTable) -> float:
    """Spearman rank correlation between model scores and labels."""
    labels = np.array([y for _, _, y in pairs])
    result = spearmanr(score_pairs(model, pairs, emb), labels)
    return float(result.statistic)


def _batch_loss(model: RewardModel, chunk: Sequence[SimilarityPair], emb: EmbeddingTable):
    h1 = encode_batch(model.encoder, [a for a, _, _ in chunk], emb)
    h2 = encode_batch(model.encoder, [b for _, b, _ in chunk], emb)
    diff = T.sub(pair_score_tensor(model.scorer, h1, h2), np.array([y for _, _, y in chunk]))
    return T.mul(T.total(T.mul(diff, diff)), 1.0 / len(chunk))


def train_scorer(pairs: Sequence[SimilarityPair], config: ScorerConfig, emb: EmbeddingTable) -> RewardModel:
    """
    Fits an encoder and scoring head to similarity labels by minimizing the mean squared error.

    Args:
        pairs (Sequence[SimilarityPair]): (sentence A, sentence B, label in [0, 1]) triples.
        config (ScorerConfig): Architecture and optimizer settings.
        emb (EmbeddingTable): Word embeddings, kept fixed.

    Returns:
        RewardModel: The trained model, frozen. `history` holds the MSE before training and after each epoch.

    Raises:
        ValueError: If fewer than 100 pairs are given or a label lies outside [0, 1].
    """
    if len(pairs) < MIN_PAIRS:
        raise ValueError(f"at least {MIN_PAIRS} pairs are required, got {len(pairs)}")
    labels = np.array([y for _, _, y in pairs], dtype=np.float64)
    if np.any(labels < 0) or np.any(labels > 1):
        raise ValueError("similarity labels must lie in [0, 1]")
    if np.ptp(labels) == 0:
        logger.warning("all %d similarity labels equal %.3f; the scorer cannot learn a ranking", len(pairs), labels[0])

    model = build_reward_model(
        config.kind, emb.dim, config.d_h, config.seed, config.aggregation, config.granularity, config.cell
    )
    rng = np.random.default_rng(config.seed)

    history = [mean_squared_error(model, pairs, emb)]
    logger.info("scorer %s: initial mse %.5f", config.kind, history[0])

    for epoch in tqdm(range(1, config.epochs + 1), desc="scorer", disable=not config.progress):
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), config.batch_size):
            chunk = [pairs[int(i)] for i in order[start : start + config.batch_size]]
            with Tape() as tape:
                loss = _batch_loss(model, chunk, emb)
            backward(tape, loss)
            adam_step(model.store, config.lr)

        history.append(mean_squared_error(model, pairs, emb))
        logger.info("scorer epoch %d/%d: mse %.5f", epoch, config.epochs, history[-1])

    model.store.freeze()
    model.history = history
    return model
