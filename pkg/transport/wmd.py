import math
from collections import Counter
from typing import Literal, Sequence

import numpy as np
from scipy.special import expit

from core.embeddings import EmbeddingTable
from core.errors import DataError
from core.vocabulary import content
from metrics.brevity import BrevityMode, brevity_penalty
from transport.emd import Histogram, emd


Similarity = Literal["exp", "reciprocal"]
Aggregation = Literal["mean", "max"]


def nbow(ids: Sequence[int]) -> Histogram:
    """Normalized bag-of-words over the content tokens of a sequence."""
    tokens = content(ids)
    if not tokens:
        raise DataError("empty content")
    counts = Counter(tokens)
    support = sorted(counts)
    weights = np.array([counts[t] for t in support], dtype=np.float64) / len(tokens)
    return Histogram(weights=weights, support=support)


def wmd(x: Sequence[int], y: Sequence[int], emb: EmbeddingTable) -> float:
    """
    Word mover's distance: EMD between the nBOW histograms with Euclidean embedding costs.

    Raises:
        DataError: If either sequence has no content tokens.
    """
    hx, hy = nbow(x), nbow(y)
    ex, ey = emb.rows(hx.support), emb.rows(hy.support)
    cost = np.linalg.norm(ex[:, None, :] - ey[None, :, :], axis=2)
    distance, _ = emd(hx, hy, cost)
    return distance


def similarity(distance: float, transform: Similarity = "exp") -> float:
    match transform:
        case "exp":
            return math.exp(-distance)
        case "reciprocal":
            return 1.0 / (1.0 + distance)
        case _:
            raise ValueError(f"unknown similarity transform: {transform}")


def wmd_reward_single(
    candidate: Sequence[int],
    reference: Sequence[int],
    emb: EmbeddingTable,
    transform: Similarity = "exp",
    bp_mode: BrevityMode = "standard",
) -> float:
    """sigmoid(BP * gamma(wmd)) against one reference."""
    distance = wmd(candidate, reference, emb)
    bp = brevity_penalty(len(content(candidate)), len(content(reference)), bp_mode)
    return float(expit(bp * similarity(distance, transform)))


def wmd_reward(
    candidate: Sequence[int],
    references: Sequence[Sequence[int]] | Sequence[int],
    emb: EmbeddingTable,
    aggregation: Aggregation = "mean",
    transform: Similarity = "exp",
    bp_mode: BrevityMode = "standard",
) -> float:
    """
    WMD-based reward in (0, 1), aggregated over one or more references.

    Args:
        candidate (Sequence[int]): Candidate ids.
        references: A single reference or a list of references.
        emb (EmbeddingTable): Normalized embeddings.
        aggregation (str, optional): "mean" or "max" over references. Defaults to "mean".
        transform (str, optional): Distance-to-similarity map, "exp" or "reciprocal". Defaults to "exp".
        bp_mode (str, optional): Brevity penalty mode. Defaults to "standard".
    """
    if references and isinstance(references[0], (int, np.integer)):
        references = [references]
    scores = [wmd_reward_single(candidate, ref, emb, transform, bp_mode) for ref in references]
    return aggregate(scores, aggregation)


def aggregate(scores: list[float], aggregation: Aggregation) -> float:
    if not scores:
        raise ValueError("at least one reference is required")
    match aggregation:
        case "mean":
            return sum(scores) / len(scores)
        case "max":
            return max(scores)
        case _:
            raise ValueError(f"unknown aggregation: {aggregation}")
