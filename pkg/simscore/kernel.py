import math
from typing import Sequence

import numpy as np
from scipy.special import expit

from core.embeddings import EmbeddingTable
from core.errors import DataError
from core.vocabulary import content
from metrics.brevity import BrevityMode, brevity_penalty
from transport.wmd import Aggregation, aggregate


def kernel_cosine(
    candidate: Sequence[int],
    reference: Sequence[int],
    emb: EmbeddingTable,
    k: int = 1,
    bp_mode: BrevityMode = "standard",
) -> float:
    """
    Sliding-kernel cosine similarity in (0, 1).

    Each reference position i is compared with candidate positions j within k of i
    (clamped to the candidate), weighted by exp(-|i - j|). The sum is scaled by
    k / T_ref and the brevity penalty, then squashed with a sigmoid.

    Raises:
        ValueError: If k < 1.
        DataError: If either sequence has no content tokens.
    """
    if k < 1:
        raise ValueError(f"window span k must be >= 1, got {k}")
    ref, cand = content(reference), content(candidate)
    if not ref or not cand:
        raise DataError("empty content")

    er = emb.rows(ref)
    ec = emb.rows(cand)
    er = er / np.maximum(np.linalg.norm(er, axis=1, keepdims=True), 1e-12)
    ec = ec / np.maximum(np.linalg.norm(ec, axis=1, keepdims=True), 1e-12)
    cosines = er @ ec.T

    total = 0.0
    for i in range(len(ref)):
        for j in range(max(0, i - k), min(len(cand) - 1, i + k) + 1):
            total += math.exp(-abs(i - j)) * cosines[i, j]

    bp = brevity_penalty(len(cand), len(ref), bp_mode)
    return float(expit((k / len(ref)) * bp * total))


def kernel_cosine_multi(
    candidate: Sequence[int],
    references: Sequence[Sequence[int]],
    emb: EmbeddingTable,
    k: int = 1,
    aggregation: Aggregation = "mean",
    bp_mode: BrevityMode = "standard",
) -> float:
    return aggregate([kernel_cosine(candidate, ref, emb, k, bp_mode) for ref in references], aggregation)
