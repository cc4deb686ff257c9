import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from metrics.ngrams import NGram, ngram_profiles


CIDER_MAX_N = 4


@dataclass
class IdfTable:
    """
    Inverse document frequencies of reference n-grams, one document per reference set.

    Attributes:
        weights (dict[NGram, float]): ln(n_docs / doc_freq) per n-gram.
        n_docs (int): Number of reference sets the table was built from.
        unseen (float): Weight of n-grams absent from every reference set.
    """

    weights: dict[NGram, float] = field(default_factory=dict)
    n_docs: int = 0
    unseen: float = 0.0

    def weight(self, gram: NGram) -> float:
        return self.weights.get(gram, self.unseen)

    def scaled(self, factor: float) -> "IdfTable":
        return IdfTable({g: w * factor for g, w in self.weights.items()}, self.n_docs, self.unseen * factor)


def build_idf(reference_sets: Sequence[Sequence[Sequence[int]]], max_n: int = CIDER_MAX_N) -> IdfTable:
    doc_freq: Counter = Counter()
    for references in reference_sets:
        grams = set()
        for ref in references:
            for profile in ngram_profiles(ref, max_n).values():
                grams.update(profile)
        doc_freq.update(grams)

    n_docs = len(reference_sets)
    # n-grams never seen on the reference side count as document frequency 1
    unseen = math.log(n_docs) if n_docs > 0 else 0.0
    return IdfTable({g: math.log(n_docs / df) for g, df in doc_freq.items()}, n_docs, unseen)


def _tfidf(ids: Sequence[int], idf: IdfTable, max_n: int) -> list[dict[NGram, float]]:
    return [
        {g: count * idf.weight(g) for g, count in profile.items()}
        for profile in ngram_profiles(ids, max_n).values()
    ]


def _cosine(a: dict[NGram, float], b: dict[NGram, float]) -> float:
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0 or norm_b == 0:
        return 0.0
    dot = sum(v * b[g] for g, v in a.items() if g in b)
    return dot / (norm_a * norm_b)


def cider_sentence(
    candidate: Sequence[int],
    references: Sequence[Sequence[int]],
    idf: IdfTable,
    max_n: int = CIDER_MAX_N,
) -> float:
    cand_vecs = _tfidf(candidate, idf, max_n)
    ref_vecs = [_tfidf(ref, idf, max_n) for ref in references]
    per_order = [
        sum(_cosine(cand_vecs[n], ref[n]) for ref in ref_vecs) / len(ref_vecs)
        for n in range(max_n)
    ]
    return 10.0 * sum(per_order) / max_n


def cider(
    candidates: Sequence[Sequence[int]],
    reference_sets: Sequence[Sequence[Sequence[int]]],
    idf: IdfTable,
) -> tuple[float, list[float]]:
    """
    Plain CIDEr (no length penalty): per order n = 1..4 the tf-idf cosine between candidate
    and each reference, averaged over references and orders, times 10.

    Returns:
        tuple[float, list[float]]: Corpus mean and per-sentence scores.

    Raises:
        ValueError: If the lists are not aligned.
    """
    if len(candidates) != len(reference_sets):
        raise ValueError(
            f"misaligned lists: {len(candidates)} candidates vs {len(reference_sets)} reference sets"
        )
    scores = [cider_sentence(c, refs, idf) for c, refs in zip(candidates, reference_sets)]
    return (sum(scores) / len(scores) if scores else 0.0), scores
