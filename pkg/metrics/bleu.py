import math
from collections import Counter
from typing import Sequence

from metrics.brevity import brevity_penalty
from metrics.ngrams import ngram_profile


def _closest_ref_len(cand_len: int, references: Sequence[Sequence[int]]) -> int:
    return min((len(r) for r in references), key=lambda n: (abs(n - cand_len), n))


def _clipped_counts(candidate: Sequence[int], references: Sequence[Sequence[int]], n: int) -> tuple[int, int]:
    cand = ngram_profile(candidate, n)
    max_ref: Counter = Counter()
    for ref in references:
        for gram, count in ngram_profile(ref, n).items():
            max_ref[gram] = max(max_ref[gram], count)
    matched = sum(min(count, max_ref[gram]) for gram, count in cand.items())
    return matched, sum(cand.values())


def _check(max_n: int, references) -> None:
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must lie in 1..4, got {max_n}")
    if not references:
        raise ValueError("at least one reference is required")


def bleu(
    candidate: Sequence[int],
    references: Sequence[Sequence[int]],
    max_n: int = 4,
    smoothing: bool = False,
) -> float:
    """
    Sentence-level BLEU with clipped n-gram precisions and the standard brevity penalty.

    Orders longer than the candidate are left out of the geometric mean. With `smoothing`,
    orders n >= 2 use add-one counts so short sentences do not collapse to zero.

    Args:
        candidate (Sequence[int]): Candidate token ids, non-empty.
        references (Sequence[Sequence[int]]): One or more reference sequences.
        max_n (int, optional): Highest n-gram order, 1..4. Defaults to 4.
        smoothing (bool, optional): Add-one smoothing for n >= 2. Defaults to False.

    Returns:
        float: Score in [0, 1].
    """
    _check(max_n, references)
    if not candidate:
        raise ValueError("candidate must be non-empty")

    orders = range(1, min(max_n, len(candidate)) + 1)
    log_sum = 0.0
    for n in orders:
        matched, total = _clipped_counts(candidate, references, n)
        if smoothing and n >= 2:
            matched, total = matched + 1, total + 1
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total)

    bp = brevity_penalty(len(candidate), _closest_ref_len(len(candidate), references))
    return bp * math.exp(log_sum / len(orders))


def corpus_bleu(
    candidates: Sequence[Sequence[int]],
    reference_sets: Sequence[Sequence[Sequence[int]]],
    max_n: int = 4,
) -> float:
    """Corpus-level BLEU: clipped counts and lengths pooled over all sentences, no smoothing."""
    if len(candidates) != len(reference_sets):
        raise ValueError(
            f"misaligned lists: {len(candidates)} candidates vs {len(reference_sets)} reference sets"
        )
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must lie in 1..4, got {max_n}")

    matched = [0] * (max_n + 1)
    totals = [0] * (max_n + 1)
    cand_len = ref_len = 0
    for candidate, references in zip(candidates, reference_sets):
        _check(max_n, references)
        cand_len += len(candidate)
        ref_len += _closest_ref_len(len(candidate), references)
        for n in range(1, max_n + 1):
            m, t = _clipped_counts(candidate, references, n)
            matched[n] += m
            totals[n] += t

    orders = [n for n in range(1, max_n + 1) if totals[n] > 0]
    if not orders or cand_len == 0:
        return 0.0
    if any(matched[n] == 0 for n in orders):
        return 0.0

    log_sum = sum(math.log(matched[n] / totals[n]) for n in orders)
    return brevity_penalty(cand_len, ref_len) * math.exp(log_sum / len(orders))
