from collections import Counter
from typing import Sequence


NGram = tuple[int, ...]
NGramProfile = Counter


def ngram_profile(ids: Sequence[int], n: int) -> NGramProfile:
    """Counts of every n-gram of order n in one sequence."""
    return Counter(tuple(ids[i : i + n]) for i in range(len(ids) - n + 1))


def ngram_profiles(ids: Sequence[int], max_n: int = 4) -> dict[int, NGramProfile]:
    return {n: ngram_profile(ids, n) for n in range(1, max_n + 1)}
