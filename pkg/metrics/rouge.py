from typing import Sequence


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_prf(candidate: Sequence[int], reference: Sequence[int]) -> tuple[float, float, float]:
    """LCS precision, recall and F-score (beta = 1)."""
    if not candidate or not reference:
        raise ValueError("candidate and reference must be non-empty")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0, 0.0, 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return p, r, 2 * p * r / (p + r)


def rouge_l(candidate: Sequence[int], reference: Sequence[int]) -> float:
    """
    ROUGE-L F-score with beta = 1, i.e. the harmonic mean of LCS precision and recall.

    Note that published ROUGE-L tooling often weights recall more heavily; this one does not.
    """
    return rouge_l_prf(candidate, reference)[2]


def rouge_l_multi(candidate: Sequence[int], references: Sequence[Sequence[int]]) -> float:
    if not references:
        raise ValueError("at least one reference is required")
    return max(rouge_l(candidate, ref) for ref in references)
