from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from core.vocabulary import END_ID, START_ID


class StepPolicy(Protocol):
    def start(self, context) -> Any: ...

    def step(self, token: int, state: Any) -> tuple[np.ndarray, Any]: ...


@dataclass
class _Hypothesis:
    score: float
    tokens: tuple[int, ...]
    state: Any
    finished: bool

    def key(self) -> tuple:
        return (-self.score, self.tokens)


def beam_decode(
    policy: StepPolicy,
    context,
    beam_width: int,
    max_len: int,
    end_id: int = END_ID,
    start_id: int = START_ID,
) -> list[int]:
    """
    Length-completed beam search over summed log-probabilities.

    Finished hypotheses stay in the pool unchanged until every kept hypothesis has
    finished or max_len is reached. Equal scores are ordered by token sequence, so
    lower token ids win first and then shorter sequences.

    Args:
        policy (StepPolicy): Object with `start(context)` and `step(token, state) -> (log_probs, state)`.
        context: Conditioning input passed to `policy.start`.
        beam_width (int): Number of hypotheses kept per step.
        max_len (int): Maximum number of tokens.

    Returns:
        list[int]: The best token sequence, including the end marker if one was emitted.

    Raises:
        ValueError: If beam_width < 1 or max_len < 1.
    """
    if beam_width < 1:
        raise ValueError(f"beam width must be >= 1, got {beam_width}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")

    beams = [_Hypothesis(0.0, (), policy.start(context), False)]
    for _ in range(max_len):
        pool = []
        for hyp in beams:
            if hyp.finished:
                pool.append(hyp)
                continue
            last = hyp.tokens[-1] if hyp.tokens else start_id
            log_probs, state = policy.step(last, hyp.state)
            for token, lp in enumerate(np.asarray(log_probs, dtype=np.float64)):
                pool.append(
                    _Hypothesis(hyp.score + float(lp), hyp.tokens + (token,), state, token == end_id)
                )
        beams = sorted(pool, key=_Hypothesis.key)[:beam_width]
        if all(h.finished for h in beams):
            break

    return list(beams[0].tokens)


def greedy_decode(policy: StepPolicy, context, max_len: int) -> list[int]:
    return beam_decode(policy, context, 1, max_len)
