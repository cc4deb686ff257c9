import math
from typing import Literal


BrevityMode = Literal["standard", "paper_literal"]


def brevity_penalty(cand_len: int, ref_len: int, mode: BrevityMode = "standard") -> float:
    """
    Length penalty in (0, 1].

    `standard` penalizes candidates shorter than the reference: min(exp(1 - ref/cand), 1).
    `paper_literal` evaluates min(exp(1 - 1/lr), 1) with lr = ref/cand as written, which
    penalizes long candidates instead; it is kept for auditing only.

    Raises:
        ValueError: If either length is below 1 or the mode is unknown.
    """
    if cand_len < 1 or ref_len < 1:
        raise ValueError(f"lengths must be >= 1, got cand={cand_len}, ref={ref_len}")

    match mode:
        case "standard":
            return min(math.exp(1.0 - ref_len / cand_len), 1.0)
        case "paper_literal":
            return min(math.exp(1.0 - cand_len / ref_len), 1.0)
        case _:
            raise ValueError(f"unknown brevity penalty mode: {mode}")
