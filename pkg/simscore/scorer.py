from dataclasses import dataclass

import numpy as np

from nn import tensor as T
from nn.params import ParameterStore
from nn.tensor import Tensor


@dataclass
class PairScorer:
    """
    Scoring head sigmoid(W . [h1, h2, |h1 - h2|, h1 * h2] + b) over two sentence vectors.
    """

    store: ParameterStore
    d_h: int
    prefix: str = "head"

    @classmethod
    def create(cls, store: ParameterStore, d_h: int, prefix: str = "head") -> "PairScorer":
        store.add(f"{prefix}.W", np.zeros((1, 8 * d_h)))
        store.add(f"{prefix}.b", np.zeros((1,)))
        return cls(store, d_h, prefix)

    @property
    def W(self) -> Tensor:
        return self.store[f"{self.prefix}.W"]

    @property
    def b(self) -> Tensor:
        return self.store[f"{self.prefix}.b"]


def pair_features(h1, h2) -> Tensor:
    h1, h2 = T.as_tensor(h1), T.as_tensor(h2)
    if h1.shape != h2.shape:
        raise ValueError(f"dimension mismatch: {h1.shape} vs {h2.shape}")
    return T.concat([h1, h2, T.absolute(T.sub(h1, h2)), T.mul(h1, h2)], axis=-1)


def pair_score_tensor(scorer: PairScorer, h1, h2) -> Tensor:
    features = pair_features(h1, h2)
    if features.shape[-1] != scorer.W.shape[1]:
        raise ValueError(
            f"dimension mismatch: features of size {features.shape[-1]}, head expects {scorer.W.shape[1]}"
        )
    logits = T.add(T.matmul(features, T.transpose(scorer.W)), scorer.b)
    return T.sigmoid(T.reshape(logits, logits.shape[:-1]))


def pair_score(scorer: PairScorer, h1, h2) -> float:
    """Similarity in [0, 1] between two sentence vectors."""
    return float(np.sum(pair_score_tensor(scorer, h1, h2).data))
