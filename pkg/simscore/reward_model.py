import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

from core.embeddings import EmbeddingTable
from core.errors import DataError, ModelError
from core.vocabulary import content
from nn.params import ParameterStore, load_parameters, save_parameters
from simscore.encoders import CELL_KINDS, ENCODER_KINDS, CellKind, SentenceEncoder, encode_batch
from simscore.scorer import PairScorer, pair_score_tensor
from transport.wmd import Aggregation, aggregate


logger = logging.getLogger(__name__)

Granularity = Literal["terminal", "incremental"]

_SNAP_BITS = 40


def snap_score(score: float) -> float:
    """Rounds a score onto a 2^-40 grid so prefix differences add back up exactly."""
    return float(np.ldexp(np.round(np.ldexp(score, _SNAP_BITS)), -_SNAP_BITS))


def step_rewards(
    prefix_score: Callable[[int], float],
    length: int,
    granularity: Granularity,
) -> list[float]:
    """
    Turns a sequence-level score into per-step rewards for an episode of `length` actions.

    `prefix_score(t)` scores the first t actions; the empty prefix scores 0.
    Terminal granularity emits the full score at the last step; incremental emits
    successive prefix differences, which telescope to the full score.
    """
    if length == 0:
        return []
    match granularity:
        case "terminal":
            return [0.0] * (length - 1) + [snap_score(prefix_score(length))]
        case "incremental":
            scores = [0.0] + [snap_score(prefix_score(t)) for t in range(1, length + 1)]
            return [scores[t] - scores[t - 1] for t in range(1, length + 1)]
        case _:
            raise ValueError(f"unknown reward granularity: {granularity}")


@dataclass
class RewardModel:
    """
    Frozen sentence-similarity scorer used as a reward function.

    Attributes:
        encoder (SentenceEncoder): Sentence encoder, sharing `store` with the head.
        scorer (PairScorer): Pairwise scoring head.
        aggregation (Aggregation): How per-reference scores are combined.
        granularity (Granularity): Terminal or incremental per-step rewards.
    """

    encoder: SentenceEncoder
    scorer: PairScorer
    aggregation: Aggregation = "mean"
    granularity: Granularity = "terminal"
    history: list[float] = field(default_factory=list)

    @property
    def store(self) -> ParameterStore:
        return self.encoder.store

    @property
    def frozen(self) -> bool:
        return self.store.frozen

    def checksum(self) -> str:
        return self.store.checksum()


def build_reward_model(
    kind: str,
    d_emb: int,
    d_h: int,
    seed: int = 0,
    aggregation: Aggregation = "mean",
    granularity: Granularity = "terminal",
    cell: CellKind = "gru",
) -> RewardModel:
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    encoder = SentenceEncoder.create(kind, store, d_emb, d_h, rng, cell=cell)
    scorer = PairScorer.create(store, d_h)
    return RewardModel(encoder, scorer, aggregation, granularity)


def _require_frozen(model: RewardModel) -> None:
    if not model.frozen:
        raise ModelError("reward model must be frozen")


def score_batch(
    model: RewardModel,
    candidates: Sequence[Sequence[int]],
    references: Sequence[Sequence[int]],
    emb: EmbeddingTable,
) -> list[float]:
    """Aggregated scores of several candidates against one reference set; empty candidates score 0."""
    _require_frozen(model)
    refs = [content(r) for r in references]
    if not refs or any(not r for r in refs):
        raise DataError("empty content")

    cands = [content(c) for c in candidates]
    live = [i for i, c in enumerate(cands) if c]
    scores = [0.0] * len(cands)
    if not live:
        return scores

    # one sequence per encoder call keeps scores independent of batch composition
    ref_vecs = [_vector(model, r, emb) for r in refs]
    for i in live:
        cand_vec = _vector(model, cands[i], emb)
        pairs = [float(pair_score_tensor(model.scorer, cand_vec, r).data) for r in ref_vecs]
        scores[i] = aggregate(pairs, model.aggregation)
    return scores


def _vector(model: RewardModel, ids: Sequence[int], emb: EmbeddingTable) -> np.ndarray:
    return encode_batch(model.encoder, [ids], emb).data[0]


def trl_reward(
    model: RewardModel,
    candidate: Sequence[int],
    references: Sequence[Sequence[int]],
    emb: EmbeddingTable,
) -> float:
    """
    Similarity of a candidate to its references under a frozen reward model.

    Raises:
        ModelError: If the model is not frozen.
    """
    return snap_score(score_batch(model, [candidate], references, emb)[0])


def trl_step_rewards(
    model: RewardModel,
    actions: Sequence[int],
    references: Sequence[Sequence[int]],
    emb: EmbeddingTable,
) -> list[float]:
    """Per-step rewards for an episode, following the model's granularity."""
    _require_frozen(model)
    if model.granularity == "incremental":
        prefixes = [list(actions[:t]) for t in range(1, len(actions) + 1)]
        scores = score_batch(model, prefixes, references, emb)
        return step_rewards(lambda t: scores[t - 1], len(actions), "incremental")
    return step_rewards(
        lambda t: score_batch(model, [list(actions[:t])], references, emb)[0],
        len(actions),
        model.granularity,
    )


def _sidecar(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_reward_model(model: RewardModel, path: str | Path) -> None:
    _require_frozen(model)
    save_parameters(model.store, path, with_moments=False)
    meta = {
        "kind": model.encoder.kind,
        "cell": model.encoder.cell,
        "d_emb": model.encoder.d_emb,
        "d_h": model.encoder.d_h,
        "aggregation": model.aggregation,
        "granularity": model.granularity,
        "frozen": True,
        "checksum": model.checksum(),
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    logger.info("saved reward model to %s (checksum %s)", path, meta["checksum"][:12])


def load_reward_model(path: str | Path) -> RewardModel:
    """
    Loads a frozen reward model and verifies its checksum against the sidecar.

    Raises:
        DataError: If the sidecar is missing or malformed, or the checksum does not match.
    """
    sidecar = _sidecar(path)
    try:
        meta = json.loads(sidecar.read_text())
    except FileNotFoundError:
        raise DataError(f"missing reward model sidecar '{sidecar}'")
    except json.JSONDecodeError as e:
        raise DataError(f"malformed reward model sidecar '{sidecar}': {e}")

    if meta.get("kind") not in ENCODER_KINDS:
        raise DataError(f"unknown encoder kind in '{sidecar}': {meta.get('kind')}")
    cell = meta.get("cell", "gru")
    if cell not in CELL_KINDS:
        raise DataError(f"unknown recurrent cell in '{sidecar}': {cell}")

    store = load_parameters(path)
    store.freeze()
    if store.checksum() != meta.get("checksum"):
        raise DataError(f"checksum mismatch for reward model '{path}'")

    encoder = SentenceEncoder(meta["kind"], store, int(meta["d_emb"]), int(meta["d_h"]), cell=cell)
    scorer = PairScorer(store, int(meta["d_h"]))
    return RewardModel(encoder, scorer, meta.get("aggregation", "mean"), meta.get("granularity", "terminal"))
