from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from core.embeddings import EmbeddingTable
from core.vocabulary import PAD_ID
from nn import tensor as T
from nn.layers import GRUParams, LSTMParams, gru_cell_step, lstm_cell_step
from nn.params import ParameterStore
from nn.tensor import Tensor


EncoderKind = Literal["bigru_maxpool", "bigru_meanpool", "self_attentive"]
ENCODER_KINDS = ("bigru_maxpool", "bigru_meanpool", "self_attentive")
CellKind = Literal["gru", "lstm"]
CELL_KINDS = ("gru", "lstm")

_MASK_FILL = 1e9


@dataclass
class SentenceEncoder:
    """
    Bidirectional recurrent sentence encoder with max, mean or self-attentive pooling.

    The recurrent cell is a GRU by default; `cell="lstm"` swaps in LSTM cells for both directions.

    Attributes:
        kind (EncoderKind): Pooling variant.
        store (ParameterStore): Store holding the encoder parameters (shared with the scoring head).
        d_emb (int): Input embedding size.
        d_h (int): Hidden size per direction; sentence vectors have 2 * d_h entries.
        prefix (str): Parameter name prefix inside the store.
        cell (CellKind): Recurrent cell, "gru" or "lstm".
    """

    kind: EncoderKind
    store: ParameterStore
    d_emb: int
    d_h: int
    prefix: str = "enc"
    cell: CellKind = "gru"

    @classmethod
    def create(
        cls,
        kind: EncoderKind,
        store: ParameterStore,
        d_emb: int,
        d_h: int,
        rng: np.random.Generator,
        prefix: str = "enc",
        cell: CellKind = "gru",
    ) -> "SentenceEncoder":
        if kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind: {kind}")
        if cell not in CELL_KINDS:
            raise ValueError(f"unknown recurrent cell: {cell}")
        params = LSTMParams if cell == "lstm" else GRUParams
        params.create(store, f"{prefix}.fwd", d_emb, d_h, rng)
        params.create(store, f"{prefix}.bwd", d_emb, d_h, rng)
        if kind == "self_attentive":
            store.add_uniform(f"{prefix}.att.W", (1, 2 * d_h), 2 * d_h, rng)
            store.add_uniform(f"{prefix}.att.b", (1,), 2 * d_h, rng)
        return cls(kind, store, d_emb, d_h, prefix, cell)

    @property
    def output_dim(self) -> int:
        return 2 * self.d_h

    @property
    def frozen(self) -> bool:
        return self.store.frozen


def _run_gru(params: GRUParams, inputs: np.ndarray) -> Tensor:
    batch, steps, _ = inputs.shape
    h = Tensor(np.zeros((batch, params.hidden_size)))
    states = []
    for t in range(steps):
        h = gru_cell_step(params, inputs[:, t, :], h)
        states.append(h)
    return T.stack(states, axis=1)


def _run_lstm(params: LSTMParams, inputs: np.ndarray) -> Tensor:
    batch, steps, _ = inputs.shape
    state = (Tensor(np.zeros((batch, params.hidden_size))), Tensor(np.zeros((batch, params.hidden_size))))
    states = []
    for t in range(steps):
        state = lstm_cell_step(params, inputs[:, t, :], state)
        states.append(state[0])
    return T.stack(states, axis=1)


def _run_direction(encoder: SentenceEncoder, direction: str, inputs: np.ndarray) -> Tensor:
    prefix = f"{encoder.prefix}.{direction}"
    if encoder.cell == "lstm":
        return _run_lstm(LSTMParams.bind(encoder.store, prefix), inputs)
    return _run_gru(GRUParams.bind(encoder.store, prefix), inputs)


def encode_batch(encoder: SentenceEncoder, batch: Sequence[Sequence[int]], emb: EmbeddingTable) -> Tensor:
    """
    Encodes a batch of non-empty sequences into a (B, 2 * d_h) tensor.

    Raises:
        ValueError: If any sequence is empty or the embedding size differs from d_emb.
    """
    if not batch or any(len(ids) == 0 for ids in batch):
        raise ValueError("cannot encode an empty sequence")
    if emb.dim != encoder.d_emb:
        raise ValueError(f"embedding size {emb.dim} does not match encoder d_emb={encoder.d_emb}")

    lengths = np.array([len(ids) for ids in batch])
    steps = int(lengths.max())
    padded = np.full((len(batch), steps), PAD_ID, dtype=np.int64)
    reverse = np.full((len(batch), steps), PAD_ID, dtype=np.int64)
    for b, ids in enumerate(batch):
        padded[b, : len(ids)] = ids
        reverse[b, : len(ids)] = list(ids)[::-1]
    mask = (np.arange(steps)[None, :] < lengths[:, None]).astype(np.float64)

    fwd = _run_direction(encoder, "fwd", emb.matrix[padded])
    bwd_rev = _run_direction(encoder, "bwd", emb.matrix[reverse])

    # realign the backward states with the original time positions
    rows = np.repeat(np.arange(len(batch))[:, None], steps, axis=1)
    cols = np.clip(lengths[:, None] - 1 - np.arange(steps)[None, :], 0, None)
    bwd = T.gather(bwd_rev, (rows, cols))
    states = T.concat([fwd, bwd], axis=-1)

    match encoder.kind:
        case "bigru_maxpool":
            return T.amax(T.add(states, ((mask - 1.0) * _MASK_FILL)[:, :, None]), axis=1)
        case "bigru_meanpool":
            weights = mask / lengths[:, None]
            return T.total(T.mul(states, weights[:, :, None]), axis=1)
        case "self_attentive":
            W = encoder.store[f"{encoder.prefix}.att.W"]
            b = encoder.store[f"{encoder.prefix}.att.b"]
            logits = T.tanh(T.add(T.matmul(states, T.transpose(W)), b))
            logits = T.add(T.reshape(logits, mask.shape), (mask - 1.0) * _MASK_FILL)
            weights = T.softmax(logits, axis=1)
            return T.total(T.mul(states, T.reshape(weights, mask.shape + (1,))), axis=1)

    raise ValueError(f"unknown encoder kind: {encoder.kind}")


def encode(encoder: SentenceEncoder, tokens: Sequence[int], emb: EmbeddingTable) -> Tensor:
    """Encodes one sequence into a vector of dimension 2 * d_h."""
    return T.gather(encode_batch(encoder, [tokens], emb), 0)
