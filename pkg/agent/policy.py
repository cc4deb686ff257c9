from dataclasses import dataclass

import numpy as np

from core.vocabulary import START_ID
from nn import tensor as T
from nn.layers import LSTMParams, affine, lstm_cell_step
from nn.params import ParameterStore
from nn.tensor import Tensor


LSTMState = list[tuple[Tensor, Tensor]]


@dataclass
class DecoderState:
    """Recurrent state of one decoding run: the context vector plus (h, c) per LSTM layer."""

    h_s: Tensor
    layers: LSTMState


@dataclass
class PolicyNetwork:
    """
    Context-conditioned LSTM decoder.

    At every step the previous token's embedding is concatenated with the projected
    context h_s and fed through a stack of LSTM layers; the top hidden state is
    projected onto the vocabulary.

    Attributes:
        store (ParameterStore): Holds W_s, b_s, embed, lstm{k}.*, W_t and b_t.
        vocab_size (int): Number of actions.
        d_img (int): Scene feature size.
        d_emb (int): Token embedding size.
        d_h (int): Hidden size of the context projection and the LSTM layers.
        n_layers (int): LSTM depth.
    """

    store: ParameterStore
    vocab_size: int
    d_img: int
    d_emb: int
    d_h: int
    n_layers: int = 2

    @classmethod
    def create(
        cls,
        vocab_size: int,
        d_img: int,
        d_emb: int,
        d_h: int,
        seed: int = 0,
        n_layers: int = 2,
    ) -> "PolicyNetwork":
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        store.add_uniform("W_s", (d_h, d_img), d_img, rng)
        store.add_uniform("b_s", (d_h,), d_img, rng)
        store.add("embed", rng.normal(0.0, 0.1, size=(vocab_size, d_emb)))
        for k in range(n_layers):
            LSTMParams.create(store, f"lstm{k}", d_emb + d_h if k == 0 else d_h, d_h, rng)
        store.add_uniform("W_t", (vocab_size, d_h), d_h, rng)
        store.add_uniform("b_t", (vocab_size,), d_h, rng)
        return cls(store, vocab_size, d_img, d_emb, d_h, n_layers)

    def zero_state(self, batch: int | None = None) -> LSTMState:
        shape = (self.d_h,) if batch is None else (batch, self.d_h)
        return [(Tensor(np.zeros(shape)), Tensor(np.zeros(shape))) for _ in range(self.n_layers)]

    def start(self, features) -> DecoderState:
        return DecoderState(encode_context(self, features), self.zero_state())

    def step(self, token: int, state: DecoderState) -> tuple[np.ndarray, DecoderState]:
        """Log-probabilities of the next token after `token`, for beam search."""
        log_probs, layers = _step_log_probs(self, np.array(token), state.layers, state.h_s)
        return log_probs.data, DecoderState(state.h_s, layers)


def encode_context(policy: PolicyNetwork, features) -> Tensor:
    """
    Projects scene features onto the decoder's context vector h_s = W_s f + b_s.

    Raises:
        ValueError: If the feature dimension does not match W_s.
    """
    return affine(policy.store["W_s"], policy.store["b_s"], features)


def _step_log_probs(
    policy: PolicyNetwork,
    prev_tokens: np.ndarray,
    layers: LSTMState,
    h_s: Tensor,
) -> tuple[Tensor, LSTMState]:
    x = T.concat([T.gather(policy.store["embed"], prev_tokens), h_s], axis=-1)
    new_layers = []
    for k, state in enumerate(layers):
        h, c = lstm_cell_step(LSTMParams.bind(policy.store, f"lstm{k}"), x, state)
        new_layers.append((h, c))
        x = h
    logits = affine(policy.store["W_t"], policy.store["b_t"], x)
    return T.log_softmax(logits, axis=-1), new_layers


def policy_step(
    policy: PolicyNetwork,
    prev_token,
    state: LSTMState,
    h_s: Tensor,
) -> tuple[Tensor, LSTMState]:
    """
    Advances the decoder by one token.

    Args:
        policy (PolicyNetwork): The decoder.
        prev_token: Previous token id (or a batch of ids); the start marker at the first step.
        state (LSTMState): Per-layer (h, c) from the previous step.
        h_s (Tensor): Context vector.

    Returns:
        tuple[Tensor, LSTMState]: Action distribution over the vocabulary and the new state.
    """
    log_probs, layers = _step_log_probs(policy, np.asarray(prev_token), state, h_s)
    return T.exp(log_probs), layers


def sequence_log_probs(policy: PolicyNetwork, features, actions: np.ndarray) -> Tensor:
    """
    Teacher-forced log pi(a_t | s_t) for a batch of action sequences.

    Args:
        policy (PolicyNetwork): The decoder.
        features: Scene features of shape (B, d_img).
        actions (np.ndarray): Integer actions of shape (B, T); positions past an episode's end may hold anything.

    Returns:
        Tensor: Log-probabilities of shape (B, T).
    """
    actions = np.asarray(actions, dtype=np.int64)
    batch, steps = actions.shape
    h_s = encode_context(policy, features)
    prev = np.concatenate([np.full((batch, 1), START_ID), actions[:, :-1]], axis=1)

    layers = policy.zero_state(batch)
    picked = []
    rows = np.arange(batch)
    for t in range(steps):
        log_probs, layers = _step_log_probs(policy, prev[:, t], layers, h_s)
        picked.append(T.gather(log_probs, (rows, actions[:, t])))
    return T.stack(picked, axis=1)
