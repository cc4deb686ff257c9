from dataclasses import dataclass

import numpy as np

from core.vocabulary import START_ID
from nn import tensor as T
from nn.layers import LSTMParams, affine, check_finite, lstm_cell_step
from nn.params import ParameterStore
from nn.tensor import Tensor


@dataclass
class CriticNetwork:
    """
    State-value estimator sharing the policy's state construction: previous token
    embedding concatenated with the projected context, one LSTM layer and a scalar head.
    """

    store: ParameterStore
    vocab_size: int
    d_img: int
    d_emb: int
    d_h: int

    @classmethod
    def create(cls, vocab_size: int, d_img: int, d_emb: int, d_h: int, seed: int = 0) -> "CriticNetwork":
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        store.add_uniform("W_s", (d_h, d_img), d_img, rng)
        store.add_uniform("b_s", (d_h,), d_img, rng)
        store.add("embed", rng.normal(0.0, 0.1, size=(vocab_size, d_emb)))
        LSTMParams.create(store, "lstm0", d_emb + d_h, d_h, rng)
        store.add_uniform("W_v", (1, d_h), d_h, rng)
        store.add("b_v", np.zeros(1))
        return cls(store, vocab_size, d_img, d_emb, d_h)


def critic_values(critic: CriticNetwork, features, actions: np.ndarray) -> Tensor:
    """
    Value estimates V(s_t) for every state an action was taken from.

    The input at step t is the token emitted before it (the start marker at t = 0),
    so V[:, t] pairs with actions[:, t].

    Args:
        critic (CriticNetwork): The critic.
        features: Scene features of shape (B, d_img).
        actions (np.ndarray): Integer actions of shape (B, T).

    Returns:
        Tensor: Values of shape (B, T).
    """
    actions = np.asarray(actions, dtype=np.int64)
    batch, steps = actions.shape
    store = critic.store
    h_s = affine(store["W_s"], store["b_s"], features)
    prev = np.concatenate([np.full((batch, 1), START_ID), actions[:, :-1]], axis=1)

    cell = LSTMParams.bind(store, "lstm0")
    state = (Tensor(np.zeros((batch, critic.d_h))), Tensor(np.zeros((batch, critic.d_h))))
    values = []
    for t in range(steps):
        x = T.concat([T.gather(store["embed"], prev[:, t]), h_s], axis=-1)
        state = lstm_cell_step(cell, x, state)
        values.append(T.reshape(affine(store["W_v"], store["b_v"], state[0]), (batch,)))
    return check_finite(T.stack(values, axis=1), "critic values")
