from dataclasses import dataclass

import numpy as np

from core.errors import ModelError
from nn import tensor as T
from nn.params import ParameterStore
from nn.tensor import Tensor


def check_finite(x: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise ModelError(f"non-finite values at {where}")
    return x


def affine(W: Tensor, b: Tensor, x) -> Tensor:
    """
    Computes W x + b for x of shape (n,) or a batch of shape (B, n).

    Args:
        W (Tensor): Weight of shape (m, n).
        b (Tensor): Bias of shape (m,).
        x (Tensor): Input whose last dimension is n.

    Returns:
        Tensor: Output whose last dimension is m.

    Raises:
        ValueError: If the shapes do not agree.
    """
    x = T.as_tensor(x)
    if W.data.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1:] != (W.shape[1],):
        raise ValueError(
            f"affine shape mismatch: W{W.shape}, b{b.shape}, x{x.shape}"
        )
    return check_finite(T.add(T.matmul(x, T.transpose(W)), b), "affine output")


def softmax(logits) -> Tensor:
    return T.softmax(logits, axis=-1)


@dataclass
class LSTMParams:
    W_x: Tensor
    W_h: Tensor
    b: Tensor

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[1]

    @classmethod
    def create(cls, store: ParameterStore, prefix: str, d_in: int, d_h: int, rng: np.random.Generator) -> "LSTMParams":
        fan_in = d_in + d_h
        return cls(
            W_x=store.add_uniform(f"{prefix}.W_x", (4 * d_h, d_in), fan_in, rng),
            W_h=store.add_uniform(f"{prefix}.W_h", (4 * d_h, d_h), fan_in, rng),
            b=store.add_uniform(f"{prefix}.b", (4 * d_h,), fan_in, rng),
        )

    @classmethod
    def bind(cls, store: ParameterStore, prefix: str) -> "LSTMParams":
        return cls(store[f"{prefix}.W_x"], store[f"{prefix}.W_h"], store[f"{prefix}.b"])


@dataclass
class GRUParams:
    W_x: Tensor
    W_h: Tensor
    b: Tensor

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[1]

    @classmethod
    def create(cls, store: ParameterStore, prefix: str, d_in: int, d_h: int, rng: np.random.Generator) -> "GRUParams":
        fan_in = d_in + d_h
        return cls(
            W_x=store.add_uniform(f"{prefix}.W_x", (3 * d_h, d_in), fan_in, rng),
            W_h=store.add_uniform(f"{prefix}.W_h", (3 * d_h, d_h), fan_in, rng),
            b=store.add_uniform(f"{prefix}.b", (3 * d_h,), fan_in, rng),
        )

    @classmethod
    def bind(cls, store: ParameterStore, prefix: str) -> "GRUParams":
        return cls(store[f"{prefix}.W_x"], store[f"{prefix}.W_h"], store[f"{prefix}.b"])


def _check_cell(params, x: Tensor, h: Tensor, gates: int) -> int:
    d_h = params.hidden_size
    if params.W_x.shape != (gates * d_h, x.shape[-1]) or h.shape[-1] != d_h:
        raise ValueError(
            f"cell shape mismatch: W_x{params.W_x.shape}, x{x.shape}, h{h.shape}"
        )
    return d_h


def lstm_cell_step(params: LSTMParams, x, state: tuple) -> tuple[Tensor, Tensor]:
    """
    One LSTM step with input, forget, candidate and output gates (in that order).

    Args:
        params (LSTMParams): Gate weights stacked along the first dimension.
        x (Tensor): Input of shape (d_in,) or (B, d_in).
        state (tuple): Previous (h, c).

    Returns:
        tuple[Tensor, Tensor]: New (h, c).
    """
    x = T.as_tensor(x)
    h, c = T.as_tensor(state[0]), T.as_tensor(state[1])
    d_h = _check_cell(params, x, h, 4)

    z = T.add(
        T.add(T.matmul(x, T.transpose(params.W_x)), T.matmul(h, T.transpose(params.W_h))),
        params.b,
    )
    i = T.sigmoid(T.slice_last(z, 0, d_h))
    f = T.sigmoid(T.slice_last(z, d_h, 2 * d_h))
    g = T.tanh(T.slice_last(z, 2 * d_h, 3 * d_h))
    o = T.sigmoid(T.slice_last(z, 3 * d_h, 4 * d_h))

    c_new = T.add(T.mul(f, c), T.mul(i, g))
    h_new = T.mul(o, T.tanh(c_new))
    return check_finite(h_new, "lstm hidden state"), c_new


def gru_cell_step(params: GRUParams, x, h) -> Tensor:
    """
    One GRU step: update gate z, reset gate r, candidate n = tanh(W_n x + U_n (r * h) + b_n),
    and h' = (1 - z) * n + z * h.
    """
    x, h = T.as_tensor(x), T.as_tensor(h)
    d_h = _check_cell(params, x, h, 3)

    wx = T.add(T.matmul(x, T.transpose(params.W_x)), params.b)
    W_h_zr = T.slice_last(T.transpose(params.W_h), 0, 2 * d_h)
    W_h_n = T.slice_last(T.transpose(params.W_h), 2 * d_h, 3 * d_h)

    zr = T.sigmoid(T.add(T.slice_last(wx, 0, 2 * d_h), T.matmul(h, W_h_zr)))
    z = T.slice_last(zr, 0, d_h)
    r = T.slice_last(zr, d_h, 2 * d_h)
    n = T.tanh(T.add(T.slice_last(wx, 2 * d_h, 3 * d_h), T.matmul(T.mul(r, h), W_h_n)))

    h_new = T.add(T.mul(T.sub(1.0, z), n), T.mul(z, h))
    return check_finite(h_new, "gru hidden state")
