import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


_active = threading.local()


class Tensor:
    """
    A float64 array that can take part in reverse-mode differentiation.

    Attributes:
        data (np.ndarray): Row-major values.
        requires_grad (bool): Whether operations on this tensor are recorded on the active tape.
        grad (np.ndarray | None): Accumulated gradient, populated by `backward` for leaf tensors.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf")

    def __init__(self, data, requires_grad: bool = False, is_leaf: bool = True):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.is_leaf = is_leaf

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """
    Ordered record of the primitive operations executed while the tape is active.

    A tape is activated with a `with` block; primitives whose inputs require gradients
    append a node. `backward` replays the nodes in reverse exactly once and then clears them.
    """

    nodes: list[_Node] = field(default_factory=list)
    consumed: bool = False

    def __enter__(self) -> "Tape":
        if getattr(_active, "tape", None) is not None:
            raise RuntimeError("a tape is already active in this thread")
        _active.tape = self
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _active.tape = None

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Tape | None:
    return getattr(_active, "tape", None)


def _record(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = active_tape()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=tracked, is_leaf=not tracked)
    if tracked:
        tape.nodes.append(_Node(out, inputs, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(x, w_t) -> Tensor:
    """x @ w_t for x of shape (..., n) and a 2-d w_t of shape (n, m)."""
    x, w_t = as_tensor(x), as_tensor(w_t)

    def backward(g):
        gx = g @ w_t.data.T
        x2 = x.data.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        return gx, x2.T @ g2

    return _record(x.data @ w_t.data, (x, w_t), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.T, (a,), lambda g: (g.T,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(-np.abs(a.data))
    out = np.where(a.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clip(a, low: float, high: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return _record(np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


def total(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _record(np.sum(a.data, axis=axis), (a,), backward)


def amax(a, axis: int) -> Tensor:
    a = as_tensor(a)
    out = np.max(a.data, axis=axis)
    winners = a.data == np.expand_dims(out, axis)
    # first maximal element receives the gradient
    first = winners & (np.cumsum(winners, axis=axis) == 1)
    return _record(out, (a,), lambda g: (np.expand_dims(g, axis) * first,))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _record(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def slice_last(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    return _record(a.data[..., start:stop], (a,), backward)


def gather(a, index) -> Tensor:
    """Fancy-index `a[index]`; repeated indices accumulate in the backward pass."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _record(a.data[index], (a,), backward)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    probs = np.exp(out)
    return _record(
        out,
        (a,),
        lambda g: (g - probs * np.sum(g, axis=axis, keepdims=True),),
    )


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)
    return _record(
        out,
        (a,),
        lambda g: (out * (g - np.sum(g * out, axis=axis, keepdims=True)),),
    )


def backward(tape: Tape, loss: Tensor) -> None:
    """
    Replays the tape in reverse and accumulates d(loss)/d(leaf) into every leaf's `grad`.

    Args:
        tape (Tape): The tape the loss was traced on.
        loss (Tensor): A traced scalar.

    Raises:
        RuntimeError: If the tape was already consumed or is empty.
        ValueError: If the loss is not a traced scalar.
    """
    if tape.consumed:
        raise RuntimeError("tape already consumed by a previous backward")
    if not tape.nodes:
        raise RuntimeError("tape is empty; nothing was traced")
    if loss.data.size != 1 or not loss.requires_grad:
        raise ValueError(f"loss must be a traced scalar, got {loss!r}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}

    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for tensor, tensor_grad in zip(node.inputs, node.backward(g)):
            if tensor_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + tensor_grad if key in grads else tensor_grad
            if tensor.is_leaf:
                leaves[key] = tensor

    for key, tensor in leaves.items():
        g = grads[key]
        tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g

    tape.nodes.clear()
    tape.consumed = True
