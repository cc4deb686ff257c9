import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.errors import DataError, ModelError
from nn.tensor import Tensor


CHECKPOINT_MAGIC = b"TRLCKPT1"


@dataclass
class Parameter:
    """
    A trainable tensor together with its Adam moments.

    Attributes:
        value (Tensor): The parameter; its `grad` holds the accumulated gradient.
        m (np.ndarray): First-moment estimate.
        v (np.ndarray): Second-moment estimate.
    """

    value: Tensor
    m: np.ndarray
    v: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        if self.value.grad is None:
            return np.zeros_like(self.value.data)
        return self.value.grad


@dataclass
class ParameterStore:
    """
    Named parameters of one network, with a shared Adam step counter.

    A frozen store marks every tensor as not requiring gradients, so nothing touching it
    is traced and gradient accumulation is rejected.
    """

    params: dict[str, Parameter] = field(default_factory=dict)
    step: int = 0
    frozen: bool = False

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"parameter '{name}' already exists")
        tensor = Tensor(np.array(data, dtype=np.float64), requires_grad=not self.frozen)
        self.params[name] = Parameter(
            value=tensor, m=np.zeros_like(tensor.data), v=np.zeros_like(tensor.data)
        )
        return tensor

    def add_uniform(self, name: str, shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def size(self) -> int:
        return sum(p.value.data.size for p in self.params.values())

    def freeze(self) -> None:
        self.frozen = True
        for p in self.params.values():
            p.value.requires_grad = False
            p.value.grad = None

    def unfreeze(self) -> None:
        self.frozen = False
        for p in self.params.values():
            p.value.requires_grad = True

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.value.grad = None

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if self.frozen:
            raise ModelError(f"cannot accumulate gradient into frozen parameter '{name}'")
        value = self.params[name].value
        value.grad = grad.copy() if value.grad is None else value.grad + grad

    def flat_values(self) -> np.ndarray:
        return np.concatenate([p.value.data.reshape(-1) for p in self.params.values()])

    def flat_grads(self) -> np.ndarray:
        return np.concatenate([p.grad.reshape(-1) for p in self.params.values()])

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, p in self.params.items():
            digest.update(name.encode("utf-8"))
            digest.update(p.value.data.astype("<f8").tobytes())
        return digest.hexdigest()

    def copy(self) -> "ParameterStore":
        clone = ParameterStore(step=self.step)
        for name, p in self.params.items():
            clone.add(name, p.value.data.copy())
            clone.params[name].m = p.m.copy()
            clone.params[name].v = p.v.copy()
        if self.frozen:
            clone.freeze()
        return clone

    def load_values(self, other: "ParameterStore") -> None:
        for name, p in self.params.items():
            if name not in other.params:
                raise DataError(f"checkpoint is missing parameter '{name}'")
            src = other.params[name]
            if src.value.shape != p.value.shape:
                raise DataError(
                    f"shape mismatch for '{name}': {src.value.shape} vs {p.value.shape}"
                )
            p.value.data[...] = src.value.data
            p.m[...] = src.m
            p.v[...] = src.v
        self.step = other.step


def adam_step(
    store: ParameterStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """
    Applies one bias-corrected Adam update to every parameter and zeroes the gradients.

    Args:
        store (ParameterStore): Parameters with populated gradients.
        lr (float): Learning rate.
        beta1 (float, optional): First-moment decay. Defaults to 0.9.
        beta2 (float, optional): Second-moment decay. Defaults to 0.999.
        eps (float, optional): Denominator floor. Defaults to 1e-8.
    """
    if store.frozen:
        raise ModelError("cannot update a frozen parameter store")

    store.step += 1
    correction1 = 1.0 - beta1**store.step
    correction2 = 1.0 - beta2**store.step

    for p in store.params.values():
        g = p.grad
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * g * g
        m_hat = p.m / correction1
        v_hat = p.v / correction2
        p.value.data -= lr * m_hat / (np.sqrt(v_hat) + eps)

    store.zero_grad()


def clip_grad_norm(store: ParameterStore, max_norm: float) -> float:
    norm = float(np.sqrt(sum(np.sum(p.grad**2) for p in store.params.values())))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in store.params.values():
            if p.value.grad is not None:
                p.value.grad = p.value.grad * scale
    return norm


def save_parameters(store: ParameterStore, path: str | Path, with_moments: bool = True) -> None:
    """
    Writes a parameter store in the little-endian checkpoint format.

    Layout: magic, moments flag byte, uint64 step, uint32 tensor count, then per tensor:
    uint32 name length, name bytes, uint32 rank, uint64 dims, float64 values, and the
    m and v moments when the flag is set.
    """
    chunks = [
        CHECKPOINT_MAGIC,
        struct.pack("<BQI", 1 if with_moments else 0, store.step, len(store.params)),
    ]
    for name, p in store.params.items():
        encoded = name.encode("utf-8")
        data = p.value.data
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.astype("<f8").tobytes())
        if with_moments:
            chunks.append(p.m.astype("<f8").tobytes())
            chunks.append(p.v.astype("<f8").tobytes())

    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.payload):
            raise DataError("truncated checkpoint")
        out = self.payload[self.offset : self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def load_parameters(path: str | Path) -> ParameterStore:
    """
    Reads a checkpoint written by `save_parameters`.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: If the magic does not match or the file is truncated.
    """
    payload = Path(path).read_bytes()
    if payload[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise DataError(f"'{path}' is not a checkpoint")

    reader = _Reader(payload)
    reader.take(len(CHECKPOINT_MAGIC))
    flag, step, count = reader.unpack("<BQI")

    store = ParameterStore(step=step)
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("<I")
        shape = reader.unpack(f"<{rank}Q") if rank else ()
        store.add(name, reader.array(shape))
        if flag:
            store.params[name].m = reader.array(shape)
            store.params[name].v = reader.array(shape)

    if reader.offset != len(payload):
        raise DataError(f"trailing bytes in checkpoint '{path}'")

    return store
