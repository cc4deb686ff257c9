from typing import Callable

import numpy as np

from nn.params import ParameterStore
from nn.tensor import Tape, Tensor, backward


def _evaluate(f: Callable[[ParameterStore], Tensor], store: ParameterStore) -> float:
    return float(np.sum(f(store).data))


def finite_difference_check(
    f: Callable[[ParameterStore], Tensor],
    store: ParameterStore,
    epsilon: float = 1e-6,
    probes: int | None = None,
    seed: int = 0,
) -> float:
    """
    Compares the analytic gradient of f against central differences.

    With `probes=None` every coordinate is perturbed; otherwise `probes` random unit
    directions are used and the directional derivatives are compared.

    Args:
        f (Callable): Builds a scalar loss from the parameters in `store`.
        store (ParameterStore): Parameters to differentiate; must not be frozen.
        epsilon (float, optional): Perturbation size in [1e-7, 1e-3]. Defaults to 1e-6.
        probes (int | None, optional): Number of random directions. Defaults to None.
        seed (int, optional): Seed for the probe directions. Defaults to 0.

    Returns:
        float: Maximum relative error |a - n| / max(|a|, |n|, 1e-12).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")

    store.zero_grad()
    with Tape() as tape:
        loss = f(store)
    backward(tape, loss)
    analytic = {name: p.grad.copy() for name, p in store.params.items()}
    store.zero_grad()

    values = {name: p.value.data for name, p in store.params.items()}

    def shifted(direction: dict[str, np.ndarray], scale: float) -> float:
        for name, d in direction.items():
            values[name] += scale * d
        out = _evaluate(f, store)
        for name, d in direction.items():
            values[name] -= scale * d
        return out

    errors = []
    if probes is None:
        for name, value in values.items():
            for idx in np.ndindex(value.shape):
                unit = np.zeros_like(value)
                unit[idx] = 1.0
                numeric = (shifted({name: unit}, epsilon) - shifted({name: unit}, -epsilon)) / (2 * epsilon)
                errors.append(_relative(analytic[name][idx], numeric))
    else:
        rng = np.random.default_rng(seed)
        for _ in range(probes):
            direction = {name: rng.standard_normal(v.shape) for name, v in values.items()}
            norm = np.sqrt(sum(np.sum(d * d) for d in direction.values()))
            direction = {name: d / norm for name, d in direction.items()}
            expected = sum(float(np.sum(analytic[n] * d)) for n, d in direction.items())
            numeric = (shifted(direction, epsilon) - shifted(direction, -epsilon)) / (2 * epsilon)
            errors.append(_relative(expected, numeric))

    return max(errors) if errors else 0.0


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)
