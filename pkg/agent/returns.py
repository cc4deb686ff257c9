from typing import Sequence

import numpy as np


UNIT_LOW, UNIT_HIGH = 0.05, 0.95


def lambda_returns(
    rewards: Sequence[float],
    values: Sequence[float],
    lam: float,
    gamma: float = 1.0,
) -> list[float]:
    """
    Lambda-returns over a sequence of states.

    Entry t mixes the n-step bootstrapped returns
    G^(i) = sum_{j=1..i} gamma^(j-1) r[t+j] + gamma^i V[t+i]
    with the full tail return, G = (1 - lam) sum_i lam^(i-1) G^(i) + lam^(n-t-2) G_full.
    The last entry is its own reward. lam = 1 gives the Monte-Carlo tail sum and lam = 0
    one-step TD, both exactly.

    Args:
        rewards (Sequence[float]): r[t], the reward received on entering state t.
        values (Sequence[float]): V[t] for each state.
        lam (float): Mixing weight in [0, 1].
        gamma (float, optional): Discount in [0, 1]. Defaults to 1.

    Raises:
        ValueError: On length mismatch or parameters out of range.
    """
    if len(rewards) != len(values):
        raise ValueError(f"length mismatch: {len(rewards)} rewards vs {len(values)} values")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")

    rewards = [float(r) for r in rewards]
    values = [float(v) for v in values]
    n = len(rewards)
    if n == 0:
        return []

    returns = []
    for t in range(n - 1):
        horizon = n - 1 - t
        mixture = 0.0
        partial = 0.0
        for i in range(1, horizon):
            partial += gamma ** (i - 1) * rewards[t + i]
            mixture += lam ** (i - 1) * (partial + gamma**i * values[t + i])
        full = 0.0
        for j in range(t + 1, n):
            full += gamma ** (j - t - 1) * rewards[j]
        returns.append((1.0 - lam) * mixture + lam ** (horizon - 1) * full)
    returns.append(rewards[-1])
    return returns


def episode_returns(
    step_rewards: Sequence[float],
    values: Sequence[float],
    lam: float,
    gamma: float = 1.0,
) -> np.ndarray:
    """
    Returns aligned with the actions of one episode.

    The T actions visit T + 1 states: the initial state carries no reward and the
    terminal state has value 0. Entry t is the return from the state action t was taken in.
    """
    if len(step_rewards) != len(values):
        raise ValueError(f"length mismatch: {len(step_rewards)} rewards vs {len(values)} values")
    padded = lambda_returns([0.0, *step_rewards], [*values, 0.0], lam, gamma)
    return np.array(padded[: len(step_rewards)])


def advantage(returns, values) -> np.ndarray:
    returns, values = np.asarray(returns, dtype=np.float64), np.asarray(values, dtype=np.float64)
    if returns.shape != values.shape:
        raise ValueError(f"length mismatch: {returns.shape} vs {values.shape}")
    return returns - values


def unit_affine(values) -> tuple[float, float]:
    """
    (scale, shift) of the min-max map sending the range of `values` onto [0.05, 0.95].

    A constant input gets scale 0 and shift 0.5.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot normalize an empty vector")
    low, high = float(values.min()), float(values.max())
    if high == low:
        return 0.0, 0.5
    scale = (UNIT_HIGH - UNIT_LOW) / (high - low)
    return scale, UNIT_LOW - scale * low


def normalize_unit(values) -> np.ndarray:
    scale, shift = unit_affine(values)
    out = scale * np.asarray(values, dtype=np.float64) + shift
    return np.clip(out, UNIT_LOW, UNIT_HIGH)
