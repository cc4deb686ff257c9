import logging

import numpy as np

from nn import tensor as T
from nn.tensor import Tensor


logger = logging.getLogger(__name__)

V_FLOOR = 1e-6


def _masked(x, mask):
    return x if mask is None else T.mul(x, np.asarray(mask, dtype=np.float64))


def policy_gradient_loss(log_probs: Tensor, advantages, mask=None) -> Tensor:
    """
    Advantage-weighted score-function loss -sum_t A_t log pi(a_t | s_t).

    Advantages are constants; no gradient reaches the critic through them.

    Raises:
        ValueError: If advantages are missing or do not match the log-probabilities.
    """
    if advantages is None:
        raise ValueError("advantages are not populated")
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.shape != log_probs.shape:
        raise ValueError(f"advantages {advantages.shape} do not match log-probs {log_probs.shape}")
    return T.mul(T.total(_masked(T.mul(log_probs, advantages), mask)), -1.0)


def ml_loss(log_probs: Tensor, mask=None) -> Tensor:
    """Negative log-likelihood of teacher-forced targets."""
    return T.mul(T.total(_masked(log_probs, mask)), -1.0)


def _clamped(v: Tensor) -> Tensor:
    if np.any(v.data < V_FLOOR) or np.any(v.data > 1.0 - V_FLOOR):
        logger.warning("critic values outside (0, 1) clamped to [%g, %g]", V_FLOOR, 1.0 - V_FLOOR)
        return T.clip(v, V_FLOOR, 1.0 - V_FLOOR)
    return v


def critic_kl_loss(q_norm, v_norm: Tensor, mask=None) -> Tensor:
    """
    Bernoulli cross-entropy -[q ln v + (1 - q) ln(1 - v)], summed over steps.

    Equals KL(Bern(q) || Bern(v)) + H(Bern(q)); q is a constant target.
    """
    q = np.asarray(q_norm, dtype=np.float64)
    v = _clamped(T.as_tensor(v_norm))
    per_step = T.add(T.mul(T.log(v), q), T.mul(T.log(T.sub(1.0, v)), 1.0 - q))
    return T.mul(T.total(_masked(per_step, mask)), -1.0)


def critic_l2_loss(q_norm, v_norm: Tensor, mask=None) -> Tensor:
    diff = T.sub(T.as_tensor(v_norm), np.asarray(q_norm, dtype=np.float64))
    return T.total(_masked(T.mul(diff, diff), mask))


def bernoulli_entropy(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(q * np.log(q) + (1.0 - q) * np.log(1.0 - q))
    return np.nan_to_num(h)


CRITIC_LOSSES = {"kl": critic_kl_loss, "l2": critic_l2_loss}
