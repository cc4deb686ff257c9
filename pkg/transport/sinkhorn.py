import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


logger = logging.getLogger(__name__)


@dataclass
class SinkhornResult:
    cost: float
    plan: np.ndarray
    iterations: int
    converged: bool


def _round_to_feasible(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Projects an approximate plan onto the transport polytope of (a, b)."""
    rows = plan.sum(axis=1)
    plan = plan * np.minimum(1.0, np.divide(a, rows, out=np.ones_like(a), where=rows > 0))[:, None]
    cols = plan.sum(axis=0)
    plan = plan * np.minimum(1.0, np.divide(b, cols, out=np.ones_like(b), where=cols > 0))[None, :]
    err_a = a - plan.sum(axis=1)
    err_b = b - plan.sum(axis=0)
    if err_a.sum() > 0:
        plan = plan + np.outer(err_a, err_b) / err_a.sum()
    return plan


def sinkhorn_plan(
    a,
    b,
    cost: np.ndarray,
    epsilon: float,
    max_iters: int = 20_000,
    tol: float = 1e-9,
) -> SinkhornResult:
    """
    Entropic-regularized transport by log-domain Sinkhorn iterations.

    The final plan is rounded onto the feasible set, so its cost never undercuts the
    exact optimum. Non-convergence is logged and the current estimate is returned.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)

    # zero-mass entries carry no flow; solve on the positive support
    rows, cols = a > 0, b > 0
    a_s, b_s, c_s = a[rows], b[cols], cost[np.ix_(rows, cols)]
    log_a, log_b = np.log(a_s), np.log(b_s)
    f = np.zeros(len(a_s))
    g = np.zeros(len(b_s))

    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        f = epsilon * (log_a - logsumexp((g[None, :] - c_s) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - c_s) / epsilon, axis=0))
        plan_s = np.exp((f[:, None] + g[None, :] - c_s) / epsilon)
        if np.max(np.abs(plan_s.sum(axis=1) - a_s)) < tol:
            converged = True
            break

    if not converged:
        logger.warning("sinkhorn did not converge in %d iterations (epsilon=%g)", max_iters, epsilon)

    plan = np.zeros(cost.shape)
    plan[np.ix_(rows, cols)] = _round_to_feasible(plan_s, a_s, b_s)
    return SinkhornResult(float(np.sum(plan * cost)), plan, iterations, converged)


def sinkhorn(a, b, cost: np.ndarray, epsilon: float = 1e-2, max_iters: int = 20_000) -> float:
    """Transport cost of the entropic-regularized plan; an upper bound on the exact EMD."""
    return sinkhorn_plan(a, b, cost, epsilon, max_iters).cost
