from dataclasses import dataclass, replace

import numpy as np

from agent.policy import PolicyNetwork, _step_log_probs, encode_context
from agent.returns import advantage, episode_returns
from core.vocabulary import END_ID, START_ID


@dataclass(frozen=True)
class Trajectory:
    """
    One sampled episode.

    Attributes:
        features (np.ndarray): Scene features the episode was conditioned on.
        h_s (np.ndarray): Context vector at sampling time.
        actions (list[int]): a_1..a_T, ending with the end marker unless truncated at max_len.
        log_probs (np.ndarray): Log-probabilities of the actions under the sampling policy.
        rewards (np.ndarray | None): Per-step rewards.
        values (np.ndarray | None): Critic values of the states the actions were taken from.
        returns (np.ndarray | None): Lambda-returns derived from rewards and values.
        advantages (np.ndarray | None): returns - values.
    """

    features: np.ndarray
    h_s: np.ndarray
    actions: list[int]
    log_probs: np.ndarray
    rewards: np.ndarray | None = None
    values: np.ndarray | None = None
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)

    def with_rewards(self, rewards) -> "Trajectory":
        rewards = np.asarray(rewards, dtype=np.float64)
        if rewards.shape != (len(self),):
            raise ValueError(f"expected {len(self)} rewards, got {rewards.shape}")
        return replace(self, rewards=rewards, values=None, returns=None, advantages=None)

    def with_values(self, values, lam: float, gamma: float = 1.0) -> "Trajectory":
        """Attaches critic values and derives returns and advantages from them."""
        if self.rewards is None:
            raise ValueError("rewards are not populated")
        values = np.asarray(values, dtype=np.float64)
        returns = episode_returns(self.rewards, values, lam, gamma)
        return replace(self, values=values, returns=returns, advantages=advantage(returns, values))


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    picks = (u[:, None] >= cdf).sum(axis=-1)
    return np.minimum(picks, probs.shape[-1] - 1)


def sample_batch(
    policy: PolicyNetwork,
    features: np.ndarray,
    max_len: int,
    rng: np.random.Generator,
) -> list[Trajectory]:
    """
    Samples one episode per row of `features` from the policy, untraced.

    An episode ends when the end marker is drawn or after max_len actions.

    Raises:
        ValueError: If max_len < 1.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    batch = features.shape[0]

    h_s = encode_context(policy, features)
    layers = policy.zero_state(batch)
    prev = np.full(batch, START_ID)
    done = np.zeros(batch, dtype=bool)
    actions = [[] for _ in range(batch)]
    log_probs = [[] for _ in range(batch)]

    for _ in range(max_len):
        step_lp, layers = _step_log_probs(policy, prev, layers, h_s)
        lp = step_lp.data
        picks = _inverse_cdf(np.exp(lp), rng.random(batch))
        for b in np.flatnonzero(~done):
            actions[b].append(int(picks[b]))
            log_probs[b].append(float(lp[b, picks[b]]))
        done |= picks == END_ID
        prev = picks
        if done.all():
            break

    return [
        Trajectory(features[b], h_s.data[b], actions[b], np.array(log_probs[b]))
        for b in range(batch)
    ]


def sample_episode(policy: PolicyNetwork, features: np.ndarray, max_len: int, rng_seed: int) -> Trajectory:
    """Samples a single episode; equal seeds give identical trajectories."""
    return sample_batch(policy, features, max_len, np.random.default_rng(rng_seed))[0]
