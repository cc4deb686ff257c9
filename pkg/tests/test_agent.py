import itertools
import logging
import math

import numpy as np
import pytest

from agent.beam import beam_decode, greedy_decode
from agent.critic import CriticNetwork, critic_values
from agent.losses import bernoulli_entropy, critic_kl_loss, critic_l2_loss, ml_loss, policy_gradient_loss
from agent.policy import PolicyNetwork, policy_step, sequence_log_probs
from agent.returns import UNIT_HIGH, UNIT_LOW, advantage, episode_returns, lambda_returns, normalize_unit, unit_affine
from agent.trajectory import sample_batch, sample_episode
from core.vocabulary import END_ID, START_ID
from nn import tensor as T
from nn.gradcheck import finite_difference_check
from nn.params import ParameterStore, adam_step
from nn.tensor import Tape, Tensor, backward


def _zeroed(policy: PolicyNetwork) -> PolicyNetwork:
    for name in policy.store.names():
        policy.store[name].data[...] = 0.0
    return policy


class TablePolicy:
    """Log-probabilities drawn once per prefix from a seeded generator."""

    def __init__(self, vocab_size: int, seed: int):
        self.vocab_size = vocab_size
        self.seed = seed

    def start(self, context):
        return ()

    def step(self, token, state):
        prefix = state + (token,)
        rng = np.random.default_rng([self.seed, *prefix])
        logits = rng.standard_normal(self.vocab_size)
        return logits - np.log(np.sum(np.exp(logits))), prefix


class FixedPolicy:
    """Next-token distributions keyed by the previous token."""

    def __init__(self, table: dict[int, list[float]]):
        self.table = table

    def start(self, context):
        return None

    def step(self, token, state):
        return np.log(np.array(self.table[token])), state


def _complete_sequences(vocab_size: int, max_len: int):
    for length in range(1, max_len + 1):
        for tokens in itertools.product(range(vocab_size), repeat=length):
            if END_ID in tokens[:-1]:
                continue
            if length < max_len and tokens[-1] != END_ID:
                continue
            yield tokens


def _sequence_score(policy: TablePolicy, tokens) -> float:
    state, last, score = policy.start(None), START_ID, 0.0
    for token in tokens:
        log_probs, state = policy.step(last, state)
        score += log_probs[token]
        last = token
    return score


def test_lambda_one_is_the_monte_carlo_tail_sum():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        rewards, values = rng.standard_normal(n), rng.standard_normal(n)
        returns = lambda_returns(rewards, values, lam=1.0, gamma=0.9)
        for t in range(n - 1):
            tail = 0.0
            for j in range(t + 1, n):
                tail += 0.9 ** (j - t - 1) * float(rewards[j])
            assert returns[t] == tail
        assert returns[-1] == rewards[-1]


def test_lambda_zero_is_one_step_bootstrapping():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(3, 9))
        rewards, values = rng.standard_normal(n), rng.standard_normal(n)
        returns = lambda_returns(rewards, values, lam=0.0, gamma=0.8)
        for t in range(n - 2):
            assert returns[t] == float(rewards[t + 1]) + 0.8 * float(values[t + 1])
        assert returns[n - 2] == rewards[n - 1]


def test_lambda_returns_hand_example():
    assert lambda_returns([0.0, 0.0, 1.0], [0.5, 0.2, 0.0], lam=0.0) == pytest.approx([0.2, 1.0, 1.0])


def test_lambda_returns_rejects_bad_input():
    with pytest.raises(ValueError, match="length mismatch"):
        lambda_returns([0.0], [0.0, 1.0], 0.5)
    with pytest.raises(ValueError):
        lambda_returns([0.0], [0.0], 1.5)
    with pytest.raises(ValueError):
        lambda_returns([0.0], [0.0], 0.5, gamma=-0.1)
    assert lambda_returns([], [], 0.5) == []


def test_episode_returns_align_with_actions():
    values = [0.3, 0.4, 0.6]
    assert episode_returns([0.0, 0.0, 1.0], values, lam=1.0).tolist() == [1.0, 1.0, 1.0]
    assert episode_returns([0.0, 0.0, 1.0], values, lam=0.0) == pytest.approx([0.4, 0.6, 1.0])
    assert advantage([1.0, 1.0], [0.25, 0.5]).tolist() == [0.75, 0.5]


def test_shifting_values_shifts_advantages_by_the_opposite_amount():
    rng = np.random.default_rng(6)
    for _ in range(100):
        # multiples of 2**-8 keep every difference exact
        returns = rng.integers(-256, 256, size=6) / 256.0
        values = rng.integers(-256, 256, size=6) / 256.0
        c = int(rng.integers(-64, 64)) / 256.0
        shifted = advantage(returns, values + c)
        assert np.array_equal(shifted, advantage(returns, values) - c)
        assert np.argmax(shifted) == np.argmax(advantage(returns, values))


def test_normalize_unit_maps_the_range():
    assert normalize_unit([1.0, 2.0, 3.0]) == pytest.approx([UNIT_LOW, 0.5, UNIT_HIGH])
    assert normalize_unit([4.0, 4.0]).tolist() == [0.5, 0.5]
    assert unit_affine([7.0]) == (0.0, 0.5)
    scale, shift = unit_affine([-1.0, 1.0])
    assert scale * -1.0 + shift == pytest.approx(UNIT_LOW)
    with pytest.raises(ValueError):
        unit_affine([])


def test_critic_kl_loss_values():
    half = np.array([0.5])
    assert float(critic_kl_loss(half, Tensor(half)).data) == pytest.approx(math.log(2))
    assert float(critic_kl_loss(np.array([1.0]), Tensor(half)).data) == pytest.approx(math.log(2))
    # matching targets leave only the entropy of the target
    q = np.array([0.9, 0.2])
    assert float(critic_kl_loss(q, Tensor(q)).data) == pytest.approx(float(np.sum(bernoulli_entropy(q))))


def test_critic_kl_loss_is_minimized_at_the_target():
    grid = np.linspace(0.05, 0.95, 19)
    for q in grid:
        losses = np.array([float(critic_kl_loss(np.array([q]), Tensor(np.array([v]))).data) for v in grid])
        entropy = float(bernoulli_entropy([q])[0])
        assert np.all(losses >= 0.0)
        assert np.all(losses >= entropy - 1e-12)
        assert grid[int(np.argmin(losses))] == q
        assert losses[int(np.argmin(losses))] == pytest.approx(entropy, abs=1e-12)


def test_critic_kl_loss_clamps_saturated_values(caplog):
    with caplog.at_level(logging.WARNING):
        loss = critic_kl_loss(np.array([0.5]), Tensor(np.array([1.0])))
    assert np.isfinite(loss.data)
    assert "clamped" in caplog.text


def test_critic_kl_loss_gradient():
    store = ParameterStore()
    store.add("v", np.array([0.3, 0.6, 0.8]))
    q = np.array([0.1, 0.5, 0.9])
    assert finite_difference_check(lambda s: critic_kl_loss(q, s["v"], mask=[1.0, 1.0, 0.0]), store, probes=20) < 1e-4


def test_critic_l2_loss_and_entropy():
    assert float(critic_l2_loss([0.5], Tensor(np.array([0.7]))).data) == pytest.approx(0.04)
    assert bernoulli_entropy([0.0, 1.0]).tolist() == [0.0, 0.0]


def test_policy_gradient_loss_values_and_errors():
    log_probs = Tensor(np.array([-1.0, -2.0]))
    assert float(policy_gradient_loss(log_probs, [1.0, 0.5]).data) == pytest.approx(2.0)
    assert float(policy_gradient_loss(log_probs, [1.0, 0.5], mask=[1.0, 0.0]).data) == pytest.approx(1.0)
    assert float(ml_loss(log_probs).data) == pytest.approx(3.0)
    with pytest.raises(ValueError, match="not populated"):
        policy_gradient_loss(log_probs, None)
    with pytest.raises(ValueError, match="do not match"):
        policy_gradient_loss(log_probs, [1.0, 2.0, 3.0])


def _bandit_run(seed: int) -> float:
    store = ParameterStore()
    store.add("logits", np.zeros(2))
    rng = np.random.default_rng(seed)
    for _ in range(500):
        probs = np.exp(store["logits"].data) / np.sum(np.exp(store["logits"].data))
        actions = rng.choice(2, size=8, p=probs)
        rewards = (actions == 0).astype(np.float64)
        with Tape() as tape:
            picked = T.gather(T.log_softmax(store["logits"], axis=-1), actions)
            loss = policy_gradient_loss(picked, rewards - 0.5)
        backward(tape, loss)
        adam_step(store, 0.05)
    logits = store["logits"].data
    return float(np.exp(logits[0]) / np.sum(np.exp(logits)))


def test_reinforce_learns_a_two_armed_bandit():
    assert float(np.median([_bandit_run(seed) for seed in range(3)])) > 0.95


def test_zero_policy_is_uniform():
    policy = _zeroed(PolicyNetwork.create(7, 3, 4, 5))
    probs, _ = policy_step(policy, START_ID, policy.zero_state(), T.as_tensor(np.zeros(5)))
    assert np.allclose(probs.data, 1.0 / 7)


def test_sampling_frequencies_match_the_policy():
    policy = _zeroed(PolicyNetwork.create(6, 3, 4, 4))
    n = 3000
    episodes = sample_batch(policy, np.ones((n, 3)), max_len=1, rng=np.random.default_rng(0))
    counts = np.bincount([e.actions[0] for e in episodes], minlength=6)
    sigma = math.sqrt(n * (1 / 6) * (5 / 6))
    assert np.all(np.abs(counts - n / 6) < 4 * sigma)
    assert all(e.log_probs[0] == pytest.approx(-math.log(6)) for e in episodes)


def test_sampled_episodes_are_seeded_and_bounded():
    policy = PolicyNetwork.create(9, 3, 4, 5, seed=2)
    features = np.array([0.5, -1.0, 2.0])
    a = sample_episode(policy, features, max_len=5, rng_seed=11)
    b = sample_episode(policy, features, max_len=5, rng_seed=11)
    assert a.actions == b.actions
    assert np.array_equal(a.log_probs, b.log_probs)
    for episode in sample_batch(policy, np.tile(features, (40, 1)), 5, np.random.default_rng(3)):
        assert 1 <= len(episode) <= 5
        assert END_ID not in episode.actions[:-1]
        if len(episode) < 5:
            assert episode.actions[-1] == END_ID
    with pytest.raises(ValueError):
        sample_batch(policy, features, 0, np.random.default_rng(0))


def test_sampled_log_probs_match_teacher_forcing():
    policy = PolicyNetwork.create(9, 3, 4, 5, seed=4)
    features = np.array([[0.1, 0.2, 0.3]])
    episode = sample_episode(policy, features, max_len=6, rng_seed=5)
    forced = sequence_log_probs(policy, features, np.array([episode.actions]))
    assert np.allclose(forced.data[0], episode.log_probs)


def test_trajectory_requires_rewards_before_values():
    episode = sample_episode(PolicyNetwork.create(9, 3, 4, 5), np.zeros(3), 4, 0)
    with pytest.raises(ValueError, match="rewards are not populated"):
        episode.with_values(np.zeros(len(episode)), lam=0.5)
    with pytest.raises(ValueError):
        episode.with_rewards(np.zeros(len(episode) + 1))

    rewards = np.zeros(len(episode))
    rewards[-1] = 1.0
    filled = episode.with_rewards(rewards).with_values(np.full(len(episode), 0.25), lam=1.0)
    assert np.allclose(filled.returns, 1.0)
    assert np.allclose(filled.advantages, 0.75)
    assert episode.rewards is None


def test_policy_gradients_match_finite_differences():
    policy = PolicyNetwork.create(7, 3, 4, 5, seed=1)
    features = np.random.default_rng(0).standard_normal((2, 3))
    actions = np.array([[4, 5, END_ID], [6, END_ID, 0]])
    mask = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
    check = finite_difference_check(
        lambda s: ml_loss(sequence_log_probs(policy, features, actions), mask), policy.store, probes=20
    )
    assert check < 1e-4


def test_critic_gradients_match_finite_differences():
    critic = CriticNetwork.create(7, 3, 4, 5, seed=1)
    features = np.random.default_rng(1).standard_normal((2, 3))
    actions = np.array([[4, 5, END_ID], [6, 4, END_ID]])

    def f(s):
        values = critic_values(critic, features, actions)
        return T.total(T.mul(values, values))

    assert finite_difference_check(f, critic.store, probes=20) < 1e-4


def test_critic_values_pair_with_actions():
    critic = CriticNetwork.create(7, 3, 4, 5)
    values = critic_values(critic, np.zeros((3, 3)), np.full((3, 4), 4))
    assert values.shape == (3, 4)
    # the first state sees only the start marker and the context
    assert np.allclose(values.data[:, 0], values.data[0, 0])


def test_beam_width_one_is_greedy():
    policy = PolicyNetwork.create(8, 3, 4, 5, seed=3)
    features = np.array([1.0, 0.0, -1.0])
    state, last, expected = policy.start(features), START_ID, []
    for _ in range(6):
        log_probs, state = policy.step(last, state)
        last = int(np.argmax(log_probs))
        expected.append(last)
        if last == END_ID:
            break
    assert beam_decode(policy, features, 1, 6) == expected
    assert greedy_decode(policy, features, 6) == expected


@pytest.mark.parametrize("seed", range(5))
def test_wide_beam_finds_the_exhaustive_optimum(seed):
    policy = TablePolicy(vocab_size=5, seed=seed)
    candidates = list(_complete_sequences(5, 3))
    best = min(candidates, key=lambda tokens: (-_sequence_score(policy, tokens), tokens))
    assert beam_decode(policy, None, beam_width=len(candidates), max_len=3) == list(best)


def test_finished_hypotheses_stay_in_the_beam():
    policy = FixedPolicy(
        {
            START_ID: [0.0, 0.0, 0.5, 0.0, 0.49, 0.01],
            4: [0.0, 0.0, 0.3, 0.0, 0.0, 0.7],
            5: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    )
    with np.errstate(divide="ignore"):
        assert beam_decode(policy, None, beam_width=2, max_len=4) == [END_ID]


def test_equal_scores_prefer_lower_token_ids():
    uniform = FixedPolicy({token: [0.2] * 5 for token in range(5)})
    assert beam_decode(uniform, None, beam_width=3, max_len=2) == [END_ID]
    assert beam_decode(uniform, None, beam_width=1, max_len=2) == [0, 0]


def test_beam_rejects_bad_arguments():
    uniform = FixedPolicy({START_ID: [0.5, 0.5]})
    with pytest.raises(ValueError):
        beam_decode(uniform, None, 0, 3)
    with pytest.raises(ValueError):
        beam_decode(uniform, None, 2, 0)
