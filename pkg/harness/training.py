import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from agent.critic import CriticNetwork, critic_values
from agent.losses import CRITIC_LOSSES, ml_loss, policy_gradient_loss
from agent.policy import PolicyNetwork, sequence_log_probs
from agent.returns import UNIT_HIGH, UNIT_LOW, unit_affine
from agent.trajectory import Trajectory, sample_batch
from core.corpus import Corpus, Scene
from core.errors import ModelError
from core.vocabulary import PAD_ID, with_end
from harness.config import TrainConfig
from harness.phases import TrainingPhase
from harness.pool import run_pool
from harness.rewards import BaseReward
from nn.params import ParameterStore, adam_step, clip_grad_norm
from nn.tensor import Tape, backward


logger = logging.getLogger(__name__)

PHASES = ("actor_pretrain", "critic_pretrain", "joint", "done")


@dataclass
class RunState:
    """
    Everything a run needs to continue from an epoch boundary.

    Attributes:
        config (TrainConfig): Resolved configuration.
        policy (PolicyNetwork): Actor.
        critic (CriticNetwork): Critic.
        rng (np.random.Generator): Source of every random draw in the run.
        phase (str): Phase to run next, one of PHASES.
        epoch (int): Epochs already completed in `phase`.
        history (dict[str, list[float]]): Per-epoch losses and rewards.
    """

    config: TrainConfig
    policy: PolicyNetwork
    critic: CriticNetwork
    rng: np.random.Generator
    phase: str = "actor_pretrain"
    epoch: int = 0
    history: dict[str, list[float]] = field(
        default_factory=lambda: {
            "actor_pretrain": [],
            "critic_pretrain": [],
            "joint_actor": [],
            "joint_critic": [],
            "joint_reward": [],
        }
    )

    @classmethod
    def create(cls, config: TrainConfig, vocab_size: int, d_img: int) -> "RunState":
        policy = PolicyNetwork.create(vocab_size, d_img, config.d_emb, config.d_h, seed=config.seed)
        critic = CriticNetwork.create(vocab_size, d_img, config.d_emb, config.d_h, seed=config.seed + 1)
        return cls(config, policy, critic, np.random.default_rng(config.seed))


def pad_sequences(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pads integer sequences; returns (ids, mask) of shape (B, max length)."""
    steps = max(len(s) for s in seqs)
    ids = np.full((len(seqs), steps), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), steps))
    for b, s in enumerate(seqs):
        ids[b, : len(s)] = s
        mask[b, : len(s)] = 1.0
    return ids, mask


def _batches(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield [int(i) for i in order[start : start + size]]


def _features(scenes: Sequence[Scene]) -> np.ndarray:
    return np.stack([s.features for s in scenes])


def _apply(store: ParameterStore, lr: float, grad_clip: float) -> None:
    if grad_clip > 0:
        clip_grad_norm(store, grad_clip)
    adam_step(store, lr)


def ml_epoch(policy: PolicyNetwork, corpus: Corpus, config: TrainConfig, rng: np.random.Generator) -> float:
    """One teacher-forced epoch over every (scene, reference) pair; returns the per-token cross-entropy."""
    items = [(i, r) for i, scene in enumerate(corpus.scenes) for r in range(len(scene.references))]
    total_nll = 0.0
    total_tokens = 0.0
    for batch in _batches(rng.permutation(len(items)), config.batch):
        picked = [items[k] for k in batch]
        scenes = [corpus.scenes[i] for i, _ in picked]
        targets, mask = pad_sequences([with_end(corpus.scenes[i].references[r]) for i, r in picked])
        tokens = float(mask.sum())
        with Tape() as tape:
            log_probs = sequence_log_probs(policy, _features(scenes), targets)
            loss = ml_loss(log_probs, mask) * (1.0 / tokens)
        total_nll += float(loss.data) * tokens
        total_tokens += tokens
        backward(tape, loss)
        _apply(policy.store, config.lr_pretrain, config.grad_clip)
    return total_nll / max(total_tokens, 1.0)


def pretrain_ml(
    policy: PolicyNetwork,
    corpus: Corpus,
    epochs: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[float]:
    """
    Maximum-likelihood pretraining with teacher forcing.

    Returns:
        list[float]: Per-epoch mean per-token cross-entropy; empty when epochs is 0.
    """
    if len(corpus) == 0:
        raise ValueError("cannot pretrain on an empty corpus")
    curve = []
    for epoch in range(epochs):
        curve.append(ml_epoch(policy, corpus, config, rng))
        logger.info("actor pretrain epoch %d/%d: cross-entropy %.5f", epoch + 1, epochs, curve[-1])
    return curve


def episode_rewards(
    reward_fn: BaseReward,
    trajectories: Sequence[Trajectory],
    scenes: Sequence[Scene],
    workers: int = 1,
) -> list[Trajectory]:
    rewards = run_pool(
        lambda pair: reward_fn.episode_rewards(pair[0].actions, pair[1].references),
        list(zip(trajectories, scenes)),
        workers,
    )
    return [traj.with_rewards(r) for traj, r in zip(trajectories, rewards)]


def _critic_targets(trajectories: Sequence[Trajectory], values: np.ndarray, config: TrainConfig):
    """
    Normalized returns plus the per-element affine map applied to the critic output.

    One min-max map per episode is fitted on its returns and values together; padded
    positions map to 0.5.
    """
    batch, steps = values.shape
    q = np.full((batch, steps), 0.5)
    scale = np.zeros((batch, steps))
    shift = np.full((batch, steps), 0.5)
    for b, traj in enumerate(trajectories):
        n = len(traj)
        filled = traj.with_values(values[b, :n], config.lam, config.gamma)
        a, c = unit_affine(np.concatenate([filled.returns, filled.values]))
        q[b, :n] = np.clip(a * filled.returns + c, UNIT_LOW, UNIT_HIGH)
        scale[b, :n] = a
        shift[b, :n] = c
    return q, scale, shift


def critic_update(critic: CriticNetwork, trajectories: Sequence[Trajectory], config: TrainConfig) -> float:
    """One critic step on rewarded trajectories; returns the loss per episode."""
    actions, mask = pad_sequences([t.actions for t in trajectories])
    features = np.stack([t.features for t in trajectories])
    loss_fn = CRITIC_LOSSES[config.critic_loss]

    with Tape() as tape:
        values = critic_values(critic, features, actions)
        q, scale, shift = _critic_targets(trajectories, values.data, config)
        v_norm = values * scale + shift
        loss = loss_fn(q, v_norm, mask) * (1.0 / len(trajectories))
    backward(tape, loss)
    _apply(critic.store, config.lr_critic, config.grad_clip)
    return float(loss.data)


def _sample_rewarded(
    policy: PolicyNetwork,
    reward_fn: BaseReward,
    scenes: Sequence[Scene],
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[Trajectory]:
    trajectories = sample_batch(policy, _features(scenes), config.max_len, rng)
    return episode_rewards(reward_fn, trajectories, scenes, config.workers)


def critic_epoch(
    critic: CriticNetwork,
    policy: PolicyNetwork,
    reward_fn: BaseReward,
    corpus: Corpus,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float:
    losses = []
    for batch in _batches(rng.permutation(len(corpus)), config.batch):
        scenes = [corpus.scenes[i] for i in batch]
        trajectories = _sample_rewarded(policy, reward_fn, scenes, config, rng)
        losses.append(critic_update(critic, trajectories, config))
    return float(np.mean(losses))


def pretrain_critic(
    critic: CriticNetwork,
    policy: PolicyNetwork,
    reward_fn: BaseReward,
    corpus: Corpus,
    epochs: int,
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[float]:
    """
    Trains the critic on episodes sampled from a fixed pretrained actor.

    Raises:
        ModelError: If the policy is not frozen.
    """
    if not policy.store.frozen:
        raise ModelError("policy must be frozen during critic pretraining")
    curve = []
    for epoch in range(epochs):
        curve.append(critic_epoch(critic, policy, reward_fn, corpus, config, rng))
        logger.info("critic pretrain epoch %d/%d: loss %.5f", epoch + 1, epochs, curve[-1])
    return curve


def joint_epoch(
    policy: PolicyNetwork,
    critic: CriticNetwork,
    reward_fn: BaseReward,
    corpus: Corpus,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[float, float, float]:
    """One actor-critic epoch; returns mean actor loss, mean critic loss and mean episode reward."""
    actor_losses, critic_losses, rewards = [], [], []
    for batch in _batches(rng.permutation(len(corpus)), config.batch):
        scenes = [corpus.scenes[i] for i in batch]
        trajectories = _sample_rewarded(policy, reward_fn, scenes, config, rng)
        rewards.extend(float(np.sum(t.rewards)) for t in trajectories)

        actions, mask = pad_sequences([t.actions for t in trajectories])
        features = _features(scenes)
        values = critic_values(critic, features, actions).data
        advantages = np.zeros_like(mask)
        for b, traj in enumerate(trajectories):
            advantages[b, : len(traj)] = traj.with_values(values[b, : len(traj)], config.lam, config.gamma).advantages

        with Tape() as tape:
            log_probs = sequence_log_probs(policy, features, actions)
            loss = policy_gradient_loss(log_probs, advantages, mask) * (1.0 / len(trajectories))
        backward(tape, loss)
        _apply(policy.store, config.lr_actor, config.grad_clip)
        actor_losses.append(float(loss.data))

        for _ in range(config.critic_updates):
            critic_losses.append(critic_update(critic, trajectories, config))

    return float(np.mean(actor_losses)), float(np.mean(critic_losses)), float(np.mean(rewards))


def _check_reward_frozen(reward_fn: BaseReward) -> None:
    model = getattr(reward_fn, "model", None)
    if model is not None and not model.frozen:
        raise ModelError("reward model must be frozen")


def train_actor_critic(
    policy: PolicyNetwork,
    critic: CriticNetwork,
    reward_fn: BaseReward,
    corpus: Corpus,
    config: TrainConfig,
    rng: np.random.Generator,
    pretrained: bool = False,
    allow_unpretrained: bool = False,
) -> dict[str, list[float]]:
    """
    Joint actor-critic training for `config.joint_epochs` epochs.

    Args:
        pretrained (bool): Whether both networks went through their pretraining phases.
        allow_unpretrained (bool): Skip the pretraining requirement.

    Returns:
        dict[str, list[float]]: Per-epoch "actor", "critic" and "reward" curves.

    Raises:
        ModelError: If the reward model is not frozen, or the networks are not pretrained
            and no override was given.
    """
    _check_reward_frozen(reward_fn)
    if not (pretrained or allow_unpretrained):
        raise ModelError("actor and critic must be pretrained before joint training (or pass allow_unpretrained)")

    curves: dict[str, list[float]] = {"actor": [], "critic": [], "reward": []}
    for epoch in range(config.joint_epochs):
        actor, critic_loss, reward = joint_epoch(policy, critic, reward_fn, corpus, config, rng)
        curves["actor"].append(actor)
        curves["critic"].append(critic_loss)
        curves["reward"].append(reward)
        logger.info(
            "joint epoch %d/%d: actor %.5f critic %.5f reward %.5f",
            epoch + 1, config.joint_epochs, actor, critic_loss, reward,
        )
    return curves


def _frozen_components(reward_fn: BaseReward | None) -> dict[str, ParameterStore]:
    model = getattr(reward_fn, "model", None)
    return {"reward model": model.store} if model is not None else {}


def run_schedule(
    state: RunState,
    train: Corpus,
    reward_fn: BaseReward | None,
    stop_after: int | None = None,
    on_epoch=None,
    verbose: bool = True,
) -> bool:
    """
    Runs the remaining phases of a run, one epoch at a time.

    Maximum-likelihood runs (no reward function) stop after actor pretraining.

    Args:
        state (RunState): Run to advance; updated in place.
        train (Corpus): Training split.
        reward_fn (BaseReward | None): Episode reward, or None.
        stop_after (int | None): Stop after this many epochs in this call.
        on_epoch (Callable[[RunState], None] | None): Called at every epoch boundary.
        verbose (bool): Whether to print phase banners.

    Returns:
        bool: True once every phase has completed.
    """
    if reward_fn is not None:
        _check_reward_frozen(reward_fn)
    config = state.config
    totals = {
        "actor_pretrain": config.actor_pretrain_epochs,
        "critic_pretrain": config.critic_pretrain_epochs if reward_fn is not None else 0,
        "joint": config.joint_epochs if reward_fn is not None else 0,
    }
    ran = 0

    while state.phase != "done":
        phase = state.phase
        frozen = _frozen_components(reward_fn)
        if phase == "critic_pretrain":
            state.policy.store.freeze()
            frozen["policy"] = state.policy.store

        try:
            with TrainingPhase(phase, frozen, verbose=verbose and state.epoch < totals[phase]):
                while state.epoch < totals[phase]:
                    if stop_after is not None and ran >= stop_after:
                        return False
                    _run_epoch(state, phase, train, reward_fn)
                    state.epoch += 1
                    ran += 1
                    if on_epoch is not None:
                        on_epoch(state)
        finally:
            if phase == "critic_pretrain":
                state.policy.store.unfreeze()

        state.phase = PHASES[PHASES.index(phase) + 1]
        state.epoch = 0
        if on_epoch is not None:
            on_epoch(state)

    return True


def _run_epoch(state: RunState, phase: str, train: Corpus, reward_fn: BaseReward | None) -> None:
    config, rng, history = state.config, state.rng, state.history
    match phase:
        case "actor_pretrain":
            history["actor_pretrain"].append(ml_epoch(state.policy, train, config, rng))
            logger.info("actor pretrain epoch %d: cross-entropy %.5f", state.epoch + 1, history["actor_pretrain"][-1])
        case "critic_pretrain":
            loss = critic_epoch(state.critic, state.policy, reward_fn, train, config, rng)
            history["critic_pretrain"].append(loss)
            logger.info("critic pretrain epoch %d: loss %.5f", state.epoch + 1, loss)
        case "joint":
            actor, critic_loss, reward = joint_epoch(state.policy, state.critic, reward_fn, train, config, rng)
            history["joint_actor"].append(actor)
            history["joint_critic"].append(critic_loss)
            history["joint_reward"].append(reward)
            logger.info("joint epoch %d: actor %.5f critic %.5f reward %.5f", state.epoch + 1, actor, critic_loss, reward)
