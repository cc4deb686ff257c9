import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace


REWARD_NAMES = ("ml", "bleu", "rouge_l", "cider", "wmd", "kernel_cos", "trl", "constant")
ENCODER_NAMES = ("bigru_maxpool", "bigru_meanpool", "self_attentive")


@dataclass(frozen=True)
class TrainConfig:
    """
    Every knob of a training run. Defaults are the desk-scale preset.

    Attributes:
        preset (str): "desk" or "full"; informational once fields are resolved.
        d_emb (int): Token embedding size.
        d_h (int): Hidden size of policy and critic.
        batch (int): Scenes per mini-batch.
        max_len (int): Episode length cap.
        actor_pretrain_epochs (int): Teacher-forced pretraining epochs.
        critic_pretrain_epochs (int): Critic epochs against the frozen pretrained actor.
        joint_epochs (int): Actor-critic epochs.
        lam (float): Lambda of the lambda-returns.
        gamma (float): Discount; 1 disables discounting.
        beam (int): Beam width at evaluation.
        reward (str): Reward used for the actor-critic phase; "ml" skips it.
        aggregation (str): "mean" or "max" over references.
        granularity (str): "terminal" or "incremental" per-step rewards.
        similarity (str): Distance-to-similarity transform of the WMD reward.
        kernel_span (int): Window span k of the kernel-cosine reward.
        brevity (str): Brevity penalty mode of the embedding rewards, "standard" or "paper_literal".
        critic_loss (str): "kl" or "l2".
        critic_updates (int): Critic updates per actor update in the joint phase.
        lr_pretrain (float): Adam learning rate of teacher-forced pretraining.
        lr_actor (float): Actor learning rate in the joint phase.
        lr_critic (float): Critic learning rate.
        grad_clip (float): Global gradient-norm clip; 0 disables it.
        seed (int): Seed of every random draw in the run.
        workers (int): Worker threads for sampling and evaluation.
        splits (tuple): Train/val/test fractions.
        scorer_kind (str): Encoder of the learned reward model.
        scorer_cell (str): Recurrent cell of the reward model encoder, "gru" or "lstm".
        scorer_d_h (int): Hidden size of the reward model encoder.
        scorer_epochs (int): Reward model training epochs.
        scorer_pairs (int): Synthetic similarity pairs for reward model training.
        scorer_lr (float): Reward model learning rate.
    """

    preset: str = "desk"
    d_emb: int = 64
    d_h: int = 64
    batch: int = 16
    max_len: int = 16
    actor_pretrain_epochs: int = 5
    critic_pretrain_epochs: int = 7
    joint_epochs: int = 5
    lam: float = 1.0
    gamma: float = 1.0
    beam: int = 5
    reward: str = "bleu"
    aggregation: str = "mean"
    granularity: str = "terminal"
    similarity: str = "exp"
    kernel_span: int = 1
    brevity: str = "standard"
    critic_loss: str = "kl"
    critic_updates: int = 1
    lr_pretrain: float = 5e-3
    lr_actor: float = 5e-4
    lr_critic: float = 1e-3
    grad_clip: float = 5.0
    seed: int = 0
    workers: int = 1
    splits: tuple[float, float, float] = (0.8, 0.1, 0.1)
    scorer_kind: str = "bigru_maxpool"
    scorer_cell: str = "gru"
    scorer_d_h: int = 32
    scorer_epochs: int = 30
    scorer_pairs: int = 1000
    scorer_lr: float = 1e-2

    def __post_init__(self):
        for name in ("d_emb", "d_h", "batch", "max_len", "beam", "kernel_span", "critic_updates", "workers", "scorer_d_h"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("actor_pretrain_epochs", "critic_pretrain_epochs", "joint_epochs", "scorer_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.reward not in REWARD_NAMES:
            raise ValueError(f"unknown reward '{self.reward}', expected one of {', '.join(REWARD_NAMES)}")
        if self.scorer_kind not in ENCODER_NAMES:
            raise ValueError(f"unknown scorer kind '{self.scorer_kind}'")
        _choice("aggregation", self.aggregation, ("mean", "max"))
        _choice("granularity", self.granularity, ("terminal", "incremental"))
        _choice("similarity", self.similarity, ("exp", "reciprocal"))
        _choice("brevity", self.brevity, ("standard", "paper_literal"))
        _choice("critic_loss", self.critic_loss, ("kl", "l2"))
        _choice("scorer_cell", self.scorer_cell, ("gru", "lstm"))
        _choice("preset", self.preset, ("desk", "full"))
        if len(self.splits) != 3 or abs(sum(self.splits) - 1.0) > 1e-9 or min(self.splits) < 0:
            raise ValueError(f"splits must be three non-negative fractions summing to 1, got {self.splits}")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides) -> "TrainConfig":
        """Full-size preset: 512-dimensional embeddings and hidden states, batches of 80."""
        return cls(**{"preset": "full", "d_emb": 512, "d_h": 512, "batch": 80, **overrides})

    def override(self, **changes) -> "TrainConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        data = asdict(self)
        data["splits"] = list(self.splits)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        if "splits" in data:
            data["splits"] = tuple(data["splits"])
        return cls(**data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _choice(name: str, value: str, allowed: tuple[str, ...]) -> None:
    if value not in allowed:
        raise ValueError(f"{name} must be one of {', '.join(allowed)}, got '{value}'")
