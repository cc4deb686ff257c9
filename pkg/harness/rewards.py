from typing import Sequence

from core.corpus import Corpus
from core.embeddings import EmbeddingTable
from core.vocabulary import content
from metrics.bleu import bleu
from metrics.cider import IdfTable, build_idf, cider_sentence
from metrics.rouge import rouge_l_multi
from simscore.kernel import kernel_cosine_multi
from simscore.reward_model import RewardModel, snap_score, step_rewards, trl_reward, trl_step_rewards
from transport.wmd import wmd_reward


class BaseReward:
    """
    Sequence-level score turned into per-step episode rewards.

    Subclasses implement `score` over non-empty content; an episode whose content is
    empty (only the end marker) scores 0.

    Attributes:
        name (str): Registry name.
        granularity (str): "terminal" or "incremental".
    """

    name = "base"

    def __init__(self, granularity: str = "terminal"):
        self.granularity = granularity

    def score(self, candidate: Sequence[int], references: Sequence[Sequence[int]]) -> float:
        """
        Scores a candidate with non-empty content against its references.

        Must be implemented by subclasses.

        Raises:
            NotImplementedError: If not implemented by subclass.
        """
        raise NotImplementedError

    def sequence_score(self, candidate: Sequence[int], references: Sequence[Sequence[int]]) -> float:
        tokens = content(candidate)
        return snap_score(self.score(tokens, references)) if tokens else 0.0

    def episode_rewards(self, actions: Sequence[int], references: Sequence[Sequence[int]]) -> list[float]:
        return step_rewards(
            lambda t: self.sequence_score(actions[:t], references),
            len(actions),
            self.granularity,
        )


class BleuReward(BaseReward):
    name = "bleu"

    def score(self, candidate, references):
        return bleu(candidate, references, max_n=4, smoothing=True)


class RougeReward(BaseReward):
    name = "rouge_l"

    def score(self, candidate, references):
        return rouge_l_multi(candidate, references)


class CiderReward(BaseReward):
    name = "cider"

    def __init__(self, idf: IdfTable, granularity: str = "terminal"):
        super().__init__(granularity)
        self.idf = idf

    def score(self, candidate, references):
        return cider_sentence(candidate, references, self.idf)


class WmdReward(BaseReward):
    name = "wmd"

    def __init__(
        self,
        emb: EmbeddingTable,
        aggregation: str = "mean",
        transform: str = "exp",
        granularity: str = "terminal",
        bp_mode: str = "standard",
    ):
        super().__init__(granularity)
        self.emb = emb
        self.aggregation = aggregation
        self.transform = transform
        self.bp_mode = bp_mode

    def score(self, candidate, references):
        return wmd_reward(candidate, list(references), self.emb, self.aggregation, self.transform, self.bp_mode)


class KernelCosReward(BaseReward):
    name = "kernel_cos"

    def __init__(
        self,
        emb: EmbeddingTable,
        k: int = 1,
        aggregation: str = "mean",
        granularity: str = "terminal",
        bp_mode: str = "standard",
    ):
        super().__init__(granularity)
        self.emb = emb
        self.k = k
        self.aggregation = aggregation
        self.bp_mode = bp_mode

    def score(self, candidate, references):
        return kernel_cosine_multi(candidate, references, self.emb, self.k, self.aggregation, self.bp_mode)


class TrlReward(BaseReward):
    """Learned similarity reward; granularity and aggregation come from the frozen model."""

    name = "trl"

    def __init__(self, model: RewardModel, emb: EmbeddingTable):
        super().__init__(model.granularity)
        self.model = model
        self.emb = emb

    def score(self, candidate, references):
        return trl_reward(self.model, candidate, references, self.emb)

    def episode_rewards(self, actions, references):
        return trl_step_rewards(self.model, list(actions), references, self.emb)


class ConstantReward(BaseReward):
    """Emits the same episode reward regardless of the caption."""

    name = "constant"

    def __init__(self, value: float = 1.0, granularity: str = "terminal"):
        super().__init__(granularity)
        self.value = float(value)

    def score(self, candidate, references):
        return self.value

    def episode_rewards(self, actions, references):
        return step_rewards(lambda t: self.value, len(actions), self.granularity)


reward_suite = {
    "bleu": BleuReward,
    "rouge_l": RougeReward,
    "cider": CiderReward,
    "wmd": WmdReward,
    "kernel_cos": KernelCosReward,
    "trl": TrlReward,
    "constant": ConstantReward,
}


def build_reward(
    config,
    train: Corpus,
    emb: EmbeddingTable | None = None,
    reward_model: RewardModel | None = None,
) -> BaseReward | None:
    """
    Instantiates the reward named by `config.reward`; None for maximum-likelihood runs.

    Raises:
        ValueError: If the reward needs embeddings or a reward model that was not supplied.
    """
    name = config.reward
    if name == "ml":
        return None
    if name not in reward_suite:
        raise ValueError(f"unknown reward '{name}'")

    match name:
        case "cider":
            return CiderReward(build_idf(train.reference_sets()), config.granularity)
        case "wmd" | "kernel_cos" if emb is None:
            raise ValueError(f"reward '{name}' requires word embeddings")
        case "wmd":
            return WmdReward(emb, config.aggregation, config.similarity, config.granularity, config.brevity)
        case "kernel_cos":
            return KernelCosReward(emb, config.kernel_span, config.aggregation, config.granularity, config.brevity)
        case "trl":
            if reward_model is None or emb is None:
                raise ValueError("reward 'trl' requires a reward model and word embeddings")
            return TrlReward(reward_model, emb)
        case _:
            return reward_suite[name](granularity=config.granularity)
