from .encoders import SentenceEncoder, encode, encode_batch
from .kernel import kernel_cosine, kernel_cosine_multi
from .reward_model import RewardModel, load_reward_model, save_reward_model, trl_reward, trl_step_rewards
from .scorer import PairScorer, pair_features, pair_score
from .training import ScorerConfig, make_similarity_pairs, train_scorer
