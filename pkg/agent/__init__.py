from .beam import beam_decode, greedy_decode
from .critic import CriticNetwork, critic_values
from .losses import critic_kl_loss, critic_l2_loss, ml_loss, policy_gradient_loss
from .policy import PolicyNetwork, encode_context, policy_step, sequence_log_probs
from .returns import advantage, episode_returns, lambda_returns, normalize_unit, unit_affine
from .trajectory import Trajectory, sample_batch, sample_episode
