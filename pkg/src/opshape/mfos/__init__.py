"""Model-free meta-agent: policy network, GA and PPO training, self-play."""

from .ga import GAConfig, ga_train
from .io import load_policy, save_policy
from .policy import MetaAgent, MetaPolicyParams, meta_policy_act, new_meta_policy
from .ppo import PPOConfig, ppo_train
from .rollout import MetaTrajectory, meta_rollout
from .selfplay import SelfPlayConfig, selfplay_train

__all__ = ["GAConfig", "MetaAgent", "MetaPolicyParams", "MetaTrajectory", "PPOConfig",
           "SelfPlayConfig", "ga_train", "load_policy", "meta_policy_act", "meta_rollout",
           "new_meta_policy", "ppo_train", "save_policy", "selfplay_train"]
