from .buffer import RolloutBuffer, compute_gae
from .evaluate import EvalStats, evaluate_policy
from .nets import Discriminator, PolicyNet, build_discriminator, build_policy
from .trainer import Trainer
from .updates import bc_update, gail_reward, gail_update, ppo_update

__all__ = [
    "Discriminator",
    "EvalStats",
    "PolicyNet",
    "RolloutBuffer",
    "Trainer",
    "bc_update",
    "build_discriminator",
    "build_policy",
    "compute_gae",
    "evaluate_policy",
    "gail_reward",
    "gail_update",
    "ppo_update",
]
