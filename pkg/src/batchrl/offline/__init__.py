"""Offline learners trained purely on relabeled datasets."""
from .bcq import (
    ActionGenerator,
    BcqConfig,
    BcqLearner,
    Perturbation,
    bcq_generator_update,
    bcq_select_action,
    bcq_target,
    bcq_update,
    kl_to_standard_normal,
)
from .td3 import DeterministicActor, Td3Config, Td3Learner, td3_target, td3_update
from .train import LOG_COLUMNS, OfflinePolicy, load_policy, make_learner, save_policy, train_offline
