"""Task-agnostic exploration methods and the dataset collection loop."""
from ..errors import ConfigError
from .base import Explorer, Replay, collect, discounted_return
from .diayn import DiaynExplorer, SkillEnsemble, diayn_discriminator_update, diayn_reward, diayn_update
from .gep import GepExplorer, GepMemory, gep_sample_goal, gep_select_and_perturb
from .policies import LinearPolicy, StochasticPolicy
from .random_policies import RandomPolicyExplorer, UniformNoiseExplorer, random_policy_act
from .rnd import RndExplorer, RndModule, rnd_reward, rnd_update
from .sac import SacAgent, SacConfig, sac_critic_target, sac_update
from .sse import (
    SseExplorer,
    SseModels,
    intrinsic_pred_error_reward,
    sse_reward,
    sse_rollout_value,
    sse_update,
)

EXPLORERS = {
    cls.method: cls
    for cls in (RandomPolicyExplorer, GepExplorer, RndExplorer, DiaynExplorer, SseExplorer, UniformNoiseExplorer)
}


def make_explorer(method, spec, rng, **hyperparams):
    try:
        cls = EXPLORERS[method]
    except KeyError:
        raise ConfigError(f"unknown exploration method {method!r}; expected one of {sorted(EXPLORERS)}") from None
    return cls(spec, rng, **hyperparams)
