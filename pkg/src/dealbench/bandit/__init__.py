from .core import (
    HIGH,
    LOW,
    N_ARMS,
    BanditState,
    InactiveArm,
    RewardSpec,
    Schedule,
    TrainingInterrupted,
    TrainResult,
    compute_reward,
    least_sampled,
    load_checkpoint,
    save_checkpoint,
    select_action,
    softmax_policy,
    summarize,
    top_k,
    train,
    update,
)
from .envs import ConstantEnv, LiveNegotiationEnv, ScriptedNegotiationEnv, SeparableEnv, StrategyBuyer

__all__ = [
    "HIGH",
    "LOW",
    "N_ARMS",
    "BanditState",
    "ConstantEnv",
    "InactiveArm",
    "LiveNegotiationEnv",
    "RewardSpec",
    "Schedule",
    "ScriptedNegotiationEnv",
    "SeparableEnv",
    "StrategyBuyer",
    "TrainResult",
    "TrainingInterrupted",
    "compute_reward",
    "least_sampled",
    "load_checkpoint",
    "save_checkpoint",
    "select_action",
    "softmax_policy",
    "summarize",
    "top_k",
    "train",
    "update",
]
