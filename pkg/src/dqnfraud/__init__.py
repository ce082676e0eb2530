"""Payment fraud detection as sequential decision making with a deep Q-network."""

from ._backend import BACKEND
from .agent import AgentConfig, DqnAgent, ReplayMemory, epsilon, evaluate, train
from .environment import EnvConfig, RateTracker, Transactions, TransactionEnv, compute_dr, compute_fr
from .rewards import (
    RewardConfig,
    imbalance_ratio,
    reward_balance,
    reward_combined,
    reward_monetary,
    reward_prime,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AgentConfig",
    "DqnAgent",
    "ReplayMemory",
    "epsilon",
    "evaluate",
    "train",
    "EnvConfig",
    "RateTracker",
    "Transactions",
    "TransactionEnv",
    "compute_dr",
    "compute_fr",
    "RewardConfig",
    "imbalance_ratio",
    "reward_balance",
    "reward_combined",
    "reward_monetary",
    "reward_prime",
]
