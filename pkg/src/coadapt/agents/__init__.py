"""Offline TD agents: configuration, loss heads, networks and training loops."""

from coadapt.agents.config import DR3_VARIANTS, LOSS_HEADS, OPTIMIZERS, SELECTORS, Dr3Config, TrainConfig
from coadapt.agents.losses import (
    cql_penalty,
    dr3_penalty,
    huber,
    label_noise_penalty,
    logsumexp,
    rem_combine,
    rem_loss,
    sample_simplex,
)
from coadapt.agents.estimator import OfflineQLearner
from coadapt.agents.qnetwork import QNetwork, backprop, evaluate, make_qnetwork
from coadapt.agents.trainer import (
    IsotropicNoise,
    LabelNoiseTargets,
    backup_weights,
    checkpoint_metrics,
    compute_targets,
    noisy_td_run,
    train_run,
    train_step,
)

__all__ = [
    "DR3_VARIANTS",
    "LOSS_HEADS",
    "OPTIMIZERS",
    "SELECTORS",
    "Dr3Config",
    "IsotropicNoise",
    "LabelNoiseTargets",
    "OfflineQLearner",
    "QNetwork",
    "TrainConfig",
    "backprop",
    "backup_weights",
    "checkpoint_metrics",
    "compute_targets",
    "cql_penalty",
    "dr3_penalty",
    "evaluate",
    "huber",
    "label_noise_penalty",
    "logsumexp",
    "make_qnetwork",
    "noisy_td_run",
    "rem_combine",
    "rem_loss",
    "sample_simplex",
    "train_run",
    "train_step",
]
