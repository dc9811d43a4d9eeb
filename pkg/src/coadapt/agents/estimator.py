"""Estimator-style wrapper around :func:`train_run`."""

from dataclasses import fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from coadapt.agents.config import Dr3Config, TrainConfig
from coadapt.agents.trainer import train_run
from coadapt.envdata.dataset import OfflineDataset
from coadapt.exceptions import ConfigError

__all__ = ["OfflineQLearner"]

_CONFIG_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name != "dr3")


class OfflineQLearner(BaseEstimator):
    """Offline Q-learner with ``fit`` / ``predict`` / ``transform``.

    Constructor arguments mirror :class:`TrainConfig`, with the DR3 penalty
    flattened into ``dr3_variant`` and ``dr3_coef``. ``fit`` takes an
    :class:`OfflineDataset`; ``predict`` returns head-averaged Q-values for
    observations and ``transform`` returns their penultimate features.

    Attributes
    ----------
    network_ : QNetwork
    trace_ : MetricTrace
    """

    def __init__(
        self,
        selector="expected",
        loss_head="td",
        cql_alpha=0.0,
        rem_heads=1,
        rem_loss="huber",
        dr3_variant="off",
        dr3_coef=0.0,
        gamma=None,
        lr=1e-3,
        optimizer="adam",
        batch_size=64,
        target_period=10,
        total_steps=10_000,
        eval_every=1000,
        seed=0,
        head_mode="state_multihead",
        hidden=(64, 64),
        srank_delta=0.01,
    ):
        self.selector = selector
        self.loss_head = loss_head
        self.cql_alpha = cql_alpha
        self.rem_heads = rem_heads
        self.rem_loss = rem_loss
        self.dr3_variant = dr3_variant
        self.dr3_coef = dr3_coef
        self.gamma = gamma
        self.lr = lr
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.target_period = target_period
        self.total_steps = total_steps
        self.eval_every = eval_every
        self.seed = seed
        self.head_mode = head_mode
        self.hidden = hidden
        self.srank_delta = srank_delta

    def to_config(self):
        params = self.get_params()
        kwargs = {k: params[k] for k in _CONFIG_KEYS if k in params}
        dr3 = Dr3Config.make(params["dr3_variant"], params["dr3_coef"]) if params["dr3_variant"] != "off" else Dr3Config()
        return TrainConfig(dr3=dr3, **kwargs)

    def fit(self, X, y=None, behavior=None, grid=None, obs_map=None):
        """Train on ``X``, an :class:`OfflineDataset`; ``y`` is ignored."""
        if not isinstance(X, OfflineDataset):
            raise ConfigError("fit expects an OfflineDataset")
        self.network_, self.trace_ = train_run(X, self.to_config(), behavior, grid, obs_map)
        self.n_features_in_ = X.arrays["obs"].shape[1]
        return self

    def _obs(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ConfigError(f"expected {self.n_features_in_} observation features, got {X.shape[1]}")
        return X

    def predict(self, X):
        """Head-averaged Q-values, shape ``(n, n_actions)``."""
        return self.network_.q_values(self._obs(X))

    def transform(self, X, actions=None):
        """Penultimate features; per action ``(n, A, d)`` unless ``actions`` is given."""
        return self.network_.features(self._obs(X), actions)

    def q_values(self, X):
        return self.predict(X)
