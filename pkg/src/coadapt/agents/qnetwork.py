"""Online and target Q-networks over both head layouts.

Both layouts are evaluated for every action at once and return Q-values of
shape ``(n, heads, actions)`` and per-action features of shape
``(n, actions, d)``:

* ``state_multihead``: the network maps an observation to ``heads * actions``
  outputs and the feature of ``(s, a)`` is the shared state feature.
* ``state_action_scalar``: the network maps ``[obs, onehot(a)]`` to one
  output per head and the feature depends on the action.
"""

from dataclasses import dataclass, replace

import numpy as np

from coadapt.exceptions import ShapeError
from coadapt.numerics.mlp import backward_from_cache, init_mlp, mlp_forward_cache
from coadapt.numerics.optim import AdamState, adam_init

__all__ = ["QNetwork", "make_qnetwork", "NetworkEval", "evaluate", "backprop"]


@dataclass(frozen=True, eq=False)
class NetworkEval:
    q: np.ndarray  # (n, heads, actions)
    features: np.ndarray  # (n, actions, d)
    cache: object
    n: int


def _inputs(params, obs, n_actions):
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2:
        raise ShapeError("observations must be a 2-D batch")
    if params.head_mode == "state_multihead":
        return obs
    n = obs.shape[0]
    tiled = np.repeat(obs, n_actions, axis=0)
    onehot = np.tile(np.eye(n_actions), (n, 1))
    return np.concatenate([tiled, onehot], axis=1)


def evaluate(params, obs, n_actions, n_heads=1):
    """Q-values and features for every action; keeps the cache for :func:`backprop`."""
    cache = mlp_forward_cache(params, _inputs(params, obs, n_actions))
    n = np.asarray(obs).shape[0]
    feats = cache.features
    if params.head_mode == "state_multihead":
        q = cache.outputs.reshape(n, n_heads, n_actions)
        f = np.broadcast_to(feats[:, None, :], (n, n_actions, feats.shape[1]))
    else:
        q = cache.outputs.reshape(n, n_actions, n_heads).transpose(0, 2, 1)
        f = feats.reshape(n, n_actions, feats.shape[1])
    return NetworkEval(q, f, cache, n)


def backprop(params, ev, d_q, d_features=None):
    """Parameter gradient of ``sum(d_q * q) + sum(d_features * features)``."""
    n, k, a = ev.q.shape
    if d_q.shape != ev.q.shape:
        raise ShapeError(f"d_q {d_q.shape} does not match q {ev.q.shape}")
    if params.head_mode == "state_multihead":
        up = d_q.reshape(n, k * a)
        fu = None if d_features is None else d_features.sum(axis=1)
    else:
        up = d_q.transpose(0, 2, 1).reshape(n * a, k)
        fu = None if d_features is None else d_features.reshape(n * a, -1)
    return backward_from_cache(params, ev.cache, up, fu)


@dataclass(frozen=True, eq=False)
class QNetwork:
    """Online parameters, the periodically synced target copy and optimizer state."""

    params: object
    target_params: object
    opt_state: AdamState
    n_actions: int
    n_heads: int = 1
    step: int = 0

    def __post_init__(self):
        a = self.params.arrays()
        b = self.target_params.arrays()
        if len(a) != len(b) or any(x.shape != y.shape for x, y in zip(a, b)):
            raise ShapeError("target parameters are not shape-congruent with the online parameters")

    @property
    def head_mode(self):
        return self.params.head_mode

    def evaluate(self, obs, target=False):
        params = self.target_params if target else self.params
        return evaluate(params, obs, self.n_actions, self.n_heads)

    def q_values(self, obs):
        """Head-averaged Q-values, shape ``(n, actions)``."""
        return self.evaluate(np.atleast_2d(obs)).q.mean(axis=1)

    def features(self, obs, actions=None):
        """Features of ``(s, a)``; with no actions, the per-action features ``(n, A, d)``."""
        f = self.evaluate(np.atleast_2d(obs)).features
        if actions is None:
            return f
        return f[np.arange(f.shape[0]), np.asarray(actions)]

    def sync_target(self):
        return replace(self, target_params=self.params.copy())


def make_qnetwork(obs_dim, n_actions, hidden, rng, head_mode="state_multihead", n_heads=1):
    if head_mode == "state_multihead":
        sizes = [obs_dim, *hidden, n_heads * n_actions]
    else:
        sizes = [obs_dim + n_actions, *hidden, n_heads]
    params = init_mlp(sizes, rng, head_mode)
    return QNetwork(params, params.copy(), adam_init(params), n_actions, n_heads, 0)
