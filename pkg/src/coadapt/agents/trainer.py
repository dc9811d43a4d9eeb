"""Offline TD training: targets, one gradient step, and whole runs."""

import math
from dataclasses import replace

import numpy as np

from coadapt.agents.config import TrainConfig
from coadapt.agents.losses import (
    cql_penalty,
    dr3_penalty,
    label_noise_penalty,
    rem_combine,
    rem_loss,
    sample_simplex,
)
from coadapt.agents.qnetwork import QNetwork, backprop, evaluate, make_qnetwork
from coadapt.analysis.metrics import implicit_reg_value, mean_cosine, srank
from coadapt.analysis.stability import FeaturePair
from coadapt.analysis.trace import CheckpointRecord, MetricTrace
from coadapt.envdata.dataset import evaluate_policy
from coadapt.envdata.grid import N_ACTIONS
from coadapt.exceptions import ConfigError, DomainError, NumericError
from coadapt.numerics.optim import adam_step, sgd_step

__all__ = [
    "backup_weights",
    "compute_targets",
    "train_step",
    "train_run",
    "noisy_td_run",
    "checkpoint_metrics",
    "IsotropicNoise",
    "LabelNoiseTargets",
]


class IsotropicNoise:
    """Gaussian noise ``N(0, scale^2 I)`` added to every parameter update."""

    def __init__(self, scale):
        if not scale > 0:
            raise DomainError("noise scale must be positive")
        self.scale = float(scale)

    def __repr__(self):
        return f"isotropic({self.scale!r})"


class LabelNoiseTargets(IsotropicNoise):
    """Gaussian noise ``N(0, scale^2)`` added to each regression target."""

    def __repr__(self):
        return f"label_noise({self.scale!r})"


def backup_weights(selector, batch, target_q, behavior=None):
    """Per-transition weights over next actions used by the backup, shape ``(B, A)``.

    The bootstrapped value is ``sum_a w[i, a] * target_q[i, a]``; the same
    weights align the next-state features used by the DR3 penalty.
    """
    n, n_actions = target_q.shape
    if selector in ("sarsa", "mc"):
        if "next_action" not in batch:
            raise ConfigError("this selector needs the dataset next action")
        w = np.zeros((n, n_actions))
        w[np.arange(n), batch["next_action"]] = 1.0
        return w
    if selector == "expected":
        if behavior is None:
            raise ConfigError("the expected backup needs a behavior policy")
        probs = np.asarray(behavior.probs)
        if probs.shape[1] != n_actions:
            raise ConfigError("behavior policy and network disagree on the action count")
        return probs[batch["next_state"]]
    if selector == "max":
        w = np.zeros((n, n_actions))
        w[np.arange(n), np.argmax(target_q, axis=1)] = 1.0
        return w
    raise ConfigError(f"unknown selector {selector!r}")


def _targets(target_q, batch, selector, gamma, behavior):
    w = backup_weights(selector, batch, target_q, behavior)
    if selector == "mc":
        return np.asarray(batch["mc_return"], dtype=np.float64).copy(), w
    boot = np.sum(w * target_q, axis=1)
    reward = np.asarray(batch["reward"], dtype=np.float64)
    return np.where(batch["terminal"], reward, reward + gamma * boot), w


def _combined_target_q(net, next_obs, rem_weights):
    q = net.evaluate(next_obs, target=True).q
    if rem_weights is None:
        return q[:, 0, :] if q.shape[1] == 1 else q.mean(axis=1)
    return rem_combine(q, rem_weights)


def compute_targets(net, batch, selector, gamma, behavior=None, rem_weights=None):
    """Regression targets from the target network; constants with respect to the parameters.

    Terminal transitions get ``r``; ``mc`` returns the stored return-to-go.
    With several heads, ``rem_weights`` mixes the target heads (uniform
    average if omitted).
    """
    target_q = _combined_target_q(net, batch["next_obs"], rem_weights)
    return _targets(target_q, batch, selector, gamma, behavior)[0]


def _next_features(features_next, w):
    return np.einsum("ia,iad->id", w, features_next)


def train_step(net, batch, config, behavior=None, rem_weights=None, target_noise=None, param_noise=None):
    """One optimizer step on ``loss head + c0 * DR3``; the penalty sums over the batch.

    Parameters
    ----------
    net : QNetwork
    batch : dict of arrays
        Columns as in ``OfflineDataset.arrays``.
    config : TrainConfig
    behavior : StochasticPolicy, optional
        Needed by the ``expected`` selector.
    rem_weights : array, optional
        Simplex weights for the REM heads of this batch.
    target_noise : array, optional
        Added to the regression targets.
    param_noise : list of arrays, optional
        Added to the parameters after the optimizer step.

    Returns
    -------
    (QNetwork, dict)
        Updated network and the loss components of this batch.
    """
    gamma = config.gamma
    if gamma is None:
        raise ConfigError("train_step needs an explicit gamma in the config")
    obs = np.asarray(batch["obs"], dtype=np.float64)
    n = obs.shape[0]
    rows = np.arange(n)
    actions = np.asarray(batch["action"])
    rem = config.loss_head == "rem"
    if rem and rem_weights is None:
        raise ConfigError("REM needs simplex weights for every batch")

    target_q = _combined_target_q(net, batch["next_obs"], rem_weights if rem else None)
    y, w = _targets(target_q, batch, config.selector, gamma, behavior)
    if target_noise is not None:
        y = y + target_noise

    dr3 = config.dr3
    x = np.concatenate([obs, batch["next_obs"]]) if dr3.enabled else obs
    ev = evaluate(net.params, x, net.n_actions, net.n_heads)
    q = ev.q
    d_q = np.zeros_like(q)
    parts = {}

    q_data = q[rows, :, actions]
    if rem:
        value, d_heads = rem_loss(q_data, y, rem_weights, config.rem_loss)
        d_q[rows, :, actions] = d_heads
        parts["rem"] = value
        total = value
    else:
        err = q_data[:, 0] - y
        value = float(np.mean(err * err))
        d_q[rows, 0, actions] = 2.0 * err / n
        parts["td"] = value
        total = value
        if config.loss_head == "cql":
            pen, d_pen = cql_penalty(q[:n, 0, :], actions, config.cql_alpha)
            d_q[:n, 0, :] += d_pen
            parts["cql"] = pen
            total += pen

    d_feat = None
    if dr3.enabled:
        phi = ev.features[rows, actions]
        feat_next = ev.features[n:]
        phi_next = _next_features(feat_next, w)
        if dr3.variant == "label_noise":
            pen, d_phi, d_next, _ = label_noise_penalty(phi, phi_next, gamma, dr3.lyapunov_lr, dr3.lyapunov_iters)
        else:
            pen, d_phi, d_next = dr3_penalty(phi, phi_next, dr3.variant == "dot_stopgrad")
        scale = dr3.coef
        d_feat = np.zeros(ev.features.shape)
        d_feat[rows, actions] = scale * d_phi
        d_feat[n:] = scale * w[:, :, None] * d_next[:, None, :]
        parts["dr3"] = pen
        total += scale * pen

    parts["total"] = total
    if not math.isfinite(total):
        raise NumericError(f"non-finite loss at step {net.step + 1}: {parts}")
    grads = backprop(net.params, ev, d_q, d_feat)
    if config.optimizer == "adam":
        params, opt_state = adam_step(net.params, grads, net.opt_state, lr=config.lr)
    else:
        params, opt_state = sgd_step(net.params, grads, config.lr), net.opt_state
    if param_noise is not None:
        params = params.with_arrays([p + e for p, e in zip(params.arrays(), param_noise)])
    step = net.step + 1
    new = replace(net, params=params, opt_state=opt_state, step=step)
    if step % config.target_period == 0:
        new = new.sync_target()
    return new, parts


def _nan_record(step):
    nan = math.nan
    return CheckpointRecord(step, nan, nan, nan, nan, 0, nan, nan, True)


def checkpoint_metrics(net, arrays, config, gamma, behavior=None, spec=None, obs_map=None):
    """Full-dataset diagnostics of the current network as a :class:`CheckpointRecord`.

    ``loss`` is the unregularised objective of the run (squared error to
    the target-network backup, or to the returns for ``mc``), with REM
    heads averaged.
    """
    n = arrays["obs"].shape[0]
    rows = np.arange(n)
    with np.errstate(all="ignore"):
        target_q = _combined_target_q(net, arrays["next_obs"], None)
        y, w = _targets(target_q, arrays, config.selector, gamma, behavior)
        ev = net.evaluate(np.concatenate([arrays["obs"], arrays["next_obs"]]))
        q_data = ev.q[rows, :, arrays["action"]].mean(axis=1)
        loss = float(np.mean((q_data - y) ** 2))
        mean_q = float(np.mean(q_data))
    diverged = not (math.isfinite(loss) and math.isfinite(mean_q)) or abs(mean_q) > config.divergence_cap
    phi = ev.features[rows, arrays["action"]]
    phi_next = _next_features(ev.features[n:], w)
    if not (np.isfinite(phi).all() and np.isfinite(phi_next).all()):
        return replace(_nan_record(net.step), loss=loss, mean_q=mean_q)
    pair = FeaturePair(phi, phi_next, gamma)
    try:
        cos = mean_cosine(pair)
    except DomainError:
        cos = math.nan
    ret = math.nan
    if spec is not None and obs_map is not None and not diverged:
        ret = evaluate_policy(spec, obs_map, net, config.eval_episodes, config.eval_max_len)
    return CheckpointRecord(
        step=net.step,
        loss=loss,
        mean_q=mean_q,
        feat_dot=float(np.einsum("ij,ij->", phi, phi_next) / n),
        cosine=cos,
        srank=srank(phi, config.srank_delta),
        eval_return=float(ret),
        r_td=implicit_reg_value(pair),
        diverged=bool(diverged),
    )


def _resolve_gamma(config, dataset):
    if config.gamma is not None:
        return config
    if "gamma" not in dataset.metadata:
        raise ConfigError("no gamma in the config or the dataset metadata")
    return replace(config, gamma=float(dataset.gamma))


def _run(dataset, config, behavior, spec, obs_map, net, noise):
    if not isinstance(config, TrainConfig):
        raise ConfigError("config must be a TrainConfig")
    config = _resolve_gamma(config, dataset)
    if config.selector == "expected" and behavior is None:
        raise ConfigError("the expected backup needs a behavior policy")
    arrays = dataset.arrays
    n = len(dataset)
    init_ss, batch_ss, rem_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(4)
    if net is None:
        net = make_qnetwork(
            arrays["obs"].shape[1], N_ACTIONS, config.hidden, np.random.default_rng(init_ss),
            config.head_mode, config.n_heads,
        )
    elif not isinstance(net, QNetwork):
        raise ConfigError("net must be a QNetwork")
    batch_rng = np.random.default_rng(batch_ss)
    rem_rng = np.random.default_rng(rem_ss)
    noise_rng = np.random.default_rng(noise_ss)

    meta = {"config": config.to_flat()}
    meta["dataset"] = {k: dataset.metadata.get(k) for k in ("env", "seed", "n_transitions", "policy", "obs_kind")}
    if noise is not None:
        meta["noise"] = repr(noise)
    trace = MetricTrace(metadata=meta)

    for k in range(1, config.total_steps + 1):
        idx = batch_rng.integers(0, n, size=config.batch_size)
        batch = {key: col[idx] for key, col in arrays.items()}
        rem_w = sample_simplex(rem_rng, config.n_heads) if config.loss_head == "rem" else None
        t_noise = p_noise = None
        if isinstance(noise, LabelNoiseTargets):
            t_noise = noise_rng.normal(0.0, noise.scale, size=config.batch_size)
        elif isinstance(noise, IsotropicNoise):
            p_noise = [noise_rng.normal(0.0, noise.scale, size=a.shape) for a in net.params.arrays()]
        try:
            # Blow-ups surface as NumericError or a diverged checkpoint.
            with np.errstate(over="ignore", invalid="ignore"):
                net, _ = train_step(net, batch, config, behavior, rem_w, t_noise, p_noise)
        except NumericError:
            trace.append(_nan_record(net.step + 1))
            break
        if k % config.eval_every == 0 or k == config.total_steps:
            with np.errstate(over="ignore", invalid="ignore"):
                rec = checkpoint_metrics(net, arrays, config, config.gamma, behavior, spec, obs_map)
            trace.append(rec)
            if rec.diverged:
                break
    return net, trace


def train_run(dataset, config, behavior=None, spec=None, obs_map=None, net=None):
    """Train from scratch (or from ``net``) on an offline dataset.

    Batches are drawn uniformly with replacement. Checkpoints are taken
    every ``eval_every`` steps and at the final step; the run stops early
    with a divergence record when the loss turns non-finite or
    ``|mean Q|`` exceeds ``config.divergence_cap``. Returns ``(net, trace)``.
    """
    return _run(dataset, config, behavior, spec, obs_map, net, None)


def noisy_td_run(net, dataset, noise, config, behavior=None, spec=None, obs_map=None):
    """Plain-TD run with isotropic parameter noise or label noise on the targets.

    ``net`` may be ``None`` to initialise from the config seed. Returns the
    :class:`MetricTrace`, whose ``r_td`` column tracks the implicit
    regularizer at every checkpoint.
    """
    if not isinstance(noise, IsotropicNoise):
        raise ConfigError("noise must be IsotropicNoise or LabelNoiseTargets")
    if config.loss_head != "td":
        raise ConfigError("noisy runs use the plain TD loss")
    return _run(dataset, config, behavior, spec, obs_map, net, noise)[1]
