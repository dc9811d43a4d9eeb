"""Offline datasets: collection, Monte-Carlo returns, evaluation and file I/O."""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from coadapt.envdata.grid import step
from coadapt.envdata.observe import observation_table
from coadapt.exceptions import DomainError

__all__ = [
    "Transition",
    "OfflineDataset",
    "collect_dataset",
    "mc_returns",
    "evaluate_policy",
    "write_dataset",
    "read_dataset",
]

_MAGIC = "#coadapt-dataset v1 "


@dataclass(frozen=True, eq=False)
class Transition:
    """One logged step ``(s, a, r, s', a', terminal)`` with observations.

    ``next_action`` is the action the behavior policy took (or would have
    taken, for the final logged step) at ``next_state``.
    """

    state: int
    obs: np.ndarray
    action: int
    reward: float
    next_state: int
    next_obs: np.ndarray
    next_action: int
    terminal: bool

    def __eq__(self, other):
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            (self.state, self.action, self.reward, self.next_state, self.next_action, self.terminal)
            == (other.state, other.action, other.reward, other.next_state, other.next_action, other.terminal)
            and np.array_equal(self.obs, other.obs)
            and np.array_equal(self.next_obs, other.next_obs)
        )


@dataclass(frozen=True, eq=False)
class OfflineDataset:
    """Immutable ordered transitions split into trajectories.

    ``episode_starts`` lists the index of the first transition of every
    trajectory; it begins with 0 and is strictly increasing.
    """

    transitions: tuple
    episode_starts: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        starts = tuple(int(i) for i in self.episode_starts)
        object.__setattr__(self, "episode_starts", starts)
        n = len(self.transitions)
        if n and (not starts or starts[0] != 0):
            raise DomainError("trajectory boundaries must start at index 0")
        if any(b <= a for a, b in zip(starts, starts[1:])) or (starts and starts[-1] >= max(n, 1)):
            raise DomainError("trajectory boundaries must be increasing and within range")
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        return len(self.transitions)

    def __eq__(self, other):
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        return (
            self.transitions == other.transitions
            and self.episode_starts == other.episode_starts
            and self.metadata == other.metadata
        )

    @property
    def gamma(self):
        return float(self.metadata["gamma"])

    def episodes(self):
        """``(start, stop)`` index ranges of each trajectory."""
        bounds = [*self.episode_starts, len(self)]
        return list(zip(bounds[:-1], bounds[1:]))

    @cached_property
    def arrays(self):
        """Column arrays keyed by field name, for vectorised training."""
        t = self.transitions
        out = {
            "state": np.array([x.state for x in t], dtype=np.int64),
            "action": np.array([x.action for x in t], dtype=np.int64),
            "reward": np.array([x.reward for x in t], dtype=np.float64),
            "next_state": np.array([x.next_state for x in t], dtype=np.int64),
            "next_action": np.array([x.next_action for x in t], dtype=np.int64),
            "terminal": np.array([x.terminal for x in t], dtype=bool),
            "obs": np.array([x.obs for x in t], dtype=np.float64),
            "next_obs": np.array([x.next_obs for x in t], dtype=np.float64),
        }
        out["mc_return"] = mc_returns(self) if "gamma" in self.metadata else np.zeros(len(t))
        for v in out.values():
            v.setflags(write=False)
        return out


def collect_dataset(spec, obs_map, policy, n_transitions, max_episode_len=100, seed=0):
    """Roll out ``policy`` from the start cell until ``n_transitions`` are logged.

    Episodes end on a terminal step or after ``max_episode_len`` steps.
    Only the caller's ``seed`` drives the sampling.
    """
    if n_transitions <= 0:
        raise DomainError("n_transitions must be positive")
    if max_episode_len <= 0:
        raise DomainError("max_episode_len must be positive")
    rng = np.random.default_rng(seed)
    table = observation_table(obs_map, spec)
    probs = policy.probs
    cum = np.cumsum(probs, axis=1)

    def sample(state):
        # Inverse-CDF draw keeps the stream to exactly one uniform per action.
        return int(min(np.searchsorted(cum[state], rng.random(), side="right"), probs.shape[1] - 1))

    transitions = []
    starts = []
    while len(transitions) < n_transitions:
        starts.append(len(transitions))
        state = spec.start_state
        action = sample(state)
        for _ in range(max_episode_len):
            nxt, reward, terminal = step(spec, state, action)
            next_action = sample(nxt)
            transitions.append(
                Transition(state, table[state].copy(), action, reward, nxt, table[nxt].copy(), next_action, terminal)
            )
            if terminal or len(transitions) >= n_transitions:
                break
            state, action = nxt, next_action
    meta = {
        "env": spec.name,
        "grid": spec.to_strings(),
        "start": list(spec.start),
        "gamma": spec.gamma,
        "obs_kind": obs_map.kind,
        "obs_dim": int(table.shape[1]),
        "obs_seed": obs_map.seed,
        "obs_radius": obs_map.radius,
        "policy": policy.description,
        "seed": seed,
        "max_episode_len": max_episode_len,
        "n_transitions": len(transitions),
    }
    return OfflineDataset(tuple(transitions), tuple(starts), meta)


def mc_returns(dataset):
    """Discounted return-to-go of every transition, truncated at trajectory ends."""
    gamma = dataset.gamma
    rewards = np.array([t.reward for t in dataset.transitions], dtype=np.float64)
    out = np.zeros_like(rewards)
    for start, stop in dataset.episodes():
        g = 0.0
        for i in range(stop - 1, start - 1, -1):
            g = rewards[i] + gamma * g
            out[i] = g
    return out


def evaluate_policy(spec, obs_map, q_function, episodes=1, max_len=100, seed=0):
    """Mean undiscounted return of the greedy policy of ``q_function``.

    ``q_function`` maps a batch of observations ``(n, dim)`` to Q-values
    ``(n, n_actions)``; objects with a ``q_values`` method are accepted too.
    Ties go to the lowest action index. ``seed`` is accepted for API
    symmetry; greedy rollouts on deterministic grids consume no randomness.
    """
    if episodes <= 0:
        raise DomainError("episodes must be positive")
    del seed
    fn = q_function.q_values if hasattr(q_function, "q_values") else q_function
    greedy = np.argmax(np.asarray(fn(observation_table(obs_map, spec))), axis=1)
    total = 0.0
    for _ in range(episodes):
        state = spec.start_state
        ret = 0.0
        for _ in range(max_len):
            state, reward, terminal = step(spec, state, int(greedy[state]))
            ret += reward
            if terminal:
                break
        total += ret
    return total / episodes


def _fmt(values):
    return ",".join(repr(float(v)) for v in values)


def write_dataset(dataset, path):
    """Write the line-oriented text format (metadata line, then one transition per line)."""
    meta = dict(dataset.metadata)
    meta["episode_starts"] = list(dataset.episode_starts)
    meta["n_transitions"] = len(dataset)
    lines = [_MAGIC + json.dumps(meta, sort_keys=True)]
    lines.append("# state\taction\treward\tnext_state\tnext_action\tterminal\tobs\tnext_obs")
    for t in dataset.transitions:
        lines.append(
            "\t".join(
                [
                    str(t.state),
                    str(t.action),
                    repr(float(t.reward)),
                    str(t.next_state),
                    str(t.next_action),
                    "1" if t.terminal else "0",
                    _fmt(t.obs),
                    _fmt(t.next_obs),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path):
    """Inverse of :func:`write_dataset`; raises ``ValueError`` naming the bad line."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(_MAGIC):
        raise ValueError(f"{path}: line 1: missing dataset header")
    meta = json.loads(text[0][len(_MAGIC):])
    starts = meta.pop("episode_starts")
    transitions = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        try:
            if len(parts) != 8:
                raise ValueError(f"expected 8 fields, got {len(parts)}")
            obs = np.array([float(v) for v in parts[6].split(",")]) if parts[6] else np.zeros(0)
            nobs = np.array([float(v) for v in parts[7].split(",")]) if parts[7] else np.zeros(0)
            transitions.append(
                Transition(
                    int(parts[0]), obs, int(parts[1]), float(parts[2]),
                    int(parts[3]), nobs, int(parts[4]), parts[5] == "1",
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if len(transitions) != meta.get("n_transitions", len(transitions)):
        raise ValueError(f"{path}: header promises {meta['n_transitions']} transitions, found {len(transitions)}")
    return OfflineDataset(tuple(transitions), tuple(starts), meta)
