"""Observation maps from grid cells to feature vectors."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from coadapt.exceptions import DomainError

__all__ = ["OBS_KINDS", "ObservationMap", "observe", "observation_table"]

OBS_KINDS = ("onehot", "random_projection", "smoothed_random_projection")


@dataclass(frozen=True)
class ObservationMap:
    """How a cell is rendered for the learner.

    ``onehot`` gives a ``width * height`` indicator. ``random_projection``
    multiplies the (x, y) coordinates, scaled to [-1, 1], by a fixed
    Gaussian ``(dim, 2)`` matrix drawn from ``seed``.
    ``smoothed_random_projection`` averages those projections over in-grid
    cells within Manhattan distance ``radius``.
    """

    kind: str = "smoothed_random_projection"
    dim: int = 64
    seed: int = 0
    radius: int = 1

    def __post_init__(self):
        if self.kind not in OBS_KINDS:
            raise DomainError(f"unknown observation kind {self.kind!r}")
        if self.dim < 1 or self.radius < 0:
            raise DomainError("dim must be positive and radius non-negative")

    def output_dim(self, spec):
        return spec.n_states if self.kind == "onehot" else self.dim

    def projection(self):
        return np.random.default_rng(self.seed).standard_normal((self.dim, 2))


def _normalized_xy(spec, x, y):
    sx = 2.0 * x / (spec.width - 1) - 1.0 if spec.width > 1 else 0.0
    sy = 2.0 * y / (spec.height - 1) - 1.0 if spec.height > 1 else 0.0
    return np.array([sx, sy])


@lru_cache(maxsize=64)
def _table(obs_map, spec):
    n = spec.n_states
    if obs_map.kind == "onehot":
        table = np.eye(n)
    else:
        proj = obs_map.projection()
        raw = np.stack([proj @ _normalized_xy(spec, *spec.coords(s)) for s in range(n)])
        if obs_map.kind == "random_projection" or obs_map.radius == 0:
            table = raw
        else:
            r = obs_map.radius
            table = np.empty_like(raw)
            for s in range(n):
                x, y = spec.coords(s)
                acc = []
                for dy in range(-r, r + 1):
                    for dx in range(-r, r + 1):
                        nx, ny = x + dx, y + dy
                        if abs(dx) + abs(dy) <= r and 0 <= nx < spec.width and 0 <= ny < spec.height:
                            acc.append(raw[spec.state_id(nx, ny)])
                table[s] = np.mean(acc, axis=0)
    table.setflags(write=False)
    return table


def observation_table(obs_map, spec):
    """Observations of every cell, shape ``(n_states, output_dim)`` (read-only)."""
    return _table(obs_map, spec)


def observe(obs_map, spec, state):
    if not 0 <= state < spec.n_states:
        raise DomainError(f"state {state} is out of range")
    return observation_table(obs_map, spec)[state].copy()
