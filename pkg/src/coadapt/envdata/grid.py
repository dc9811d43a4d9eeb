"""Deterministic gridworld MDPs, value iteration and behavior policies.

Cells are addressed by ``(x, y)`` with ``x`` the column and ``y`` the row;
the integer state id of a cell is ``y * width + x``. Row 0 is the top row,
so ``UP`` decreases ``y``.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from coadapt.exceptions import DomainError

__all__ = [
    "Action",
    "CellKind",
    "GridSpec",
    "StochasticPolicy",
    "N_ACTIONS",
    "PRESET_GRIDS",
    "build_grid",
    "step",
    "transition_table",
    "value_iteration",
    "make_behavior_policy",
]


class CellKind(IntEnum):
    EMPTY = 0
    WALL = 1
    LAVA = 2
    GOAL = 3


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


N_ACTIONS = len(Action)
_MOVES = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.STAY: (0, 0),
}
_CHARS = {".": CellKind.EMPTY, "#": CellKind.WALL, "L": CellKind.LAVA, "G": CellKind.GOAL}


@dataclass(frozen=True)
class GridSpec:
    """Layout, start cell and discount of a gridworld.

    ``cells`` is a tuple of rows, each a tuple of :class:`CellKind`.
    """

    width: int
    height: int
    cells: tuple
    start: tuple
    gamma: float = 0.95
    name: str = "custom"

    def __post_init__(self):
        cells = tuple(tuple(CellKind(c) for c in row) for row in self.cells)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        if self.width < 1 or self.height < 1:
            raise DomainError("grid must have at least one cell")
        if len(cells) != self.height or any(len(row) != self.width for row in cells):
            raise DomainError("cell grid does not match width/height")
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError(f"discount must lie in [0, 1), got {self.gamma}")
        sx, sy = self.start
        if not (0 <= sx < self.width and 0 <= sy < self.height):
            raise DomainError(f"start {self.start} lies off the grid")
        if cells[sy][sx] != CellKind.EMPTY:
            raise DomainError("start cell must be empty")
        if not self._goal_reachable():
            raise DomainError("no goal cell is reachable from the start")

    @classmethod
    def from_strings(cls, rows, start, gamma=0.95, name="custom"):
        """Build from text rows using ``.`` empty, ``#`` wall, ``L`` lava, ``G`` goal."""
        cells = tuple(tuple(_CHARS[ch] for ch in row) for row in rows)
        return cls(len(rows[0]), len(rows), cells, start, gamma, name)

    @property
    def n_states(self):
        return self.width * self.height

    @property
    def start_state(self):
        return self.state_id(*self.start)

    def state_id(self, x, y):
        return y * self.width + x

    def coords(self, state):
        return state % self.width, state // self.width

    def kind(self, state):
        x, y = self.coords(state)
        return self.cells[y][x]

    def is_terminal(self, state):
        return self.kind(state) in (CellKind.GOAL, CellKind.LAVA)

    def kinds_array(self):
        return np.array(self.cells, dtype=np.int64).reshape(-1)

    def to_strings(self):
        inv = {v: k for k, v in _CHARS.items()}
        return ["".join(inv[c] for c in row) for row in self.cells]

    def _goal_reachable(self):
        seen = {self.start}
        frontier = deque([self.start])
        while frontier:
            x, y = frontier.popleft()
            kind = self.cells[y][x]
            if kind == CellKind.GOAL:
                return True
            if kind == CellKind.LAVA:
                continue
            for dx, dy in _MOVES.values():
                nx, ny = x + dx, y + dy
                if 0 <= nx < self.width and 0 <= ny < self.height and (nx, ny) not in seen:
                    if self.cells[ny][nx] != CellKind.WALL:
                        seen.add((nx, ny))
                        frontier.append((nx, ny))
        return False


def _sparse16(gamma):
    cells = [[CellKind.EMPTY] * 16 for _ in range(16)]
    cells[0][0] = CellKind.GOAL
    return GridSpec(16, 16, cells, (8, 8), gamma, "grid16-sparse")


def _obstacles16(gamma, seed):
    rng = np.random.default_rng(seed)
    while True:
        draw = rng.random((16, 16))
        cells = [[CellKind.EMPTY] * 16 for _ in range(16)]
        for y in range(16):
            for x in range(16):
                if draw[y, x] < 0.15:
                    cells[y][x] = CellKind.WALL
                elif draw[y, x] < 0.20:
                    cells[y][x] = CellKind.LAVA
        cells[8][8] = CellKind.EMPTY
        cells[0][0] = CellKind.GOAL
        try:
            return GridSpec(16, 16, cells, (8, 8), gamma, f"grid16-obstacles-{seed}")
        except DomainError:
            continue


PRESET_GRIDS = ("grid16-sparse", "grid16-obstacles")


def build_grid(spec_name, gamma=0.95, seed=0):
    """Return a named gridworld, or validate and return a custom :class:`GridSpec`.

    ``grid16-sparse`` is an open 16x16 grid with start at the centre (8, 8)
    and a single goal in the (0, 0) corner. ``grid16-obstacles`` adds walls
    and lava drawn from ``seed``; redraws happen deterministically until the
    goal is reachable.
    """
    if isinstance(spec_name, GridSpec):
        return spec_name
    if spec_name == "grid16-sparse":
        return _sparse16(gamma)
    if spec_name == "grid16-obstacles":
        return _obstacles16(gamma, seed)
    raise DomainError(f"unknown grid preset {spec_name!r}; choose from {PRESET_GRIDS}")


def step(spec, state, action):
    """Apply ``action`` in ``state``; returns ``(next_state, reward, terminal)``."""
    if not 0 <= state < spec.n_states:
        raise DomainError(f"state {state} is out of range")
    if spec.kind(state) == CellKind.WALL or spec.is_terminal(state):
        raise DomainError(f"state {state} is a wall or terminal cell")
    try:
        dx, dy = _MOVES[Action(action)]
    except ValueError:
        raise DomainError(f"invalid action {action}") from None
    x, y = spec.coords(state)
    nx, ny = x + dx, y + dy
    if not (0 <= nx < spec.width and 0 <= ny < spec.height) or spec.cells[ny][nx] == CellKind.WALL:
        nx, ny = x, y
    nxt = spec.state_id(nx, ny)
    kind = spec.cells[ny][nx]
    if kind == CellKind.GOAL:
        return nxt, 1.0, True
    if kind == CellKind.LAVA:
        return nxt, 0.0, True
    return nxt, 0.0, False


def transition_table(spec):
    """Arrays ``(next_state, reward, terminal, valid)`` of shape ``(n_states, N_ACTIONS)``.

    ``valid`` marks rows of non-wall, non-terminal states; other rows are
    self-loops with zero reward.
    """
    n = spec.n_states
    nxt = np.tile(np.arange(n)[:, None], (1, N_ACTIONS))
    rew = np.zeros((n, N_ACTIONS))
    term = np.zeros((n, N_ACTIONS), dtype=bool)
    valid = np.zeros(n, dtype=bool)
    for s in range(n):
        if spec.kind(s) == CellKind.WALL or spec.is_terminal(s):
            continue
        valid[s] = True
        for a in Action:
            nxt[s, a], rew[s, a], term[s, a] = step(spec, s, a)
    return nxt, rew, term, valid


def value_iteration(spec, gamma=None, tol=1e-10, max_iter=100_000):
    """Optimal Q-table of shape ``(n_states, N_ACTIONS)``.

    Terminal and wall rows are zero. Iterates until the sup-norm Bellman
    residual drops below ``tol``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    gamma = spec.gamma if gamma is None else gamma
    nxt, rew, term, valid = transition_table(spec)
    q = np.zeros((spec.n_states, N_ACTIONS))
    for _ in range(max_iter):
        v = q.max(axis=1)
        new_q = np.where(valid[:, None], rew + gamma * np.where(term, 0.0, v[nxt]), 0.0)
        residual = np.max(np.abs(new_q - q))
        q = new_q
        if residual < tol * 0.5:
            break
    return q


@dataclass(frozen=True, eq=False)
class StochasticPolicy:
    """Per-state action distribution, ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray
    description: str = field(default="")

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise DomainError("policy table must be two-dimensional")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise DomainError("every policy row must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_actions(self):
        return self.probs.shape[1]

    def row(self, state):
        return self.probs[state]


def make_behavior_policy(q_star, p_opt, tie_tol=1e-9):
    """Mix greedy and uniformly random suboptimal actions.

    Optimal actions (within ``tie_tol`` of the row max) share ``p_opt``;
    the remaining ``1 - p_opt`` is spread evenly over the other actions.
    Rows in which every action is optimal are uniform.
    """
    if not 0.0 <= p_opt <= 1.0:
        raise DomainError(f"p_opt must lie in [0, 1], got {p_opt}")
    q = np.asarray(q_star, dtype=np.float64)
    n_actions = q.shape[1]
    best = q.max(axis=1, keepdims=True)
    optimal = q >= best - tie_tol
    k = optimal.sum(axis=1, keepdims=True)
    rest = n_actions - k
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = np.where(optimal, p_opt / k, (1.0 - p_opt) / np.maximum(rest, 1))
    all_opt = (rest == 0).ravel()
    probs[all_opt] = 1.0 / n_actions
    # Renormalise away rounding so rows sum to one to machine precision.
    probs /= probs.sum(axis=1, keepdims=True)
    return StochasticPolicy(probs, f"mixed-greedy p_opt={p_opt!r}")
