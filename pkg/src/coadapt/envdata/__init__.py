"""Gridworld MDPs, observation maps and offline datasets."""

from coadapt.envdata.dataset import (
    OfflineDataset,
    Transition,
    collect_dataset,
    evaluate_policy,
    mc_returns,
    read_dataset,
    write_dataset,
)
from coadapt.envdata.grid import (
    N_ACTIONS,
    PRESET_GRIDS,
    Action,
    CellKind,
    GridSpec,
    StochasticPolicy,
    build_grid,
    make_behavior_policy,
    step,
    transition_table,
    value_iteration,
)
from coadapt.envdata.observe import OBS_KINDS, ObservationMap, observation_table, observe

__all__ = [
    "N_ACTIONS",
    "OBS_KINDS",
    "PRESET_GRIDS",
    "Action",
    "CellKind",
    "GridSpec",
    "ObservationMap",
    "OfflineDataset",
    "StochasticPolicy",
    "Transition",
    "build_grid",
    "collect_dataset",
    "evaluate_policy",
    "make_behavior_policy",
    "mc_returns",
    "observation_table",
    "observe",
    "read_dataset",
    "step",
    "transition_table",
    "value_iteration",
    "write_dataset",
]
