"""Samplers for discrete DAG environments trained with entropy-regularized
Q-learning, with exact dynamic-programming verification tools."""

__version__ = "0.1.0"

from .baselines import DetailedBalanceSampler, TrajectoryBalanceSampler, db_loss, tb_loss
from .envs import BitSequence, HyperGrid, exact_partition, load_modes, random_modes, save_modes
from .graphs import (
    CapacityError,
    EnvGraph,
    ExplicitGraph,
    InvalidStateError,
    Trajectory,
    topo_order,
)
from .mdp import SoftMdp, UniformBackward
from .nets import Mlp, TabularQ, TrainingDiverged, load_checkpoint, save_checkpoint
from .oracle import (
    FlowTable,
    TabularPolicy,
    ValueTable,
    compute_flows,
    extract_policy,
    oracle_report,
    policy_eval_exact,
    solve_soft_bellman,
    terminal_distribution,
)
from .replay import PerBuffer, Transition
from .training import (
    MunchausenDqnSampler,
    MunchausenParams,
    SoftDqnSampler,
    rollout,
    soft_backup_sweep,
    td_targets,
)

__all__ = [
    "BitSequence",
    "CapacityError",
    "DetailedBalanceSampler",
    "EnvGraph",
    "ExplicitGraph",
    "FlowTable",
    "HyperGrid",
    "InvalidStateError",
    "Mlp",
    "MunchausenDqnSampler",
    "MunchausenParams",
    "PerBuffer",
    "SoftDqnSampler",
    "SoftMdp",
    "TabularPolicy",
    "TabularQ",
    "Trajectory",
    "TrajectoryBalanceSampler",
    "TrainingDiverged",
    "Transition",
    "UniformBackward",
    "ValueTable",
    "compute_flows",
    "db_loss",
    "exact_partition",
    "extract_policy",
    "load_checkpoint",
    "load_modes",
    "oracle_report",
    "policy_eval_exact",
    "random_modes",
    "rollout",
    "save_checkpoint",
    "save_modes",
    "soft_backup_sweep",
    "solve_soft_bellman",
    "tb_loss",
    "td_targets",
    "terminal_distribution",
    "topo_order",
]
