"""Offline policy evaluation and uniform-convergence tooling for tabular, non-stationary MDPs."""

from ._jit import BACKEND
from .data import EpisodeDataset, VisitCounts, load_dataset, rollout, save_dataset, visit_counts
from .estimators import (
    EmpiricalModel,
    estimate_model,
    fictitious_model,
    fictitious_value,
    opema_value,
    split_tmis,
)
from .experiment import ExperimentConfig, RmseRow, build_sim_mdp, loglog_slope, run_experiment
from .hard import BanditMDPSpec, build_bandit_mdp, build_gated_mdp, single_flip_loss, verify_hard_instance
from .mdp import (
    DimensionError,
    OccupancyTable,
    Policy,
    TabularMDP,
    ValueFunctions,
    d_min,
    evaluate,
    load_mdp,
    load_policy,
    occupancy,
    policy_value,
    random_mdp,
    random_policy,
    save_mdp,
    save_policy,
    validate,
)
from .planning import PlanResult, approx_planner, backward_induction, local_membership, policy_iteration
from .uniform import (
    EnumerationCapExceeded,
    SupremumReport,
    erm_check,
    martingale_decomposition_check,
    simulation_lemma_bound,
    sup_error,
)

__version__ = "0.1.0"
