"""Entropy-geometry toolkit for tabular MDPs: Kakade and sigma gradient flows,
natural policy gradient, entropy regularization and bound certificates."""

from .mdp import (
    InvalidMdpError,
    MdpInstance,
    evaluate_policy,
    load_mdp,
    make_mdp,
    optimal_structure,
    reward_of,
    save_mdp,
    suboptimality_gap,
    uniform_policy,
)
from .geometry import kakade_divergence, kakade_projection, occupancy_of
from .regularized import SigmaRegularizer, solve_entropy_regularized
from .flows import integrate_kakade_flow, integrate_sigma_flow
from .npg import npg_run_regularized, npg_run_unregularized, npg_step, npg_step_regularized
from .bounds import BoundConstants, certify_flow, certify_npg
from .instances import bandit, chain, fig1_twocycle, garnet, generate_instance

__all__ = [name for name in dir() if not name.startswith("_")]
