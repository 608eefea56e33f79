"""Entropy-regularized NPG with the temperature tied to the iteration budget.

For each (stepsize, budget) pair the temperature is sqrt(2 gap / (eta k));
the final suboptimality is compared with the combined error bound.
"""

import math

import numpy as np

from entroflow import bounds as bl
from entroflow.instances import bandit
from entroflow.mdp import optimal_structure, suboptimality_gap, uniform_policy
from entroflow.npg import cen_constant, npg_run_regularized

mdp = bandit((1.0, 0.5, 0.0))
structure = optimal_structure(mdp)
unif = uniform_policy(mdp)
consts = bl.BoundConstants.for_flow(mdp, unif, structure)
c_unif, _ = bl.unif_constant(mdp, structure)

print(f"{'eta':>5} {'k':>6} {'tau':>8} {'gap':>11} {'bound':>11}")
for eta in (0.25, 1.0):
    for k in (16, 64, 256, 1024):
        tau = math.sqrt(2 * consts.delta / (eta * k))
        run = npg_run_regularized(mdp, eta, tau, k)
        gap = suboptimality_gap(mdp, np.exp(run.log_policies[k]), structure)
        bound = bl.thm61_overall(consts, k - 1, eta, tau, cen_constant(mdp, eta, tau, unif), c_unif)
        print(f"{eta:5.2f} {k:6d} {tau:8.4f} {gap:11.3e} {bound:11.3e}")
