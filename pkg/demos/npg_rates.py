"""Natural policy gradient on a three-armed bandit at several stepsizes.

The log-gap should drop by roughly gap times stepsize per iteration.
"""

from entroflow import bounds as bl
from entroflow.instances import bandit
from entroflow.mdp import optimal_structure, uniform_policy
from entroflow.npg import npg_run_unregularized

mdp = bandit((1.0, 0.5, 0.0))
pi0 = uniform_policy(mdp)
structure = optimal_structure(mdp)
consts = bl.BoundConstants.for_flow(mdp, pi0, structure)

for eta in (0.1, 0.5, 1.0, 2.0):
    run = npg_run_unregularized(mdp, pi0, eta, 200)
    fit = bl.npg_rate_fit(run, mdp, structure, k_start=100)
    verdict = bl.certify_npg(mdp, run, consts, structure).verdict
    print(f"eta={eta:4.1f}  slope {fit.slope:8.4f}  predicted {-consts.delta * eta:8.4f}  certificate {verdict}")
