"""Follow the Kakade gradient flow on the two-state cycle.

Prints the reward gap, the divergence to the limit policy and the fitted
exponential rate next to the action gap.
"""

import numpy as np

from entroflow import bounds as bl
from entroflow.flows import integrate_kakade_flow
from entroflow.instances import fig1_twocycle
from entroflow.mdp import optimal_structure, uniform_policy

mdp = fig1_twocycle(0.9)
pi0 = uniform_policy(mdp)
structure = optimal_structure(mdp)
consts = bl.BoundConstants.for_flow(mdp, pi0, structure)

grid = np.unique(np.concatenate([[0.0], np.geomspace(1e-2, 1, 20), np.linspace(1, 80, 400)]))
traj = integrate_kakade_flow(mdp, pi0, grid, structure=structure)

print(f"action gap {consts.delta:.3f}")
print(f"{'t':>8} {'gap':>12} {'D_K to limit':>14}")
for i in np.searchsorted(grid, [0, 1, 5, 10, 20, 40, 80]):
    print(f"{grid[i]:8.2f} {traj.reward_gap[i]:12.4e} {traj.dk_to_pistar[i]:14.4e}")

fit, window = bl.flow_rate_fit(traj, consts)
print(f"fitted log-gap slope {fit.slope:.4f} on t in [{window[0]:.1f}, {window[1]:.1f}]")

report = bl.certify_flow(mdp, traj, consts, structure)
print(f"bound certificate: {report.verdict} ({len(report.rows)} rows)")
