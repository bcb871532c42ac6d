"""Single integrators steered onto a target cloud.

With effort cost and a hard terminal constraint the fleet value is the
squared Wasserstein distance divided by the horizon, and every particle
moves on a straight line at constant speed.
"""

import numpy as np

from fleetlift import integrator_fleet, w2_squared

rng = np.random.default_rng(0)
M, N = 6, 4
xs, ys = rng.normal(size=(M, 2)), rng.normal(size=(M, 2)) + [3.0, 0.0]
roll, values, positions = integrator_fleet(xs, ys, N)

print(f"W2^2 / N       : {w2_squared(xs, ys) / N:.6f}")
print(f"fleet value    : {values[0]:.6f}")
print(f"realized cost  : {roll.total:.6f}")
for k in range(N):
    rest = sum(roll.stage_costs[k:])
    print(f"  k={k}  cost still to pay {rest:.6f}"
          f"  = W2^2(mu_k)/(N-k) {w2_squared(positions[k], ys) / (N - k):.6f}")
print(f"landed on target: {np.allclose(np.sort(positions[-1], 0), np.sort(ys, 0))}")
