"""Linear-quadratic particles matched to linear-quadratic targets.

The pair cost-to-go is a quadratic form in (x, y).  The fleet value is an
assignment problem over those pair costs, and the rollout reproduces it.
"""

import numpy as np

from fleetlift import LqrSystem, empirical_ot, lqr_pair_recursion

A = np.array([[1.0, 0.1], [0.0, 1.0]])
B = np.array([[0.0], [0.1]])
sys = LqrSystem(N=20, A=A, B=B, R=np.eye(1), P_N=10 * np.eye(2))
c = lqr_pair_recursion(sys)

rng = np.random.default_rng(1)
xs, ys = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
C = np.array([[c.cost(0, x, y) for y in ys] for x in xs])
value, perm = empirical_ot(C)

total = 0.0
for i, j in enumerate(perm):
    x = xs[i]
    for k in range(sys.N):
        u = c.input(k, x, ys[j])
        total += float(u @ u)
        x = A @ x + B @ u
    total += float((x - ys[j]) @ sys.P_N @ (x - ys[j]))
print(f"assignment       : {list(perm)}")
print(f"fleet value      : {value:.6f}")
print(f"realized average : {total / len(xs):.6f}")
