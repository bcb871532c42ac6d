"""How fast the particle-level state space grows.

A fleet of M indistinguishable particles over n states has C(M+n-1, M)
configurations.  The lifted problem never enumerates them; the
particle oracle does, and becomes hopeless quickly.
"""

from fleetlift.cli import bench_csv

print(bench_csv([(1, 10), (10, 10), (10, 100), (100, 100), (1000, 1000)]), end="")
