"""Lifting a noisy ground solution can be far from optimal.

Each particle minimizes its own expected cost, which is blind to how the
rest of the fleet is spread.  Controlling the distribution directly, with
the noise handled exactly, reaches the target at no cost.
"""

from fleetlift import naive_noisy_lift
from fleetlift.scenario import bundled_path, load_scenario

sc = load_scenario(bundled_path("noise_counterexample"))
naive, true = naive_noisy_lift(sc.system, sc.mu0, sc.refs)
print(f"lifted per-particle value : {naive}")
print(f"distribution-level value  : {true}")
