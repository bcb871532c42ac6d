"""An optimal fleet input need not be a feedback map.

All mass starts at 0 and must end spread evenly over -1 and +1.  No map
x -> u can do that; the optimal state-input distribution sends half of the
atom each way.
"""

from fleetlift import as_map, dpa_simple, lift_input, lifted_value, rollout_feedback
from fleetlift.scenario import bundled_path, load_scenario

sc = load_scenario(bundled_path("split_mass"))
table = dpa_simple(sc.system)
lv = lifted_value(sc.system, table, sc.mu0, sc.refs[-1])
lam = lift_input(lv.plan, table)

print(f"value                : {lv.value}")
print(f"plan is a map        : {as_map(lv.plan) is not None}")
print(f"state-input measure  : {lam.joint!r}")
roll = rollout_feedback(sc.system, table, sc.mu0, sc.refs[-1])
print(f"final distribution   : {roll.measures[-1]!r}")
