"""A grid fleet routed around impassable cells.

Infinite costs mark forbidden moves; the lifted solution still finds a
finite plan and the rollout lands every packet on its flag.
"""

import json

from fleetlift import run
from fleetlift.scenario import bundled_path, load_scenario

report = run(load_scenario(bundled_path("forest_ride")))
print(f"status : {report.status}")
print(json.dumps(report.values, indent=2))
print(f"rollout total {report.rollout['total']}, terminal {report.rollout['terminal_cost']}")
