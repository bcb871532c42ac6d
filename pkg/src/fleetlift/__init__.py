"""Fleet optimal control in probability space.

Solve the single-particle problem by dynamic programming, then lift it to
the whole fleet with one (multi-marginal) optimal transport problem.
"""

from .errors import (CapacityError, DomainError, FleetLiftError, InfeasibleError, ModeError,
                     SchemaError, SolverError)
from .extended import INF, ext_add, ext_dot, ext_round
from .measures import (DiscreteMeasure, StateInputDistribution, dirac, expected_value, marginal,
                       product, pushforward, uniform)
from .linprog import LpProblem, LpSolution, solve_assignment, solve_lp
from .transport import (TransportPlan, as_map, blend, cost_tensor, empirical_ot,
                        gaussian_w2_sq, mmot, ot2)
from .ground_dp import (CostToGoTable, GroundSystem, NoisyGroundSystem, dpa_multi, dpa_simple,
                        dpa_stochastic, rollout_particle)
from .lqr import (LqrSystem, QuadraticCostToGo, integrator_cost_to_go, integrator_exact_cost_to_go,
                  integrator_input, lqr_classic, lqr_pair_recursion, lqr_variance_aware)
from .lifting import (FleetRollout, LiftedValue, integrator_fleet, lift_input, lifted_value,
                      naive_noisy_lift, rollout_feedback, rollout_feedback_continuous,
                      rollout_openloop, w2_squared)
from .oracle import OracleTable, bench_counts, config_count, oracle_solve
from .scenario import Report, Scenario, load_scenario, parse_scenario, run, save_scenario

__version__ = "0.1.0"


__all__ = [
    "CapacityError",
    "DomainError",
    "FleetLiftError",
    "InfeasibleError",
    "ModeError",
    "SchemaError",
    "SolverError",
    "INF",
    "ext_add",
    "ext_dot",
    "ext_round",
    "DiscreteMeasure",
    "StateInputDistribution",
    "dirac",
    "expected_value",
    "marginal",
    "product",
    "pushforward",
    "uniform",
    "LpProblem",
    "LpSolution",
    "solve_assignment",
    "solve_lp",
    "TransportPlan",
    "as_map",
    "blend",
    "cost_tensor",
    "empirical_ot",
    "gaussian_w2_sq",
    "mmot",
    "ot2",
    "CostToGoTable",
    "GroundSystem",
    "NoisyGroundSystem",
    "dpa_multi",
    "dpa_simple",
    "dpa_stochastic",
    "rollout_particle",
    "LqrSystem",
    "QuadraticCostToGo",
    "integrator_cost_to_go",
    "integrator_exact_cost_to_go",
    "integrator_input",
    "lqr_classic",
    "lqr_pair_recursion",
    "lqr_variance_aware",
    "FleetRollout",
    "LiftedValue",
    "integrator_fleet",
    "lift_input",
    "lifted_value",
    "naive_noisy_lift",
    "rollout_feedback",
    "rollout_feedback_continuous",
    "rollout_openloop",
    "w2_squared",
    "OracleTable",
    "bench_counts",
    "config_count",
    "oracle_solve",
    "Report",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "run",
    "save_scenario",
]
