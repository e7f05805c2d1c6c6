"""Equilibria of the multi-access computation offloading game.

Users either run their task locally or offload it through one of several
access points to a cloud that is elastic (every offloader gets the full
cloud) or non-elastic (offloaders share it).
"""

__version__ = "0.1.0"

from .model import (
    LOCAL,
    AccessPoint,
    Cloud,
    CloudModel,
    CostBreakdown,
    GameInstance,
    MobileUser,
    NashVerdict,
    OffloadingError,
    StrategyProfile,
    congestion_counts,
    improving_deviations,
    is_nash,
    local_cost,
    offload_cost,
    reluctance,
    total_cost,
    uplink_rate,
    user_cost,
)
from .dynamics import (
    ImprovementTrace,
    Terminal,
    best_reply,
    build_cycle_instance,
    potential,
    run_improvement_path,
    sorted_offloader_costs,
    threshold,
)
from .inductive import InductionReport, add_player, remove_player, solve, worst_case_update_bound
from .oracle import (
    InstanceTooLargeError,
    PoaReport,
    brute_force_optimal,
    enumerate_equilibria,
    optimal_profile,
    poa_report,
    poa_upper_bound,
)
from .scenario import (
    BatchResult,
    ScenarioConfig,
    cost_ratio,
    generate,
    offloading_difference_ratio,
    run_batch,
)
from .solver import SolveReport, solve_equilibrium
