"""Energy-optimal task offloading under latency and layered reliability constraints.

Time-division and superposition-coded transmission over Rayleigh fading with
selection diversity, solved by successive convex approximation inside an
exhaustive search over offloading decisions.
"""

from .channel import (
    LinkParams,
    ScLayerStack,
    UnattainableTarget,
    mc_estimate_sc,
    mc_estimate_td,
    min_power_td,
    min_powers_sc,
    reliability_threshold,
    required_snr,
    success_prob_sc,
    success_prob_td,
)
from .config import ConfigError, LoadedConfig, dump_config, load_config, parse_config
from .kernel import ConvexSubproblem, KernelOptions, KernelResult, find_strictly_feasible, solve
from .model import (
    Allocation,
    CallGraph,
    Decision,
    EvalReport,
    Mode,
    Scenario,
    ServiceReliability,
    SystemParams,
    TaskSpec,
    ValidationError,
    build_compound_hypergraph,
    build_scenario,
    evaluate,
)
from .planner import Solution, SweepResult, compare_modes, plan, sweep
from .sca import ScaOptions, ScaResult, initial_feasible_point, sca_solve

__version__ = "0.1.0"

__all__ = [
    "Allocation", "CallGraph", "ConfigError", "ConvexSubproblem", "Decision", "EvalReport",
    "KernelOptions", "KernelResult", "LinkParams", "LoadedConfig", "Mode", "ScLayerStack",
    "ScaOptions", "ScaResult", "Scenario", "ServiceReliability", "Solution", "SweepResult",
    "SystemParams", "TaskSpec", "UnattainableTarget", "ValidationError",
    "build_compound_hypergraph", "build_scenario", "compare_modes", "dump_config", "evaluate",
    "find_strictly_feasible", "initial_feasible_point", "load_config", "mc_estimate_sc",
    "mc_estimate_td", "min_power_td", "min_powers_sc", "parse_config", "plan",
    "reliability_threshold", "required_snr", "sca_solve", "solve", "success_prob_sc",
    "success_prob_td", "sweep",
]
