"""Energy-aware data forwarding simulator for industrial IoT grids.

Library surface: build a topology, sample or hand-craft pieces, plan paths
centrally, and run any of the three forwarding strategies deterministically.
"""

from .engine import (EngineError, Metrics, Simulation, inject_interference,
                     run_simulation, sample_access_latency)
from .lifetime import (INFINITE_LIFETIME, LifetimeParams, aggregate_rates,
                       lifetime_from_spend, max_epoch_duration, node_lifetime,
                       trigger_check)
from .netmodel import (DataPiece, LatencyEnergyConfig, LinkState, NetworkState,
                       NodeId, NodeState, PathBrokenError, PathRow, PathTable,
                       TopologyError, build_grid_topology, export_topology,
                       install_path, path_latency, round_trip_latency,
                       validate_paths, walk_chain)
from .planner import (Plan, PiecePlan, PlannerView, PlanningError, StatusReport,
                      bottleneck_path, compute_plan, path_bottleneck,
                      recompute_central, status_from_network)
from .protocol import (Alert, Join, ModifyPath, PlanMsg, ProtocolState,
                       RouteReply, RouteRequest, StatusMsg, disconnect,
                       handle_alert, join_path, local_aodv_plus,
                       local_path_config, modify_path, node_cycle)
from . import protocol
from .scenario import (STRATEGIES, Finding, InterferenceConfig, ScenarioConfig,
                       ScenarioParseError, is_valid, parse_scenario,
                       render_scenario, sample_pieces, validate_config)

__all__ = [
    "Alert", "DataPiece", "EngineError", "Finding", "INFINITE_LIFETIME",
    "InterferenceConfig", "Join", "LatencyEnergyConfig", "LifetimeParams",
    "LinkState", "Metrics", "ModifyPath", "NetworkState", "NodeId",
    "NodeState", "PathBrokenError", "PathRow", "PathTable", "Plan", "PlanMsg",
    "PiecePlan", "PlannerView", "PlanningError", "ProtocolState",
    "RouteReply", "RouteRequest", "STRATEGIES", "ScenarioConfig",
    "ScenarioParseError", "Simulation", "StatusMsg", "StatusReport",
    "TopologyError", "aggregate_rates", "bottleneck_path",
    "build_grid_topology", "compute_plan", "disconnect", "export_topology",
    "handle_alert", "inject_interference", "install_path", "is_valid", "join_path",
    "lifetime_from_spend", "local_aodv_plus", "local_path_config",
    "max_epoch_duration", "modify_path", "node_cycle", "node_lifetime",
    "parse_scenario", "path_bottleneck", "path_latency", "protocol",
    "recompute_central", "render_scenario", "round_trip_latency",
    "run_simulation", "sample_access_latency", "sample_pieces",
    "status_from_network", "trigger_check", "validate_config",
    "validate_paths", "walk_chain",
]

__version__ = "0.1.0"
