"""Simulator and analysis toolkit for energy-harvesting THz nanosensor networks."""

__version__ = "0.1.0"

from .netmodel import (ChannelParams, EnergyParams, InvalidConfig, Mode,
                       NodeState, Position, Role, SimConfig, ValidatedConfig,
                       load_config, validate_config)
from .topology import Deployment, deploy, layer_of
from .clustering import Cluster, OrphanNode, elect_nccs, rotate_ncc
from .scheduler import EmptyCycle, Timeline, TransmissionRequest, build_timeline
from .channel import (capacity, cooperative_fusion_outage, fusion_outage,
                      lognormal_fit, outage_capacity, outage_single,
                      received_power)
from .energy import (EnergyChain, InvalidParams, ReducibleChain, build_chain,
                     cycles_to_energy, e_nps_max, p_es, p_es_rate,
                     stationary_distribution, v_nps)
from .engine import (CycleTrace, MetricsTable, Simulation, UnknownAxis,
                     WorldState, choose_intra_path, crossover_distance,
                     energy_per_bit, run_cycle, sweep)
from .mcoutage import McResult, McRun, mc_outage, mc_vs_analytic_report

__all__ = [
    "__version__",
    "ChannelParams", "EnergyParams", "InvalidConfig", "Mode", "NodeState",
    "Position", "Role", "SimConfig", "ValidatedConfig", "load_config",
    "validate_config",
    "Deployment", "deploy", "layer_of",
    "Cluster", "OrphanNode", "elect_nccs", "rotate_ncc",
    "EmptyCycle", "Timeline", "TransmissionRequest", "build_timeline",
    "capacity", "cooperative_fusion_outage", "fusion_outage", "lognormal_fit",
    "outage_capacity", "outage_single", "received_power",
    "EnergyChain", "InvalidParams", "ReducibleChain", "build_chain",
    "cycles_to_energy", "e_nps_max", "p_es", "p_es_rate",
    "stationary_distribution", "v_nps",
    "CycleTrace", "MetricsTable", "Simulation", "UnknownAxis", "WorldState",
    "choose_intra_path", "crossover_distance", "energy_per_bit", "run_cycle",
    "sweep",
    "McResult", "McRun", "mc_outage", "mc_vs_analytic_report",
]
