"""Opinion alignment on an evolving preferential-attachment network,
with degree-selective receding-horizon control."""

from .control import (ControlConfig, MPCResult, RKTableau,
                      instantaneous_control, mpc_control, predicted_cost,
                      running_cost, selection_mask, step_opinions_rk)
from .degree_master import (DegreeDistribution, IntegrationError,
                            empirical_degree_distribution, integrate_master,
                            loglog_slope, master_rhs, restrict,
                            stationary_poisson, stationary_power_law,
                            total_variation)
from .graph import (ConstructionError, EvolveSummary, Network, RewireParams,
                    attachment_probabilities, evolve_network, init_network,
                    rewire_step, sample_node_preferential)
from .opinion import (KernelParams, OpinionState, confidence_kernel,
                      degree_kernel, interaction, opinion_rhs)
from .sim import (DEFAULT_SEED, SimConfig, SimulationError, SweepRow,
                  TrajectoryRecord, consensus_metric, controlled_fraction,
                  ensemble_degree_marginals, run_simulation, sweep_c_star)

__version__ = "0.1.0"

__all__ = [
    "ConstructionError", "ControlConfig", "DEFAULT_SEED",
    "DegreeDistribution", "EvolveSummary", "IntegrationError",
    "KernelParams", "MPCResult", "Network", "OpinionState", "RKTableau",
    "RewireParams", "SimConfig", "SimulationError", "SweepRow",
    "TrajectoryRecord", "attachment_probabilities", "confidence_kernel",
    "consensus_metric", "controlled_fraction", "degree_kernel",
    "empirical_degree_distribution", "ensemble_degree_marginals",
    "evolve_network", "init_network", "instantaneous_control",
    "integrate_master", "interaction", "loglog_slope", "master_rhs",
    "mpc_control", "opinion_rhs", "predicted_cost", "restrict",
    "rewire_step", "run_simulation", "running_cost",
    "sample_node_preferential", "selection_mask", "stationary_poisson",
    "stationary_power_law", "step_opinions_rk", "sweep_c_star",
    "total_variation",
]
