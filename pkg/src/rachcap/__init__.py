"""Access-capacity toolkit: closed-form contention/queueing model, a
subframe-resolution protocol simulator, brute-force validation oracles,
and a sweep/breaking-point CLI."""

from .config import SystemConfig, load_config
from .model import (
    ChainSolution,
    Load,
    ModelResult,
    activated_preamble_rate,
    activation_probability,
    baseline_collision_only,
    chain_steady_state,
    collision_probability,
    expected_transmissions,
    grant_drop_probability,
    one_shot_failure,
    outage_probability,
    solve_total_rate,
)
from .sim import ReplicatedStats, SimConfig, SimStats, run, run_replications

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "load_config",
    "ChainSolution", "Load", "ModelResult",
    "activated_preamble_rate", "activation_probability",
    "baseline_collision_only", "chain_steady_state",
    "collision_probability", "expected_transmissions",
    "grant_drop_probability", "one_shot_failure", "outage_probability",
    "solve_total_rate",
    "ReplicatedStats", "SimConfig", "SimStats", "run", "run_replications",
    "__version__",
]
