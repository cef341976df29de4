from .adversary import AdversaryBehavior, apply_adversary, place_adversaries
from .config import ADVERSARY_MODELS, CONFIG_FIELDS, PROTOCOLS, ScenarioConfig, ScenarioError
from .engine import Event, RunStats, Simulation, build_topology, run
from .mobility import RandomWaypoint, advance_mobility, connectivity

__all__ = [
    "ADVERSARY_MODELS", "CONFIG_FIELDS", "PROTOCOLS", "AdversaryBehavior", "Event", "RandomWaypoint", "RunStats", "ScenarioConfig", "ScenarioError",
    "Simulation", "advance_mobility", "apply_adversary", "build_topology", "connectivity",
    "place_adversaries", "run",
]
