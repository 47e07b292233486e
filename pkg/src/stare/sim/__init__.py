"""Pattern-of-life simulator: HMM itineraries over a synthetic road network."""

from .agents import AgentProfile, InsufficientLocationsError, spawn_agents, subpop_sizes
from .config import PRESETS, SimConfig
from .export import export_dataset
from .simulate import (
    DayPlan,
    SimulatedAgent,
    Simulation,
    plan_day,
    run_simulation,
    sample_excursion,
    simulate_agent,
    simulate_agent_detailed,
    world_for,
)
from .world import CATEGORIES, Location, SimWorld, build_world, rng_for

__all__ = [
    "AgentProfile", "InsufficientLocationsError", "spawn_agents", "subpop_sizes",
    "PRESETS", "SimConfig", "export_dataset",
    "DayPlan", "SimulatedAgent", "Simulation", "plan_day", "run_simulation", "sample_excursion",
    "simulate_agent", "simulate_agent_detailed", "world_for",
    "CATEGORIES", "Location", "SimWorld", "build_world", "rng_for",
]
