"""Decentralised defense swarm that clusters, encircles and escorts an intruding UAV."""

from .engine import Outcome, RunRecord, ScenarioConfig, World, run, spawn, tick

__all__ = ["Outcome", "RunRecord", "ScenarioConfig", "World", "run", "spawn", "tick"]
__version__ = "0.1.0"
