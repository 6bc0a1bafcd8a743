"""Benchmark for LLM agents playing the two-player two-thirds beauty contest."""
from .game import GameSpec, describe_game, translate, utility
from .ewa import EwaAgent, EwaParams

__version__ = "0.1.0"
__all__ = ["EwaAgent", "EwaParams", "GameSpec", "describe_game", "translate", "utility", "__version__"]
