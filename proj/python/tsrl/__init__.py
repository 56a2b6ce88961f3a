"""Python bindings for the tsrl library."""

import json

from ._core import (
    Automaton,
    ConfigError,
    Formula,
    GridWorld,
    MapError,
    ParseError,
    QTable,
    TrainResult,
    UnsupportedFragment,
    config_hash,
    optimal_value,
    train,
)
from ._core import evaluate_json as _evaluate_json


def evaluate(config, qtable_json, n=None, seed=None, deterministic=None):
    """Greedy evaluation of a trained table; returns the report as a dict."""
    return json.loads(_evaluate_json(config, qtable_json, n=n, seed=seed, deterministic=deterministic))


__all__ = [
    "Automaton",
    "ConfigError",
    "Formula",
    "GridWorld",
    "MapError",
    "ParseError",
    "QTable",
    "TrainResult",
    "UnsupportedFragment",
    "config_hash",
    "evaluate",
    "optimal_value",
    "train",
]
