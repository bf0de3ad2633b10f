"""Python access to the platoon simulator.

Scenarios and attack cases are passed as dicts or JSON text.
"""

import json as _json

from . import _core
from ._core import ConfigError, ContractError, NumericalError, ParseError

__all__ = [
    "ConfigError",
    "ContractError",
    "NumericalError",
    "ParseError",
    "generate_bias",
    "replay_detect",
    "resolve_scenario",
    "run_to_dir",
    "simulate",
]


def _text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def resolve_scenario(scenario=None):
    """Scenario with every default filled in, as a dict."""
    return _json.loads(_core.resolve_scenario(_text(scenario or {})))


def simulate(scenario=None):
    """Run a scenario in memory.

    Returns a dict with ``trace`` (numpy columns), ``anomalies`` (list of
    dicts), ``report`` (dict) and the CSV texts ``trace_csv`` and
    ``anomalies_csv``.
    """
    out = _core.simulate(_text(scenario or {}))
    out["report"] = _json.loads(out["report"])
    return out


def run_to_dir(scenario, out_dir):
    """Run a scenario and write its artifacts into ``out_dir``."""
    _core.run_to_dir(_text(scenario), str(out_dir))


def generate_bias(attack_case, k, n, max_iterations):
    """Bias matrices (max_iterations x n) for control step ``k``."""
    return _core.generate_bias(_text(attack_case), int(k), int(n), int(max_iterations))


def replay_detect(trace_csv, config=None, seed=1):
    """Run detection over a trace.csv file; returns the anomaly events."""
    return _core.replay_detect(str(trace_csv), _text(config or {}), int(seed))
