"""Python interface to the fedpd federated-optimization simulator."""

import json

from ._core import (
    ConfigError,
    DataError,
    DimensionError,
    Error,
    Problem,
    divergence_factor,
    quadratic_pair,
    select_skip_probability,
    strong_noniid,
    trace_header,
    weak_noniid,
)
from ._core import run_json as _run_json

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "Error",
    "Problem",
    "divergence_factor",
    "quadratic_pair",
    "run",
    "select_skip_probability",
    "strong_noniid",
    "trace_header",
    "weak_noniid",
]


def run(config, threads=None):
    """Run an experiment described by a config dict (same schema as the CLI JSON).

    Returns (trace, summary): trace maps column names to per-round lists,
    summary is the parsed summary document.
    """
    trace, summary = _run_json(json.dumps(config), threads)
    return trace, json.loads(summary)
