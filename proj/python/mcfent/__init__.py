"""Multicore-fiber entanglement distribution simulator.

Density matrices are complex numpy arrays of shape (d*d, d*d) in the
|i>|j> -> i*d + j ordering. Reports and configs come back as dicts.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    StageError,
    cglmp_operator,
    cglmp_value,
    correlated_state,
    fidelity_to_max_entangled,
    maximally_entangled,
    metrics,
    optimize_cglmp_state,
    preset_names,
    purity,
    rephase,
    schmidt_number,
    subspace_concurrence,
)

__version__ = _core.__version__


def preset(name):
    """Config dict of a built-in preset ("ideal", "paper", "fig4")."""
    return json.loads(_core.preset_json(name))


def run(config, out_dir=None, threads=0):
    """Run the full pipeline on a preset name or a config dict; returns the report."""
    if isinstance(config, str):
        text = _core.run_preset_json(config, out_dir, threads)
    else:
        text = _core.run_config_json(json.dumps(config), out_dir, threads)
    return json.loads(text)


def reconstruct(csv_text, dim=4, efficiency="ideal"):
    """Maximum-likelihood state from counts CSV text: (rho, log_likelihood, converged)."""
    return _core.reconstruct_csv(csv_text, dim, efficiency)
