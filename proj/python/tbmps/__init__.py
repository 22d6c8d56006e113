"""Time-bin matrix product state simulator for waveguide circuits with delay.

The heavy lifting lives in the compiled extension; this package re-exports it
and adds a small convenience for building configuration documents.
"""

import json as _json

from ._core import (  # noqa: F401
    FinalState,
    bloch_steady_pe,
    dense_reference_fidelity,
    mirror_effective_bloch,
    run,
    run_file,
    single_atom_bloch,
    two_atom_master_eq,
    validate_config,
    __version__,
)


def run_dict(config, record_stride=0):
    """Runs an experiment described by a plain dict; returns (state, series)."""
    return run(_json.dumps(config), record_stride)
