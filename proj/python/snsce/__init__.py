"""Python access to the snsce simulation core."""

import json

from ._core import (
    ConfigError,
    __version__,
    afm_segment,
    config_hash,
    default_spec_json,
    dft_codebook,
    list_experiments,
    mef_gaa,
    nmse,
    pass_segment,
    rfem_segment,
    trial_seed,
)
from ._core import run_spec_json as _run_spec_json


def run(spec, workers=1, timing=False):
    """Run a spec given as a dict or JSON string; returns (csv_text, rows, meta)."""
    text = spec if isinstance(spec, str) else json.dumps(spec)
    out = _run_spec_json(text, workers, timing)
    return out["csv"], json.loads(out["json"]), json.loads(out["meta"])


__all__ = [
    "ConfigError",
    "__version__",
    "afm_segment",
    "config_hash",
    "default_spec_json",
    "dft_codebook",
    "list_experiments",
    "mef_gaa",
    "nmse",
    "pass_segment",
    "rfem_segment",
    "run",
    "trial_seed",
]
