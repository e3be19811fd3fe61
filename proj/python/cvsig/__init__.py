"""Cardiovascular signatures from minute-level activity, sleep and heart rate."""

import json as _json

from ._cvsig import (  # noqa: F401
    GbtModel,
    Model,
    PreprocessedSeries,
    auc,
    build_channels,
    decode,
    eligibility_filter,
    encode,
    gbt_fit,
    gbt_predict,
    init_model,
    load_checkpoint,
    masked_loss,
    receptive_field,
    save_checkpoint,
    simulate,
    transform_steps,
    whiten_hr,
    wilcoxon_signed_rank,
)
from ._cvsig import run_command as _run_command


def run_command(command, config=None, seed=None, out=None):
    """Run one pipeline command; `eval` returns the report as a dict."""
    result = _run_command(command, config=config, seed=seed, out=out)
    if command == "eval":
        return _json.loads(result)
    return result
