"""Python surface for the three-stage expression-recognition trainer."""

import json as _json

try:
    from ._core import (
        __version__,
        SsferError,
        synth,
        iou,
        sample_lambda,
        mix_images,
        image_similarity,
        patchify,
        sample_mask,
        count_params_flops,
        gwo,
        default_config_json,
        run_pipeline,
        run_experiment,
        experiment_names,
    )
except ImportError:  # running against a build tree on PYTHONPATH
    from _core import (
        __version__,
        SsferError,
        synth,
        iou,
        sample_lambda,
        mix_images,
        image_similarity,
        patchify,
        sample_mask,
        count_params_flops,
        gwo,
        default_config_json,
        run_pipeline,
        run_experiment,
        experiment_names,
    )


def default_config():
    """Default training config as a plain dict."""
    return _json.loads(default_config_json())


__all__ = [
    "__version__",
    "SsferError",
    "synth",
    "iou",
    "sample_lambda",
    "mix_images",
    "image_similarity",
    "patchify",
    "sample_mask",
    "count_params_flops",
    "gwo",
    "default_config",
    "default_config_json",
    "run_pipeline",
    "run_experiment",
    "experiment_names",
]
