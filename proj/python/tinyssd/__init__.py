"""Tiny SSD inference engine and resource auditor."""

from ._core import (
    TinySsdError,
    WeightStore,
    audit,
    decode_boxes,
    describe,
    detect,
    evaluate,
    forward,
    generate_priors,
    init_random,
    intermediate_shapes,
    load_model,
    nms,
    preprocess_image,
    quantize_fp16,
    round_to_half,
    run_cli,
    save_model,
    spec_json,
)

__all__ = [
    "TinySsdError",
    "WeightStore",
    "audit",
    "decode_boxes",
    "describe",
    "detect",
    "evaluate",
    "forward",
    "generate_priors",
    "init_random",
    "intermediate_shapes",
    "load_model",
    "nms",
    "preprocess_image",
    "quantize_fp16",
    "round_to_half",
    "run_cli",
    "save_model",
    "spec_json",
]
