"""Python bindings for the crashnet core."""

from ._crashnet import (
    WireError,
    classify_collision,
    decode_report,
    detect,
    encode_report,
    generate_trace,
    parse_trace,
    run_demo,
    to_g_force,
)

__all__ = [
    "WireError",
    "classify_collision",
    "decode_report",
    "detect",
    "encode_report",
    "generate_trace",
    "parse_trace",
    "run_demo",
    "to_g_force",
]
