"""Sparse fixed-point inference simulator: codec, cost model and network runs."""

from ._sparq import (
    Error,
    IndexOutOfRangeError,
    MissingArtifactError,
    ShapeError,
    brain_budget,
    cost_trace,
    decode,
    dequantize,
    encode,
    quantize,
    random_vs_burst_ratio,
    read_qt,
    run,
    sparsity,
    write_qt,
)

__all__ = [
    "Error",
    "IndexOutOfRangeError",
    "MissingArtifactError",
    "ShapeError",
    "brain_budget",
    "cost_trace",
    "decode",
    "dequantize",
    "encode",
    "quantize",
    "random_vs_burst_ratio",
    "read_qt",
    "run",
    "sparsity",
    "write_qt",
]
