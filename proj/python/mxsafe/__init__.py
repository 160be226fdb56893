# SPDX-License-Identifier: Apache-2.0
"""Microscaling (MX) block quantization.

Thin wrapper over the C++ core: element codecs, block/tensor quantization,
error statistics and a bit-accurate MAC datapath model for GEMM.
"""

from ._core import (
    MxError,
    QuantizedTensor,
    count_quantization_events,
    decode,
    empirical_max_error,
    encode,
    error_report,
    formats,
    gemm,
    max_error_fp,
    max_error_int,
    quantize,
)

__all__ = [
    "MxError",
    "QuantizedTensor",
    "count_quantization_events",
    "decode",
    "empirical_max_error",
    "encode",
    "error_report",
    "formats",
    "gemm",
    "max_error_fp",
    "max_error_int",
    "quantize",
]
