"""Python bindings for the UDI-linked implant data ecosystem."""

from .errors import UdiError
from ._core import (
    Ecosystem,
    code128_decode,
    code128_encode,
    datamatrix_decode,
    datamatrix_encode,
    decode_trace,
    format_udi,
    gtin_check_digit,
    parse_udi,
    pharmacode_decode,
    pharmacode_encode,
    rs_decode,
    rs_encode,
    run_scenario,
    synthesize_trace,
    verify_audit_chain,
)

__all__ = [
    "UdiError",
    "Ecosystem",
    "code128_decode",
    "code128_encode",
    "datamatrix_decode",
    "datamatrix_encode",
    "decode_trace",
    "format_udi",
    "gtin_check_digit",
    "parse_udi",
    "pharmacode_decode",
    "pharmacode_encode",
    "rs_decode",
    "rs_encode",
    "run_scenario",
    "synthesize_trace",
    "verify_audit_chain",
]
