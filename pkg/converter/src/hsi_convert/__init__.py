"""MATLAB container to slcgc raw-format converter."""

from .core import (
    AXIS_POLICIES,
    MAX_LABEL,
    ConversionError,
    ConversionSpec,
    VerifyReport,
    convert,
    read_container,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "AXIS_POLICIES",
    "MAX_LABEL",
    "ConversionError",
    "ConversionSpec",
    "VerifyReport",
    "convert",
    "read_container",
    "verify",
    "__version__",
]
