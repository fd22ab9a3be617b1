"""Stability regions of channel-aware random access with imperfect CSI."""

from .model import (
    ArrivalRates,
    LcqNodeParams,
    LcqSystemParams,
    NodeChannelParams,
    ParameterError,
    ReceptionProbs2,
    SystemParams,
    TransmitProbs,
    ValidationReport,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalRates",
    "LcqNodeParams",
    "LcqSystemParams",
    "NodeChannelParams",
    "ParameterError",
    "ReceptionProbs2",
    "SystemParams",
    "TransmitProbs",
    "ValidationReport",
    "validate",
]
